// omcrow command-line front end.
//
//   omcrow <command> --config <path> [--out <path>] [--format csv|json] [--no-timestamp]
//
// Exit codes: 0 success, 1 configuration error, 2 numerical failure.

#include <exception>
#include <iostream>
#include <string>

#include <omcrow/omcrow.hpp>

namespace {

constexpr const char kUsage[] =
    "usage: omcrow <command> --config <path> [--out <path>] [--format csv|json] "
    "[--no-timestamp]\n"
    "commands: bands bandwidth_sweep velocity_sweep mixing_sweep gap_sweep propagate "
    "stop_release\n";

void emit(const omcrow::ResultTable& table, const omcrow::RunConfig& cfg) {
  const std::string payload = omcrow::serialize(table, cfg.format);
  if (cfg.output.empty())
    std::cout << payload;
  else
    omcrow::write_text_file(cfg.output, payload);
}

}  // namespace

int main(int argc, char** argv) {
  std::string command, config_path, out_path, format;
  bool with_timestamp = true;

  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    auto next = [&](const char* flag) -> std::string {
      if (i + 1 >= argc) {
        std::cerr << "config error: " << flag << " requires a value\n" << kUsage;
        std::exit(1);
      }
      return argv[++i];
    };
    if (arg == "--config") config_path = next("--config");
    else if (arg == "--out") out_path = next("--out");
    else if (arg == "--format") format = next("--format");
    else if (arg == "--no-timestamp") with_timestamp = false;
    else if (arg == "--help" || arg == "-h") {
      std::cout << kUsage;
      return 0;
    } else if (!arg.empty() && arg[0] == '-') {
      std::cerr << "config error: unknown option \"" << arg << "\"\n" << kUsage;
      return 1;
    } else if (command.empty()) {
      command = arg;
    } else {
      std::cerr << "config error: unexpected argument \"" << arg << "\"\n" << kUsage;
      return 1;
    }
  }

  if (command.empty() || config_path.empty()) {
    std::cerr << "config error: a command and --config <path> are required\n" << kUsage;
    return 1;
  }

  omcrow::RunConfig cfg;
  try {
    cfg = omcrow::parse_config(omcrow::read_text_file(config_path));

    if (command != omcrow::command_name(cfg.command))
      throw omcrow::ConfigError("command line says \"" + command + "\" but the config file says \"" +
                                std::string(omcrow::command_name(cfg.command)) + "\"");
    if (!out_path.empty()) cfg.output = out_path;
    if (!format.empty()) {
      if (format == "csv") cfg.format = omcrow::OutputFormat::Csv;
      else if (format == "json") cfg.format = omcrow::OutputFormat::Json;
      else throw omcrow::ConfigError("--format must be csv or json, got \"" + format + "\"");
    }
  } catch (const omcrow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  omcrow::ResultTable table;
  try {
    table = omcrow::run_command(cfg, with_timestamp);
  } catch (const omcrow::AbortedRun& e) {
    std::cerr << "numerical failure: " << e.what() << " (partial trace written)\n";
    try {
      emit(e.partial, cfg);
    } catch (const std::exception& io) {
      std::cerr << "additionally failed to write partial output: " << io.what() << "\n";
    }
    return 2;
  } catch (const omcrow::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  }

  // output-path problems are configuration mistakes, not numerical ones
  try {
    emit(table, cfg);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
