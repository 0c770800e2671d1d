#pragma once

#include <cmath>
#include <cstdlib>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynamics.hpp"
#include "model.hpp"

namespace omcrow {

// Raised for malformed run configurations; the message names the offending
// key and, where one exists, the source line.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Command {
  Bands,
  BandwidthSweep,
  VelocitySweep,
  MixingSweep,
  GapSweep,
  Propagate,
  StopRelease,
};

enum class OutputFormat { Csv, Json };

struct SweepSpec {
  std::string variable = "detuning_om";
  double start = 0.0;
  double stop = 0.0;
  int points = 0;
};

struct RunConfig {
  Command command = Command::Bands;
  ArrayParams params;

  bool has_sweep = false;
  SweepSpec sweep;
  bool has_protocol = false;
  DetuningProtocol protocol;
  bool has_release = false;
  DetuningProtocol release;
  bool has_pulse = false;
  PulseSpec pulse;

  int n_k = 256;
  double k_fixed = M_PI / 2.0;  // kL at which velocity/mixing sweeps are evaluated
  double dt = 0.0;              // resolved per command when not set explicitly
  double t_end = 50.0;
  bool t_end_set = false;
  long sample_every = 0;  // resolved per command when not set explicitly
  bool corotating = true;
  Boundary boundary = Boundary::Periodic;

  std::string output;  // empty = stdout
  OutputFormat format = OutputFormat::Csv;
};

inline const char* command_name(Command c) {
  switch (c) {
    case Command::Bands: return "bands";
    case Command::BandwidthSweep: return "bandwidth_sweep";
    case Command::VelocitySweep: return "velocity_sweep";
    case Command::MixingSweep: return "mixing_sweep";
    case Command::GapSweep: return "gap_sweep";
    case Command::Propagate: return "propagate";
    case Command::StopRelease: return "stop_release";
  }
  return "?";
}

namespace detail {

inline std::string cfg_loc(const std::string& key, int line) {
  return "line " + std::to_string(line) + ": key \"" + key + "\"";
}

inline double cfg_double(const std::string& v, const std::string& key, int line) {
  const char* s = v.c_str();
  char* end = nullptr;
  const double x = std::strtod(s, &end);
  if (end == s || *end != '\0' || !std::isfinite(x))
    throw ConfigError(cfg_loc(key, line) + ": expected a finite number, got \"" + v + "\"");
  return x;
}

inline long cfg_int(const std::string& v, const std::string& key, int line) {
  const char* s = v.c_str();
  char* end = nullptr;
  const long x = std::strtol(s, &end, 10);
  if (end == s || *end != '\0')
    throw ConfigError(cfg_loc(key, line) + ": expected an integer, got \"" + v + "\"");
  return x;
}

inline bool cfg_bool(const std::string& v, const std::string& key, int line) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ConfigError(cfg_loc(key, line) + ": expected true or false, got \"" + v + "\"");
}

inline std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// Parses the key = value run-configuration format:
//   command = bands            # top-level keys before any section
//   [params]                   # sections: params, sweep, protocol, release, pulse
//   omega_m = 100
// Full-line # comments and blank lines are skipped. Unknown keys, malformed
// values, and violated constraints raise ConfigError naming key and line.
inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  std::map<std::string, int> seen;  // full key -> line, for late cross-field errors

  bool has_command = false, has_dt = false, has_sample = false, has_format = false;
  std::string section;

  size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    if (eol == std::string::npos) eol = text.size();
    std::string line = detail::trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    ++line_no;
    if (line.empty() || line[0] == '#') {
      if (pos > text.size()) break;
      continue;
    }

    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("line " + std::to_string(line_no) + ": unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section != "params" && section != "sweep" && section != "protocol" &&
          section != "release" && section != "pulse")
        throw ConfigError("line " + std::to_string(line_no) + ": unknown section \"[" + section +
                          "]\"");
      if (section == "sweep") cfg.has_sweep = true;
      if (section == "protocol") cfg.has_protocol = true;
      if (section == "release") cfg.has_release = true;
      if (section == "pulse") cfg.has_pulse = true;
      if (pos > text.size()) break;
      continue;
    }

    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const std::string full = section.empty() ? key : section + "." + key;
    if (key.empty())
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    seen[full] = line_no;

    const int ln = line_no;
    if (section.empty()) {
      if (key == "command") {
        has_command = true;
        if (value == "bands") cfg.command = Command::Bands;
        else if (value == "bandwidth_sweep") cfg.command = Command::BandwidthSweep;
        else if (value == "velocity_sweep") cfg.command = Command::VelocitySweep;
        else if (value == "mixing_sweep") cfg.command = Command::MixingSweep;
        else if (value == "gap_sweep") cfg.command = Command::GapSweep;
        else if (value == "propagate") cfg.command = Command::Propagate;
        else if (value == "stop_release") cfg.command = Command::StopRelease;
        else
          throw ConfigError(detail::cfg_loc(key, ln) + ": unknown command \"" + value + "\"");
      } else if (key == "output") {
        cfg.output = value;
      } else if (key == "format") {
        has_format = true;
        if (value == "csv") cfg.format = OutputFormat::Csv;
        else if (value == "json") cfg.format = OutputFormat::Json;
        else
          throw ConfigError(detail::cfg_loc(key, ln) + ": expected csv or json, got \"" + value +
                            "\"");
      } else if (key == "n_k") {
        const long v = detail::cfg_int(value, key, ln);
        if (v < 2) throw ConfigError(detail::cfg_loc(key, ln) + ": must be >= 2");
        cfg.n_k = static_cast<int>(v);
      } else if (key == "k_fixed") {
        cfg.k_fixed = detail::cfg_double(value, key, ln);
      } else if (key == "dt") {
        has_dt = true;
        cfg.dt = detail::cfg_double(value, key, ln);
        if (!(cfg.dt > 0.0)) throw ConfigError(detail::cfg_loc(key, ln) + ": must be > 0");
      } else if (key == "t_end") {
        cfg.t_end = detail::cfg_double(value, key, ln);
        cfg.t_end_set = true;
        if (!(cfg.t_end >= 0.0)) throw ConfigError(detail::cfg_loc(key, ln) + ": must be >= 0");
      } else if (key == "sample_every") {
        has_sample = true;
        cfg.sample_every = detail::cfg_int(value, key, ln);
        if (cfg.sample_every < 1) throw ConfigError(detail::cfg_loc(key, ln) + ": must be >= 1");
      } else if (key == "corotating") {
        cfg.corotating = detail::cfg_bool(value, key, ln);
      } else if (key == "boundary") {
        if (value == "periodic") cfg.boundary = Boundary::Periodic;
        else if (value == "open") cfg.boundary = Boundary::Open;
        else
          throw ConfigError(detail::cfg_loc(key, ln) + ": expected periodic or open, got \"" +
                            value + "\"");
      } else {
        throw ConfigError("line " + std::to_string(ln) + ": unknown key \"" + key + "\"");
      }
    } else if (section == "params") {
      if (key == "n_sites") {
        const long v = detail::cfg_int(value, full, ln);
        if (v < 2) throw ConfigError(detail::cfg_loc(full, ln) + ": must be >= 2");
        cfg.params.n_sites = static_cast<int>(v);
      } else if (key == "spacing") {
        cfg.params.spacing = detail::cfg_double(value, full, ln);
        if (!(cfg.params.spacing > 0.0))
          throw ConfigError(detail::cfg_loc(full, ln) + ": must be > 0");
      } else if (key == "omega_m") {
        cfg.params.omega_m = detail::cfg_double(value, full, ln);
        if (!(cfg.params.omega_m > 0.0))
          throw ConfigError(detail::cfg_loc(full, ln) + ": must be > 0");
      } else if (key == "g_eff") {
        cfg.params.g_eff = detail::cfg_double(value, full, ln);
        if (!(cfg.params.g_eff >= 0.0))
          throw ConfigError(detail::cfg_loc(full, ln) + ": must be >= 0");
      } else if (key == "hopping") {
        cfg.params.hopping = detail::cfg_double(value, full, ln);
        if (!(cfg.params.hopping > 0.0))
          throw ConfigError(detail::cfg_loc(full, ln) + ": must be > 0");
      } else if (key == "detuning_om") {
        cfg.params.detuning_om = detail::cfg_double(value, full, ln);
      } else {
        throw ConfigError("line " + std::to_string(ln) + ": unknown key \"" + full + "\"");
      }
    } else if (section == "sweep") {
      if (key == "variable") {
        if (value != "detuning_om")
          throw ConfigError(detail::cfg_loc(full, ln) +
                            ": only detuning_om sweeps are supported, got \"" + value + "\"");
        cfg.sweep.variable = value;
      } else if (key == "start") {
        cfg.sweep.start = detail::cfg_double(value, full, ln);
      } else if (key == "stop") {
        cfg.sweep.stop = detail::cfg_double(value, full, ln);
      } else if (key == "points") {
        const long v = detail::cfg_int(value, full, ln);
        if (v < 2) throw ConfigError(detail::cfg_loc(full, ln) + ": must be >= 2");
        cfg.sweep.points = static_cast<int>(v);
      } else {
        throw ConfigError("line " + std::to_string(ln) + ": unknown key \"" + full + "\"");
      }
    } else if (section == "protocol" || section == "release") {
      DetuningProtocol& pr = (section == "protocol") ? cfg.protocol : cfg.release;
      if (key == "initial_dom") {
        pr.initial_dom = detail::cfg_double(value, full, ln);
      } else if (key == "final_dom") {
        pr.final_dom = detail::cfg_double(value, full, ln);
      } else if (key == "t_hold_pre" || key == "t_ramp" || key == "t_hold_post") {
        const double v = detail::cfg_double(value, full, ln);
        if (!(v >= 0.0)) throw ConfigError(detail::cfg_loc(full, ln) + ": must be >= 0");
        if (key == "t_hold_pre") pr.t_hold_pre = v;
        else if (key == "t_ramp") pr.t_ramp = v;
        else pr.t_hold_post = v;
      } else if (key == "shape") {
        if (value == "linear") pr.shape = RampShape::Linear;
        else if (value == "smoothstep") pr.shape = RampShape::Smoothstep;
        else
          throw ConfigError(detail::cfg_loc(full, ln) +
                            ": expected linear or smoothstep, got \"" + value + "\"");
      } else {
        throw ConfigError("line " + std::to_string(ln) + ": unknown key \"" + full + "\"");
      }
    } else {  // pulse
      if (key == "center_site") {
        cfg.pulse.center_site = static_cast<int>(detail::cfg_int(value, full, ln));
      } else if (key == "carrier_kl") {
        cfg.pulse.carrier_kl = detail::cfg_double(value, full, ln);
      } else if (key == "sigma") {
        cfg.pulse.sigma = detail::cfg_double(value, full, ln);
        if (!(cfg.pulse.sigma >= 0.0))
          throw ConfigError(detail::cfg_loc(full, ln) + ": must be >= 0");
      } else {
        throw ConfigError("line " + std::to_string(ln) + ": unknown key \"" + full + "\"");
      }
    }
    if (pos > text.size()) break;
  }

  if (!has_command) throw ConfigError("missing required key \"command\"");

  auto where = [&seen](const std::string& key) {
    auto it = seen.find(key);
    return (it == seen.end()) ? std::string("key \"") + key + "\""
                              : "key \"" + key + "\" (line " + std::to_string(it->second) + ")";
  };

  const bool is_sweep = cfg.command == Command::BandwidthSweep ||
                        cfg.command == Command::VelocitySweep ||
                        cfg.command == Command::MixingSweep || cfg.command == Command::GapSweep;
  if (is_sweep) {
    if (!cfg.has_sweep)
      throw ConfigError(std::string("command \"") + command_name(cfg.command) +
                        "\" requires a [sweep] section (missing key \"sweep.points\")");
    if (cfg.sweep.points < 2)
      throw ConfigError(where("sweep.points") + ": must be set to >= 2 for sweep commands");
  }
  if (cfg.command == Command::StopRelease) {
    if (!cfg.has_protocol)
      throw ConfigError("command \"stop_release\" requires a [protocol] section (missing key "
                        "\"protocol.initial_dom\")");
    if (!cfg.has_pulse)
      throw ConfigError("command \"stop_release\" requires a [pulse] section (missing key "
                        "\"pulse.center_site\")");
  }
  if (cfg.command == Command::Propagate && !cfg.has_pulse)
    throw ConfigError("command \"propagate\" requires a [pulse] section (missing key "
                      "\"pulse.center_site\")");

  if (cfg.has_pulse) {
    if (cfg.pulse.center_site < 0 || cfg.pulse.center_site >= cfg.params.n_sites)
      throw ConfigError(where("pulse.center_site") + ": must lie in [0, n_sites)");
    if (6.0 * cfg.pulse.sigma >= static_cast<double>(cfg.params.n_sites))
      throw ConfigError(where("pulse.sigma") + ": pulse too wide for lattice (need 3*sigma < n_sites/2)");
    if (!(cfg.pulse.carrier_kl >= -M_PI && cfg.pulse.carrier_kl <= M_PI))
      throw ConfigError(where("pulse.carrier_kl") + ": outside first Brillouin zone [-pi, pi]");
  }

  // Default release protocol mirrors the stop protocol: ramp straight back,
  // then hold at the recovered detuning for the stop protocol's pre-hold.
  if (cfg.command == Command::StopRelease && !cfg.has_release) {
    cfg.release.initial_dom = cfg.protocol.final_dom;
    cfg.release.final_dom = cfg.protocol.initial_dom;
    cfg.release.t_hold_pre = 0.0;
    cfg.release.t_ramp = cfg.protocol.t_ramp;
    cfg.release.t_hold_post = cfg.protocol.t_hold_pre;
    cfg.release.shape = cfg.protocol.shape;
    cfg.has_release = true;
  }

  if (!has_dt) cfg.dt = (cfg.command == Command::StopRelease) ? 1.6e-4 : 1e-3;
  if (!has_sample) {
    const double spacing = (cfg.command == Command::StopRelease) ? 1.0 : 0.1;
    cfg.sample_every = std::max(1L, std::lround(spacing / cfg.dt));
  }
  if (!has_format)
    cfg.format = (cfg.command == Command::StopRelease) ? OutputFormat::Json : OutputFormat::Csv;

  return cfg;
}

}  // namespace omcrow
