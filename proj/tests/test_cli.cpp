#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include <gtest/gtest.h>
#include <omcrow/table.hpp>

// OMCROW_CLI_PATH is injected by the build and points at the built binary.

namespace {

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string scratch_path(const std::string& tag) {
  static int counter = 0;
  return testing::TempDir() + "omcrow_cli_" + std::to_string(::getpid()) + "_" +
         std::to_string(counter++) + "_" + tag;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return "";
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void spill(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  ASSERT_TRUE(out.is_open()) << path;
  out << content;
}

CliResult run_cli(const std::string& args) {
  const std::string out_path = scratch_path("stdout");
  const std::string err_path = scratch_path("stderr");
  const std::string cmd =
      std::string(OMCROW_CLI_PATH) + " " + args + " > " + out_path + " 2> " + err_path;
  const int rc = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  r.out = slurp(out_path);
  r.err = slurp(err_path);
  return r;
}

const char kBandsConfig[] =
    "command = bands\n"
    "n_k = 16\n"
    "[params]\n"
    "n_sites = 32\n";

}  // namespace

TEST(Cli, HelpExitsCleanly) {
  const CliResult r = run_cli("--help");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.out.find("usage"), std::string::npos);
}

TEST(Cli, BandsToStdout) {
  const std::string cfg = scratch_path("bands.cfg");
  spill(cfg, kBandsConfig);
  const CliResult r = run_cli("bands --config " + cfg + " --no-timestamp");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const omcrow::ResultTable t = omcrow::read_csv(r.out);
  EXPECT_EQ(t.rows.size(), 16u);
  bool found = false;
  for (const auto& [k, v] : t.metadata)
    if (k == "config.command") {
      EXPECT_EQ(v, "bands");
      found = true;
    }
  EXPECT_TRUE(found);
}

TEST(Cli, WritesOutputFile) {
  const std::string cfg = scratch_path("bands.cfg");
  const std::string out = scratch_path("bands.csv");
  spill(cfg, kBandsConfig);
  const CliResult r = run_cli("bands --config " + cfg + " --out " + out + " --no-timestamp");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  EXPECT_TRUE(r.out.empty());
  const omcrow::ResultTable t = omcrow::read_csv(slurp(out));
  EXPECT_EQ(t.rows.size(), 16u);
}

TEST(Cli, DeterministicWithoutTimestamp) {
  // identical config and flags must produce identical bytes, so both runs
  // write the same path (the table echoes the resolved output location)
  const std::string cfg = scratch_path("bands.cfg");
  const std::string out = scratch_path("run.csv");
  spill(cfg, kBandsConfig);
  ASSERT_EQ(run_cli("bands --config " + cfg + " --out " + out + " --no-timestamp").exit_code, 0);
  const std::string first = slurp(out);
  ASSERT_EQ(run_cli("bands --config " + cfg + " --out " + out + " --no-timestamp").exit_code, 0);
  const std::string second = slurp(out);
  ASSERT_FALSE(first.empty());
  EXPECT_EQ(first, second);
}

TEST(Cli, FormatFlagOverridesConfig) {
  const std::string cfg = scratch_path("bands.cfg");
  spill(cfg, kBandsConfig);  // config default is csv
  const CliResult r = run_cli("bands --config " + cfg + " --format json --no-timestamp");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  const omcrow::ResultTable t = omcrow::read_json(r.out);
  EXPECT_EQ(t.rows.size(), 16u);
  EXPECT_EQ(t.columns.size(), 9u);
}

TEST(Cli, ConfigErrorsExitOne) {
  const std::string cfg = scratch_path("bad.cfg");
  spill(cfg, "command = bands\nn_k = banana\n");
  CliResult r = run_cli("bands --config " + cfg);
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("config error"), std::string::npos);
  EXPECT_NE(r.err.find("n_k"), std::string::npos);

  r = run_cli("bands --config " + scratch_path("missing.cfg"));
  EXPECT_EQ(r.exit_code, 1);

  r = run_cli("bands");  // --config required
  EXPECT_EQ(r.exit_code, 1);

  r = run_cli("--config " + cfg);  // positional command required
  EXPECT_EQ(r.exit_code, 1);

  const std::string good = scratch_path("good.cfg");
  spill(good, kBandsConfig);
  r = run_cli("velocity_sweep --config " + good);  // command does not match config
  EXPECT_EQ(r.exit_code, 1);

  r = run_cli("bands --config " + good + " --format yaml");
  EXPECT_EQ(r.exit_code, 1);

  r = run_cli("bands --config " + good + " --frobnicate");
  EXPECT_EQ(r.exit_code, 1);

  r = run_cli("bands --config " + good + " --out /nonexistent_dir_omcrow/x.csv");
  EXPECT_EQ(r.exit_code, 1);
  EXPECT_NE(r.err.find("config error"), std::string::npos);
}

TEST(Cli, StopReleaseReportRoundTrip) {
  const std::string cfg = scratch_path("sr.cfg");
  spill(cfg,
        "command = stop_release\n"
        "dt = 2e-4\n"
        "sample_every = 2500\n"
        "[params]\n"
        "n_sites = 64\n"
        "detuning_om = -100\n"
        "[protocol]\n"
        "initial_dom = -100\n"
        "final_dom = 100\n"
        "t_hold_pre = 2\n"
        "t_ramp = 10\n"
        "t_hold_post = 2\n"
        "[pulse]\n"
        "center_site = 16\n"
        "sigma = 6\n");
  const CliResult r = run_cli("stop_release --config " + cfg + " --no-timestamp");
  ASSERT_EQ(r.exit_code, 0) << r.err;
  // this short ramp is deliberately diabatic, so the warning must fire
  EXPECT_NE(r.err.find("warning"), std::string::npos);

  const omcrow::ResultTable t = omcrow::read_json(r.out);
  ASSERT_EQ(t.report.size(), 8u);
  double fidelity = -1.0, v_initial = 0.0, v_held = 1e9;
  for (const auto& [k, v] : t.report) {
    if (k == "release_fidelity") fidelity = v;
    if (k == "v_initial") v_initial = v;
    if (k == "v_held") v_held = v;
  }
  EXPECT_GT(fidelity, 0.5);
  EXPECT_LE(fidelity, 1.0 + 1e-12);
  EXPECT_GT(v_initial, 1.5);
  EXPECT_LT(std::abs(v_held), 0.2 * v_initial);
  EXPECT_FALSE(t.rows.empty());
}
