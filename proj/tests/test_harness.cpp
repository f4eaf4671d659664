#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "pdafpf/config.hpp"
#include "pdafpf/errors.hpp"
#include "pdafpf/harness.hpp"

namespace pdafpf {
namespace {

namespace fs = std::filesystem;

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("pdafpf_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ScenarioConfig scenario(const std::string& name) {
  auto cfg = bundled_scenario(name);
  if (!cfg) throw std::runtime_error("missing bundled scenario " + name);
  return *cfg;
}

TEST(RunScenario, PdaClutterSchemaAndRowCount) {
  const RunRecord rec = run_scenario(scenario("pda-clutter"));
  const std::vector<std::string> expected{"time",     "truth_pos", "truth_vel", "meas_1", "meas_2", "meas_3",
                                          "meas_4",   "est_pos",   "est_vel",   "beta_0", "beta_1", "beta_2",
                                          "beta_3",   "beta_4"};
  EXPECT_EQ(rec.columns, expected);
  ASSERT_EQ(rec.rows.size(), 100u);
  EXPECT_NEAR(rec.rows.front()[0], 0.01, 1e-15);
  EXPECT_NEAR(rec.rows.back()[0], 1.0, 1e-12);
  for (const auto& row : rec.rows) {
    double sum = 0.0;
    for (const char* b : {"beta_0", "beta_1", "beta_2", "beta_3", "beta_4"}) {
      const double v = row[rec.column(b)];
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

TEST(RunScenario, OracleColumnsFollowToggles) {
  ScenarioConfig cfg = scenario("linear-1d");
  cfg.horizon = 0.05;
  cfg.oracles.grid = true;
  cfg.oracles.wonham = true;
  const auto cols = record_columns(cfg);
  for (const char* c : {"kalman_x", "grid_mean", "grid_var", "wonham_0", "wonham_1"}) {
    EXPECT_NE(std::find(cols.begin(), cols.end(), c), cols.end()) << c;
  }
  EXPECT_EQ(run_scenario(cfg).rows.size(), 50u);
}

TEST(RunScenario, TwoTargetRunCompletes) {
  const RunRecord rec = run_scenario(scenario("jpda-two-target"));
  ASSERT_EQ(rec.rows.size(), 1000u);
  for (const auto& row : rec.rows) {
    EXPECT_NEAR(row[rec.column("pi_1")] + row[rec.column("pi_2")], 1.0, 1e-12);
  }
}

TEST(RunScenario, BatchUsesConsecutiveSeeds) {
  ScenarioConfig cfg = scenario("pda-clutter");
  cfg.seed = 7;
  const auto batch = run_batch(cfg, 2);
  ASSERT_EQ(batch.size(), 2u);
  EXPECT_EQ(batch[0].config.seed, 7u);
  EXPECT_EQ(batch[1].config.seed, 8u);
  cfg.seed = 8;
  EXPECT_EQ(record_to_csv(batch[1]), record_to_csv(run_scenario(cfg)));
}

TEST(Outputs, SameSeedGivesByteIdenticalFiles) {
  const ScenarioConfig cfg = scenario("pda-clutter");
  const fs::path a = scratch_dir("same_a");
  const fs::path b = scratch_dir("same_b");
  const RunRecord rec = run_scenario(cfg);
  emit_outputs(rec, a);
  emit_outputs(run_scenario(cfg), b);
  for (const char* f : {"run.csv", "config.echo.json", "fig1.csv"}) {
    ASSERT_TRUE(fs::exists(a / f)) << f;
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const std::string first = slurp(a / "run.csv");
  emit_outputs(rec, a);
  EXPECT_EQ(slurp(a / "run.csv"), first);
}

TEST(Outputs, EmptyRecordWritesHeaderOnly) {
  RunRecord rec;
  rec.config = scenario("pda-clutter");
  rec.columns = record_columns(rec.config);
  const std::string csv = record_to_csv(rec);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1);
  EXPECT_EQ(csv.rfind("time,", 0), 0u);
}

TEST(Outputs, CsvRoundTripsSeventeenDigits) {
  RunRecord rec;
  rec.config = scenario("linear-1d");
  rec.columns = {"time", "a", "b"};
  rec.rows = {{0.1, 1.0 / 3.0, -2.718281828459045e-200}, {0.2, 6.02214076e23, 0.30000000000000004}};
  const fs::path dir = scratch_dir("roundtrip");
  std::ofstream(dir / "t.csv") << record_to_csv(rec);
  const CsvTable t = read_csv(dir / "t.csv");
  EXPECT_EQ(t.columns, rec.columns);
  ASSERT_EQ(t.rows.size(), 2u);
  for (std::size_t r = 0; r < 2; ++r) {
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(t.rows[r][c], rec.rows[r][c]);
  }
}

TEST(Outputs, UnwritableDirectoryIsIoError) {
  const fs::path dir = scratch_dir("unwritable");
  std::ofstream(dir / "file") << "x";
  EXPECT_THROW(emit_outputs(run_scenario(scenario("pda-clutter")), dir / "file" / "out"), IoError);
  EXPECT_THROW(read_csv(dir / "missing.csv"), IoError);
}

TEST(Config, JsonRoundTrip) {
  for (const auto& name : bundled_scenario_names()) {
    const std::string json = config_to_json(scenario(name));
    EXPECT_EQ(config_to_json(parse_config(json)), json) << name;
  }
}

TEST(Config, InvalidValuesAreConfigErrors) {
  ScenarioConfig cfg = scenario("pda-clutter");
  cfg.dt = -1.0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(parse_config("{not json"), ConfigError);
  EXPECT_THROW(resolve_scenario("/nonexistent/scenario.json"), std::exception);
  EXPECT_THROW(parse_gain_mode("quadratic"), ConfigError);
}

RunRecord synthetic_two_target(const std::vector<std::array<double, 5>>& rows) {
  RunRecord rec;
  rec.config = scenario("jpda-two-target");
  rec.columns = record_columns(rec.config);
  for (const auto& r : rows) {
    std::vector<double> row(rec.columns.size(), 0.0);
    row[rec.column("time")] = r[0];
    row[rec.column("truth1_pos")] = r[1];
    row[rec.column("truth2_pos")] = r[2];
    row[rec.column("est1_pos")] = r[3];
    row[rec.column("est2_pos")] = r[4];
    rec.rows.push_back(row);
  }
  return rec;
}

TEST(Metrics, RmseOverWindow) {
  RunRecord rec;
  rec.config = scenario("linear-1d");
  rec.columns = record_columns(rec.config);
  for (int k = 1; k <= 4; ++k) {
    std::vector<double> row(rec.columns.size(), 0.0);
    row[rec.column("time")] = 0.5 * k;
    row[rec.column("truth_x")] = 1.0;
    row[rec.column("est_x")] = 1.0 + (k % 2 ? 3.0 : -4.0);
    rec.rows.push_back(row);
  }
  EXPECT_DOUBLE_EQ(compute_rmse(rec, 0.0, 2.0), std::sqrt(12.5));
  EXPECT_DOUBLE_EQ(compute_rmse(rec, 0.5, 0.5), 3.0);
  EXPECT_THROW(compute_rmse(rec, 5.0, 6.0), ConfigError);
  EXPECT_THROW(compute_rmse(rec, 1.0, 0.0), ConfigError);
}

TEST(Metrics, CoalescenceAfterCrossing) {
  const RunRecord rec = synthetic_two_target({{0.1, 1.0, -1.0, 0.9, -0.9},
                                              {0.2, -0.1, 0.1, 0.0, 0.0},
                                              {0.3, -0.8, 0.8, -0.6, 0.5},
                                              {0.4, -1.2, 1.2, -0.4, 0.2},
                                              {0.5, -2.0, 2.0, -1.9, 1.8}});
  const CoalescenceMetric m = coalescence_metric(rec, 1.0);
  EXPECT_TRUE(m.crossed);
  EXPECT_DOUBLE_EQ(m.crossing_time, 0.2);
  EXPECT_NEAR(m.min_distance, 0.6, 1e-15);
  EXPECT_TRUE(m.identity_correct);
}

TEST(Metrics, SwappedTracksAreReported) {
  const RunRecord rec = synthetic_two_target({{0.1, 1.0, -1.0, 1.0, -1.0}, {0.2, 2.0, -2.0, -1.9, 1.9}});
  const CoalescenceMetric m = coalescence_metric(rec, 1.0);
  EXPECT_FALSE(m.crossed);
  EXPECT_FALSE(m.identity_correct);
  EXPECT_DOUBLE_EQ(m.min_distance, 2.0);
  RunRecord single;
  single.config = scenario("pda-clutter");
  EXPECT_THROW(coalescence_metric(single), ConfigError);
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PDAFPF_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch_dir("cli");
  EXPECT_EQ(run_cli("run --scenario pda-clutter --out " + (dir / "ok").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "ok" / "run.csv"));
  EXPECT_EQ(run_cli("run --scenario no-such-scenario --out " + (dir / "x").string()), 2);
  EXPECT_EQ(run_cli("run --scenario pda-clutter --dt -1 --out " + (dir / "x").string()), 2);
  EXPECT_EQ(run_cli("run --scenario pda-clutter --gain quadratic"), 2);

  std::string json = config_to_json(scenario("linear-1d"));
  const std::string from = "-0.5";
  json.replace(json.find(from), from.size(), "1e300");
  std::ofstream(dir / "blowup.json") << json;
  EXPECT_EQ(run_cli("run --scenario " + (dir / "blowup.json").string() + " --out " + (dir / "b").string()), 3);

  std::ofstream(dir / "file") << "x";
  EXPECT_EQ(run_cli("run --scenario pda-clutter --out " + (dir / "file" / "out").string()), 4);
  EXPECT_EQ(run_cli("plot --in " + (dir / "missing.csv").string() + " --out " + (dir / "p.svg").string()), 4);
  EXPECT_EQ(run_cli("plot --in " + (dir / "ok" / "run.csv").string() + " --out " + (dir / "p.svg").string()), 0);
}

}  // namespace
}  // namespace pdafpf
