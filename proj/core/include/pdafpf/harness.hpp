#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pdafpf/config.hpp"

namespace pdafpf {

/// Per-run numerical diagnostics; not part of run.csv.
struct RunDiagnostics {
  /// Simplex projection correction of every belief update (filter and oracles).
  std::vector<double> projections;
  int max_substeps = 1;
  int bayes_underflows = 0;
  int degenerate_gains = 0;
  double max_grid_drift = 0.0;

  /// Fraction of belief updates whose projection moved less than `limit`.
  double projection_fraction_below(double limit) const;
};

struct RunRecord {
  ScenarioConfig config;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  /// Truth association label per row (0..M for one target, 1..2 for two).
  std::vector<int> associations;
  RunDiagnostics diagnostics;

  /// Index of a column; throws ConfigError when it does not exist.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
  std::vector<double> series(std::string_view name) const;
};

/// Component names of the state: "x" for d = 1, "pos", "vel" for d = 2,
/// "x1".."xd" otherwise.
std::vector<std::string> state_names(Eigen::Index dim);

/// Column schema of run.csv for this config.
std::vector<std::string> record_columns(const ScenarioConfig& config);

/// Simulates truth and measurements, runs the filter and enabled oracles on
/// the same stream. One row per step, stamped at the end of the step.
RunRecord run_scenario(const ScenarioConfig& config);

/// `count` runs with seeds config.seed, config.seed + 1, ...
std::vector<RunRecord> run_batch(const ScenarioConfig& config, int count);

/// RMS position error over rows with time in [t0, t1]; `target` is 1-based.
double compute_rmse(const RunRecord& record, double t0, double t1, int target = 1);

struct CoalescenceMetric {
  /// Minimum estimated track separation once the truths have crossed and
  /// separated again by at least `separation` (whole run if they never cross).
  double min_distance = 0.0;
  /// Each estimate is nearer its own truth than the other truth at the end.
  bool identity_correct = false;
  bool crossed = false;
  double crossing_time = 0.0;
};

CoalescenceMetric coalescence_metric(const RunRecord& record, double separation = 1.0);

/// Writes run.csv, config.echo.json and the figure data file
/// (fig1.csv for one target, fig2.csv for two) into `out_dir`.
void emit_outputs(const RunRecord& record, const std::filesystem::path& out_dir);

/// CSV text of the record (header plus rows, 17 significant digits).
std::string record_to_csv(const RunRecord& record);

/// Parses a CSV produced by record_to_csv.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace pdafpf
