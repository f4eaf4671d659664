#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "pdafpf/fpf.hpp"
#include "pdafpf/models.hpp"

namespace pdafpf {

enum class ScenarioKind { kPdaClutter, kJpdaTwoTarget, kLinear1d, kCustom };
enum class AssociationMode { kSde, kBayes, kKnown };
enum class ClutterModel { kNoise, kUniform };

/// Target dynamics and observation. `drift` and `observation` name
/// registry entries; the matrices are only read by the linear entries.
struct ModelSpec {
  std::string drift = "linear";
  Matrix drift_matrix;
  Vector diffusion;
  std::string observation = "linear";
  RowVector observation_row;
  double obs_noise = 1.0;
};

struct TargetSpec {
  /// Truth at t = 0. When absent the truth is drawn from the prior.
  std::optional<Vector> initial;
  Vector prior_mean;
  Matrix prior_cov;
};

struct ClutterSpec {
  /// kNoise: off-association channels are pure observation noise.
  /// kUniform: each off-association channel carries a clutter point drawn
  /// uniformly from [center - volume / 2, center + volume / 2] every step.
  ClutterModel model = ClutterModel::kNoise;
  double volume = 1.0;
  double center = 0.0;
};

struct OracleToggles {
  bool kalman = false;
  bool grid = false;
  bool wonham = false;
  bool bayes = false;
};

struct ScenarioConfig {
  std::string name = "custom";
  ScenarioKind kind = ScenarioKind::kCustom;
  ModelSpec model;
  /// One entry for PDA scenarios, two for the JPDA scenario.
  std::vector<TargetSpec> targets;
  /// M, the number of measurement channels.
  int channels = 1;
  double rate = 1.0;
  ClutterSpec clutter;
  double dt = 0.01;
  double horizon = 1.0;
  Eigen::Index particles = 1000;
  std::uint64_t seed = 0;
  AssociationMode association = AssociationMode::kSde;
  GainMode gain = GainMode::kLinear;
  int gain_stride = 1;
  double bandwidth = 0.0;
  /// Association chain state at t = 0; drawn uniformly when absent.
  std::optional<int> initial_association;
  /// One target: the truth chain moves on {1..M} only (the target is seen on
  /// some channel every step), keeping the pairwise jump intensity rate / M.
  bool always_detected = false;
  /// beta(0) (M + 1 entries) or pi(0) (2 entries); uniform when empty.
  std::vector<double> initial_belief;
  OracleToggles oracles;
  int grid_cells = 400;
  unsigned threads = 1;

  bool two_target() const { return targets.size() == 2; }
  long steps() const;
  /// Throws ConfigError on the first violated constraint.
  void validate() const;
};

/// Builds the target model from the registry.
TargetModel build_model(const ModelSpec& spec);

/// Registered names.
std::vector<std::string> drift_names();
std::vector<std::string> observation_names();

ScenarioConfig parse_config(std::string_view json);
ScenarioConfig load_config(const std::filesystem::path& path);
/// Fully resolved JSON; parse_config(config_to_json(c)) reproduces c.
std::string config_to_json(const ScenarioConfig& config);

/// "pda-clutter", "jpda-two-target", "linear-1d".
std::vector<std::string> bundled_scenario_names();
std::optional<ScenarioConfig> bundled_scenario(std::string_view name);
/// A bundled name, or else a path to a JSON config.
ScenarioConfig resolve_scenario(const std::string& name_or_path);

std::string to_string(ScenarioKind kind);
std::string to_string(AssociationMode mode);
std::string to_string(GainMode mode);
std::string to_string(ClutterModel model);
AssociationMode parse_association_mode(std::string_view text);
GainMode parse_gain_mode(std::string_view text);

}  // namespace pdafpf
