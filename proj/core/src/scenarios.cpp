#include <filesystem>

#include "pdafpf/config.hpp"
#include "pdafpf/errors.hpp"

namespace pdafpf {

namespace {

ModelSpec white_noise_acceleration(double sigma_v, double sigma_w) {
  ModelSpec spec;
  spec.drift_matrix.resize(2, 2);
  spec.drift_matrix << 0.0, 1.0, 0.0, 0.0;
  spec.diffusion.resize(2);
  spec.diffusion << 0.0, sigma_v;
  spec.observation_row.resize(2);
  spec.observation_row << 1.0, 0.0;
  spec.obs_noise = sigma_w;
  return spec;
}

Vector vec2(double a, double b) {
  Vector v(2);
  v << a, b;
  return v;
}

Matrix diag2(double a, double b) { return vec2(a, b).asDiagonal(); }

ScenarioConfig pda_clutter() {
  ScenarioConfig c;
  c.name = "pda-clutter";
  c.kind = ScenarioKind::kPdaClutter;
  c.model = white_noise_acceleration(1.0, 0.06);
  c.targets = {{vec2(0.0, 6.0), vec2(0.0, 6.0), diag2(0.01, 0.25)}};
  c.channels = 4;
  c.rate = 1.0;
  c.clutter = {ClutterModel::kNoise, 10.0, 3.0};
  c.dt = 0.01;
  c.horizon = 1.0;
  c.particles = 1000;
  c.initial_association = 1;
  c.always_detected = true;
  return c;
}

ScenarioConfig jpda_two_target() {
  ScenarioConfig c;
  c.name = "jpda-two-target";
  c.kind = ScenarioKind::kJpdaTwoTarget;
  c.model = white_noise_acceleration(2.0, 0.005);
  c.targets = {{vec2(1.0, -3.5), vec2(1.0, -3.5), diag2(0.01, 0.25)},
               {vec2(-1.0, 3.5), vec2(-1.0, 3.5), diag2(0.01, 0.25)}};
  c.channels = 2;
  c.rate = 1.0;
  c.dt = 0.001;
  c.horizon = 1.0;
  c.particles = 1000;
  c.initial_association = 1;
  c.initial_belief = {0.5, 0.5};
  return c;
}

ScenarioConfig linear_1d() {
  ScenarioConfig c;
  c.name = "linear-1d";
  c.kind = ScenarioKind::kLinear1d;
  c.model.drift_matrix = Matrix::Constant(1, 1, -0.5);
  c.model.diffusion = Vector::Constant(1, 0.3);
  c.model.observation_row = RowVector::Constant(1, 1.0);
  c.model.obs_noise = 0.3;
  c.targets = {{std::nullopt, Vector::Zero(1), Matrix::Identity(1, 1)}};
  c.channels = 1;
  c.rate = 0.0;
  c.dt = 1e-3;
  c.horizon = 2.0;
  c.particles = 1000;
  c.association = AssociationMode::kKnown;
  c.initial_association = 1;
  c.oracles.kalman = true;
  return c;
}

}  // namespace

std::vector<std::string> bundled_scenario_names() { return {"pda-clutter", "jpda-two-target", "linear-1d"}; }

std::optional<ScenarioConfig> bundled_scenario(std::string_view name) {
  if (name == "pda-clutter") return pda_clutter();
  if (name == "jpda-two-target") return jpda_two_target();
  if (name == "linear-1d") return linear_1d();
  return std::nullopt;
}

ScenarioConfig resolve_scenario(const std::string& name_or_path) {
  if (auto bundled = bundled_scenario(name_or_path)) return *bundled;
  if (!std::filesystem::exists(name_or_path)) {
    std::string names;
    for (const auto& n : bundled_scenario_names()) names += (names.empty() ? "" : ", ") + n;
    throw ConfigError("scenario '" + name_or_path + "' is neither a bundled name (" + names + ") nor a file");
  }
  return load_config(name_or_path);
}

}  // namespace pdafpf
