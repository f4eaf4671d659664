#include <algorithm>
#include <functional>
#include <map>

#include "pdafpf/config.hpp"
#include "pdafpf/errors.hpp"

namespace pdafpf {

namespace {

using DriftFactory = std::function<DriftMap(const ModelSpec&)>;
using ObservationFactory = std::function<ObservationMap(const ModelSpec&)>;

const std::map<std::string, DriftFactory>& drift_registry() {
  static const std::map<std::string, DriftFactory> registry{
      {"linear",
       [](const ModelSpec& spec) -> DriftMap {
         const Matrix F = spec.drift_matrix;
         return [F](const Vector& x) -> Vector { return F * x; };
       }},
      {"neg", [](const ModelSpec&) -> DriftMap { return [](const Vector& x) -> Vector { return -x; }; }},
      {"neg_cube",
       [](const ModelSpec&) -> DriftMap {
         return [](const Vector& x) -> Vector { return -x.array().cube().matrix(); };
       }},
  };
  return registry;
}

const std::map<std::string, ObservationFactory>& observation_registry() {
  static const std::map<std::string, ObservationFactory> registry{
      {"linear",
       [](const ModelSpec& spec) -> ObservationMap {
         const RowVector H = spec.observation_row;
         return [H](const Vector& x) { return H.dot(x); };
       }},
      {"cube",
       [](const ModelSpec&) -> ObservationMap {
         return [](const Vector& x) { return x[0] * x[0] * x[0]; };
       }},
  };
  return registry;
}

template <typename Map>
std::vector<std::string> keys(const Map& map) {
  std::vector<std::string> out;
  for (const auto& [name, factory] : map) out.push_back(name);
  return out;
}

}  // namespace

std::vector<std::string> drift_names() { return keys(drift_registry()); }
std::vector<std::string> observation_names() { return keys(observation_registry()); }

TargetModel build_model(const ModelSpec& spec) {
  const auto d = spec.diffusion.size();
  const auto drift = drift_registry().find(spec.drift);
  if (drift == drift_registry().end()) throw ConfigError("unknown drift map '" + spec.drift + "'");
  const auto obs = observation_registry().find(spec.observation);
  if (obs == observation_registry().end()) {
    throw ConfigError("unknown observation map '" + spec.observation + "'");
  }
  if (spec.drift == "linear" && (spec.drift_matrix.rows() != d || spec.drift_matrix.cols() != d)) {
    throw ConfigError("drift_matrix must be " + std::to_string(d) + "x" + std::to_string(d));
  }
  if (spec.observation == "linear" && spec.observation_row.size() != d) {
    throw ConfigError("observation_row must have " + std::to_string(d) + " entries");
  }

  TargetModel model;
  if (spec.drift == "linear" && spec.observation == "linear") {
    model = TargetModel::make_linear(spec.drift_matrix, spec.diffusion, spec.observation_row, spec.obs_noise);
  } else {
    model.drift = drift->second(spec);
    model.obs_map = obs->second(spec);
    model.diffusion = spec.diffusion;
    model.obs_noise = spec.obs_noise;
    if (spec.drift == "neg" && spec.observation == "linear") {
      model.linear = LinearDynamics{-Matrix::Identity(d, d), spec.observation_row};
    }
  }
  model.validate();
  return model;
}

}  // namespace pdafpf
