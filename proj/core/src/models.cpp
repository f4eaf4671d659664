#include "pdafpf/models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pdafpf/errors.hpp"

namespace pdafpf {

namespace {

void require_finite(const Vector& v, const char* what, const char* where) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) {
      std::ostringstream msg;
      msg << where << ": non-finite " << what << " component " << i << " (" << v[i] << ")";
      throw NumericalError(msg.str());
    }
  }
}

}  // namespace

void TargetModel::validate() const {
  if (!drift || !obs_map) throw ConfigError("TargetModel: drift and observation maps are required");
  if (diffusion.size() == 0) throw ConfigError("TargetModel: state dimension must be positive");
  if ((diffusion.array() < 0.0).any()) throw ConfigError("TargetModel: diffusion entries must be >= 0");
  if (!(obs_noise > 0.0) || !std::isfinite(obs_noise)) {
    throw ConfigError("TargetModel: obs_noise must be positive and finite");
  }
  if (linear) {
    const auto d = dim();
    if (linear->drift.rows() != d || linear->drift.cols() != d || linear->observation.size() != d) {
      throw ConfigError("TargetModel: linear form does not match the state dimension");
    }
  }
}

TargetModel TargetModel::make_linear(Matrix drift_matrix, Vector diffusion, RowVector observation,
                                     double obs_noise) {
  TargetModel model;
  model.linear = LinearDynamics{std::move(drift_matrix), std::move(observation)};
  const Matrix F = model.linear->drift;
  const RowVector H = model.linear->observation;
  model.drift = [F](const Vector& x) -> Vector { return F * x; };
  model.obs_map = [H](const Vector& x) { return H.dot(x); };
  model.diffusion = std::move(diffusion);
  model.obs_noise = obs_noise;
  model.validate();
  return model;
}

TargetModel TargetModel::scalar_linear(double alpha, double sigma_b, double gamma, double sigma_w) {
  return make_linear(Matrix::Constant(1, 1, alpha), Vector::Constant(1, sigma_b),
                     RowVector::Constant(1, gamma), sigma_w);
}

TargetModel TargetModel::white_noise_acceleration(Vector diffusion, double obs_noise) {
  Matrix F(2, 2);
  F << 0.0, 1.0, 0.0, 0.0;
  RowVector H(2);
  H << 1.0, 0.0;
  return make_linear(F, std::move(diffusion), H, obs_noise);
}

Matrix AssociationProcess::intensity() const {
  Matrix lambda = Matrix::Constant(num_states, num_states, jump_intensity());
  lambda.diagonal().setConstant(-rate);
  if (num_states == 1) lambda(0, 0) = 0.0;
  return lambda;
}

void AssociationProcess::validate() const {
  if (num_states < 1) throw ConfigError("AssociationProcess: num_states must be >= 1");
  if (!(rate >= 0.0) || !std::isfinite(rate)) throw ConfigError("AssociationProcess: rate must be >= 0");
  if (current < 0 || current >= num_states) {
    throw ConfigError("AssociationProcess: current state " + std::to_string(current) +
                      " outside {0.." + std::to_string(num_states - 1) + "}");
  }
}

Vector step_truth(const TargetModel& model, const Vector& state, double dt, const Vector& noise) {
  if (!(dt > 0.0)) throw ConfigError("step_truth: dt must be positive");
  if (state.size() != model.dim() || noise.size() != model.dim()) {
    throw ConfigError("step_truth: state/noise dimension mismatch");
  }
  require_finite(state, "state", "step_truth");
  const Vector a = model.drift(state);
  require_finite(a, "drift", "step_truth");
  Vector next = state + a * dt + model.diffusion.cwiseProduct(noise) * std::sqrt(dt);
  require_finite(next, "next state", "step_truth");
  return next;
}

double association_stay_probability(const AssociationProcess& proc, double dt) {
  const int k = proc.num_states;
  if (k <= 1 || proc.rate == 0.0) return 1.0;
  const double leave = proc.rate * dt;
  if (leave < 0.5) return 1.0 - leave;
  // Compose n symmetric Euler sub-steps, each leaving with probability q.
  const double n = std::ceil(leave / 0.5) + 1.0;
  const double q = leave / n;
  const double kk = static_cast<double>(k);
  const double contraction = 1.0 - q * kk / (kk - 1.0);
  return 1.0 / kk + (1.0 - 1.0 / kk) * std::pow(contraction, n);
}

int step_association(const AssociationProcess& proc, double dt, double u) {
  proc.validate();
  if (!(dt > 0.0)) throw ConfigError("step_association: dt must be positive");
  const double stay = association_stay_probability(proc, dt);
  if (u < stay) return proc.current;
  const int others = proc.num_states - 1;
  const double width = (1.0 - stay) / others;
  int pick = static_cast<int>((u - stay) / width);
  pick = std::clamp(pick, 0, others - 1);
  return pick >= proc.current ? pick + 1 : pick;
}

MeasurementBatch emit_measurements(std::span<const TargetModel> models, const TruthState& truth,
                                   double dt, const Vector& noise,
                                   std::span<const double> clutter_positions) {
  if (!(dt > 0.0)) throw ConfigError("emit_measurements: dt must be positive");
  if (models.size() != truth.targets.size()) {
    throw ConfigError("emit_measurements: one model per target is required");
  }
  MeasurementBatch batch;
  batch.time = truth.time;
  const double root_dt = std::sqrt(dt);

  if (models.size() == 1) {
    const Eigen::Index channels = noise.size();
    if (channels < 1) throw ConfigError("emit_measurements: at least one channel is required");
    if (truth.association < 0 || truth.association > channels) {
      throw ConfigError("emit_measurements: association label out of range");
    }
    if (!clutter_positions.empty() && static_cast<Eigen::Index>(clutter_positions.size()) != channels) {
      throw ConfigError("emit_measurements: clutter positions must cover every channel");
    }
    const TargetModel& model = models[0];
    batch.channels = model.obs_noise * root_dt * noise;
    for (Eigen::Index m = 0; m < channels; ++m) {
      if (truth.association == m + 1) {
        batch.channels[m] += model.obs_map(truth.targets[0]) * dt;
      } else if (!clutter_positions.empty()) {
        batch.channels[m] += clutter_positions[m] * dt;
      }
    }
    return batch;
  }

  if (models.size() == 2) {
    if (noise.size() != 2) throw ConfigError("emit_measurements: two-target layout uses 2 channels");
    if (truth.association != 1 && truth.association != 2) {
      throw ConfigError("emit_measurements: two-target association must be 1 or 2");
    }
    const double h1 = models[0].obs_map(truth.targets[0]);
    const double h2 = models[1].obs_map(truth.targets[1]);
    const bool swapped = truth.association == 2;
    batch.channels.resize(2);
    batch.channels[0] = (swapped ? h2 : h1) * dt + models[0].obs_noise * root_dt * noise[0];
    batch.channels[1] = (swapped ? h1 : h2) * dt + models[1].obs_noise * root_dt * noise[1];
    return batch;
  }

  throw ConfigError("emit_measurements: only one or two targets are supported");
}

}  // namespace pdafpf
