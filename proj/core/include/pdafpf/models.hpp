#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pdafpf/types.hpp"

namespace pdafpf {

using DriftMap = std::function<Vector(const Vector&)>;
using ObservationMap = std::function<double(const Vector&)>;

/// Matrix form of a linear target model: drift a(x) = F x, h(x) = H x.
struct LinearDynamics {
  Matrix drift;
  RowVector observation;
};

/// One target's state and observation SDEs:
///   dX = a(X) dt + diag(sigma_B) dB,   dZ = h(X) dt + sigma_W dW.
struct TargetModel {
  DriftMap drift;
  Vector diffusion;
  ObservationMap obs_map;
  double obs_noise = 1.0;
  /// Present when `drift` and `obs_map` are linear; required by the linear
  /// gain and the Kalman-Bucy oracle.
  std::optional<LinearDynamics> linear;

  Eigen::Index dim() const { return diffusion.size(); }
  void validate() const;

  static TargetModel make_linear(Matrix drift_matrix, Vector diffusion, RowVector observation,
                                 double obs_noise);
  /// Scalar linear model dX = alpha X dt + sigma_B dB, dZ = gamma X dt + sigma_W dW.
  static TargetModel scalar_linear(double alpha, double sigma_b, double gamma, double sigma_w);
  /// Position/velocity model with F = [0 1; 0 0] and H = [1 0].
  static TargetModel white_noise_acceleration(Vector diffusion, double obs_noise);
};

/// Continuous-time jump Markov chain on {0, ..., num_states - 1} with equal
/// intensity `rate / (num_states - 1)` to each other state. With
/// num_states = M + 1 this is the single-target association chain (c/M to
/// each other state); with num_states = 2 the two-target chain (c).
struct AssociationProcess {
  int num_states = 2;
  double rate = 0.0;
  int current = 0;

  double jump_intensity() const { return num_states > 1 ? rate / (num_states - 1) : 0.0; }
  /// Intensity matrix: -rate on the diagonal, jump_intensity() elsewhere.
  Matrix intensity() const;
  void validate() const;
};

struct TruthState {
  double time = 0.0;
  std::vector<Vector> targets;
  /// Association label: 0..M for a single target (0 = not detected);
  /// 1 or 2 for the two-target permutation model.
  int association = 0;
};

struct MeasurementBatch {
  double time = 0.0;
  /// Increments dZ^1..dZ^M over [time, time + dt].
  Vector channels;
};

/// Euler-Maruyama step of the state SDE. `noise` holds standard normal draws.
Vector step_truth(const TargetModel& model, const Vector& state, double dt, const Vector& noise);

/// Advances the association chain over `dt` using one uniform draw `u` in
/// [0, 1). When rate * dt >= 0.5 the step is split into equal sub-steps and
/// their composition is sampled in closed form.
int step_association(const AssociationProcess& proc, double dt, double u);

/// Probability that the chain is still in its current state after `dt`
/// under the sub-stepped Euler scheme used by step_association.
double association_stay_probability(const AssociationProcess& proc, double dt);

/// Generates one batch of measurement increments.
///
/// One model: single-target layout. Channel m (1-based) carries h(X) dt iff
/// truth.association == m; `noise.size()` sets the channel count M and all
/// channels use the model's sigma_W. If `clutter_positions` is non-empty
/// (size M), every channel not associated with the target additionally
/// carries clutter_positions[m-1] * dt (uniform clutter point model).
///
/// Two models: permutation layout. dZ = Psi(A) [h(X^1); h(X^2)] dt + noise,
/// with channel m using models[m-1].obs_noise.
MeasurementBatch emit_measurements(std::span<const TargetModel> models, const TruthState& truth,
                                   double dt, const Vector& noise,
                                   std::span<const double> clutter_positions = {});

}  // namespace pdafpf
