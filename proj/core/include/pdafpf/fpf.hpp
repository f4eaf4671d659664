#pragma once

#include <cstddef>

#include "pdafpf/belief.hpp"
#include "pdafpf/gain.hpp"
#include "pdafpf/models.hpp"
#include "pdafpf/random.hpp"

namespace pdafpf {

/// N unweighted particles stored as the columns of a d x N matrix.
struct ParticleEnsemble {
  Matrix states;

  Eigen::Index size() const { return states.cols(); }
  Eigen::Index dim() const { return states.rows(); }
  void validate() const;

  /// i.i.d. draws from N(mean, cov).
  static ParticleEnsemble sample(const Vector& mean, const Matrix& cov, Eigen::Index count,
                                 RandomStream& stream);
};

struct MomentEstimates {
  Vector mean;
  Matrix cov;
  /// Ensemble mean of h(X^i).
  double h_mean = 0.0;
  /// Ensemble mean of h(X^i)^2.
  double h2_mean = 0.0;

  /// h2_mean - h_mean^2, floored at zero.
  double h_variance() const;
};

/// Sample mean, unbiased (N - 1) covariance and the first two moments of h.
MomentEstimates estimate_moments(const ParticleEnsemble& ens, const ObservationMap& obs_map);

/// Modified innovation increment of one particle on one channel:
///   dI = dZ^m - [beta^m / 2 h(x) + (1 - beta^m / 2) h_mean] dt.
double innovation(const Vector& x, double beta_m, double h_mean, double dz_m, double dt,
                  const ObservationMap& obs_map);
/// Same, with h(x) already evaluated.
double innovation_from_h(double h_x, double beta_m, double h_mean, double dz_m, double dt);

struct FpfStepOptions {
  /// Worker threads for the per-particle update; results do not depend on it.
  unsigned threads = 1;
};

/// One explicit Euler step of the controlled particle system
///   dX^i = a(X^i) dt + sigma_B dB^i + sum_m beta^m K(X^i) dI^{i,m}
///          + 1/2 sigma_W^2 sum_m (beta^m)^2 K(X^i) K'(X^i) dt.
/// The ensemble mean of h and the gain are frozen for the whole step.
/// `noise` is a d x N matrix of standard normal draws.
ParticleEnsemble fpf_step(const ParticleEnsemble& ens, const TargetModel& model,
                          const AssociationBelief& beliefs, const GainField& gain,
                          const MeasurementBatch& batch, double dt, const Matrix& noise,
                          const FpfStepOptions& options = {});

}  // namespace pdafpf

namespace pdafpf {

/// The Wong-Zakai drift 1/2 sigma_W^2 sum_m (beta^m)^2 K(x) K'(x) dt for one
/// particle. Identically zero for constant gain fields.
Vector wong_zakai_correction(const GainField& gain, const Vector& x,
                             const AssociationBelief& beliefs, double obs_noise, double dt);

}  // namespace pdafpf

namespace pdafpf {

enum class GainMode {
  /// Sigma H^T / sigma_W^2 with the sample covariance (linear models only).
  kLinear,
  /// First-integral solver; scalar states only.
  kIntegral1d,
  /// Cov(X, h(X)) / sigma_W^2.
  kConstantApprox,
};

/// Builds the gain field for the current ensemble under the chosen mode.
GainField compute_gain(GainMode mode, const ParticleEnsemble& ens, const TargetModel& model,
                       const MomentEstimates& moments, const IntegralGainOptions& options = {});

}  // namespace pdafpf
