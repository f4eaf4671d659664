#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pdafpf/association.hpp"
#include "pdafpf/fpf.hpp"
#include "pdafpf/models.hpp"

namespace pdafpf {

// ---------------------------------------------------------------------------
// Kalman-Bucy filter (linear models)
// ---------------------------------------------------------------------------

struct KalmanState {
  Vector mean;
  Matrix cov;
};

/// Euler step of the Kalman-Bucy filter with gain Sigma H^T / sigma_W^2:
///   dmu = F mu dt + K (dZ - H mu dt),
///   dSigma = (F Sigma + Sigma F^T + diag(sigma_B^2) - Sigma H^T H Sigma / sigma_W^2) dt.
/// The covariance is symmetrized and tiny negative eigenvalues are floored
/// at zero; a clearly indefinite result throws NumericalError.
KalmanState kalman_bucy_step(const KalmanState& state, const TargetModel& model, double dz, double dt);

/// Time update only (no measurement).
KalmanState kalman_bucy_predict(const KalmanState& state, const TargetModel& model, double dt);

/// Positive root of 2 alpha P + sigma_B^2 - gamma^2 P^2 / sigma_W^2 = 0.
double scalar_riccati_steady_state(double alpha, double sigma_b, double gamma, double sigma_w);

// ---------------------------------------------------------------------------
// Grid solver for the association-weighted Kushner-Stratonovich equation
// ---------------------------------------------------------------------------

/// Probability mass on a uniform 1-D grid of `mass.size()` cells; cell i
/// covers [lower + i spacing, lower + (i + 1) spacing).
struct GridDensity {
  double lower = 0.0;
  double spacing = 1.0;
  Vector mass;

  Eigen::Index cells() const { return mass.size(); }
  double center(Eigen::Index i) const { return lower + (static_cast<double>(i) + 0.5) * spacing; }
  double upper() const { return lower + spacing * static_cast<double>(cells()); }
  double mean() const;
  double variance() const;
  /// Mass in the `width` outermost cells on each side.
  double boundary_mass(int width = 2) const;
  /// Normalized histogram of `samples` on the same cells; samples outside
  /// the grid are counted in the nearest edge cell.
  Vector histogram(std::span<const double> samples) const;
  void validate() const;

  /// Exact cell masses of N(mean, var) on [lower, upper), renormalized.
  static GridDensity gaussian(double mean, double var, double lower, double upper, int cells);
  /// Grid spanning mean +- extent_sd * sd.
  static GridDensity around_gaussian(double mean, double var, int cells = 400, double extent_sd = 8.0);
};

struct GridStepResult {
  GridDensity density;
  /// |total mass - 1| before the final renormalization.
  double normalization_drift = 0.0;
  /// Explicit Fokker-Planck sub-steps used to stay within the stability limit.
  int fp_substeps = 1;
};

/// One step of
///   dp = L^dagger p dt + 1/sigma_W^2 sum_m beta^m (h - h_mean)(dZ^m - h_mean dt) p,
/// with h_mean taken from the grid. The measurement factor is applied in its
/// Ito-consistent exponential form, then the forward operator is applied with
/// zero-flux boundaries and exponentially fitted (Scharfetter-Gummel) face
/// fluxes, and the result is renormalized.
GridStepResult ks_grid_step(const GridDensity& density, const TargetModel& model,
                            const AssociationBelief& beliefs, const MeasurementBatch& batch, double dt);

/// Forward operator only (beliefs all zero).
GridDensity fokker_planck_step(const GridDensity& density, const TargetModel& model, double dt,
                               int* substeps = nullptr);

/// L1 distance sum_i |a_i - b_i|.
double l1_distance(const Vector& a, const Vector& b);

// ---------------------------------------------------------------------------
// Particle / grid consistency check
// ---------------------------------------------------------------------------

struct ConsistencyConfig {
  /// Scalar model; both the particles and the grid use it.
  TargetModel model;
  Eigen::Index channels = 1;
  enum class Association {
    /// beta = 0: no measurement enters either evolution.
    kNone,
    /// Truth always associated with channel 1, beta = e_1.
    kKnown,
    /// Truth follows the association chain; beta from beta_sde_step driven
    /// by the particle moments, shared by both evolutions.
    kSde,
  };
  Association association = Association::kKnown;
  /// Replaces every measurement increment by zero.
  bool zero_observations = false;
  double rate = 1.0;
  double prior_mean = 0.0;
  double prior_var = 1.0;
  double horizon = 1.0;
  double dt = 1e-4;
  Eigen::Index particles = 10000;
  int cells = 400;
  double extent_sd = 8.0;
  GainMode gain = GainMode::kLinear;
  IntegralGainOptions gain_options;
  /// L1 is recorded every `sample_every` steps and at the horizon.
  int sample_every = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct ConsistencyReport {
  std::vector<double> times;
  std::vector<double> l1;
  std::vector<double> particle_mean;
  std::vector<double> grid_mean;
  double final_l1() const { return l1.empty() ? 0.0 : l1.back(); }
};

/// Runs the particle filter and the grid solver on one shared measurement
/// stream and reports the L1 distance between the binned particles and the
/// grid posterior over time.
ConsistencyReport consistency_check(const ConsistencyConfig& config);

}  // namespace pdafpf
