#pragma once

#include <functional>
#include <span>
#include <vector>

#include "pdafpf/types.hpp"

namespace pdafpf {

/// The feedback gain K(x) used to steer particles, plus its derivative K'(x)
/// for the Wong-Zakai correction.
///
/// Two representations exist: a constant d-vector (K' = 0), and a scalar
/// function tabulated on strictly increasing nodes, evaluated by linear
/// interpolation and clamped to the boundary values outside the node range.
class GainField {
 public:
  enum class Kind { kConstant, kTabulated };

  GainField() = default;

  static GainField constant(Vector gain);
  static GainField zero(Eigen::Index dim) { return constant(Vector::Zero(dim)); }
  static GainField tabulated(std::vector<double> nodes, std::vector<double> values,
                             std::vector<double> derivatives);

  Kind kind() const { return kind_; }
  Eigen::Index dim() const { return kind_ == Kind::kConstant ? constant_.size() : 1; }

  /// K(x) as a d-vector.
  Vector value(const Vector& x) const;
  /// K'(x) as a d-vector (the derivative of each component along its own
  /// coordinate); zero for constant fields.
  Vector derivative(const Vector& x) const;

  double value_1d(double x) const;
  double derivative_1d(double x) const;

  const Vector& constant_value() const { return constant_; }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& derivatives() const { return derivatives_; }

  /// Set when the field was produced from a degenerate ensemble.
  bool degenerate() const { return degenerate_; }
  void mark_degenerate() { degenerate_ = true; }
  /// Number of tabulated nodes whose value was replaced by the density guard.
  int guarded_nodes() const { return guarded_nodes_; }
  void set_guarded_nodes(int n) { guarded_nodes_ = n; }

 private:
  double interpolate(const std::vector<double>& table, double x) const;

  Kind kind_ = Kind::kConstant;
  Vector constant_;
  std::vector<double> nodes_;
  std::vector<double> values_;
  std::vector<double> derivatives_;
  bool degenerate_ = false;
  int guarded_nodes_ = 0;
};

/// Exact gain for a linear observation and Gaussian density: gamma Sigma / sigma_W^2.
GainField gain_linear(double obs_gain, double cov, double obs_noise);
/// Multivariate form Sigma H^T / sigma_W^2.
GainField gain_linear(const RowVector& obs_row, const Matrix& cov, double obs_noise);

struct IntegralGainOptions {
  /// Kernel bandwidth; non-positive selects Silverman's rule.
  double bandwidth = 0.0;
  /// Tabulation nodes spanning [min particle, max particle].
  int nodes = 201;
  /// Particles are linearly binned onto a grid `bin_refinement` times finer
  /// than the node grid; kernel sums then become table convolutions.
  int bin_refinement = 4;
  /// Nodes with smoothed density below this fraction of the peak take the
  /// gain of the nearest node above it.
  double density_floor = 1e-6;
};

/// Silverman's rule of thumb, 0.9 min(sd, IQR/1.34) N^(-1/5).
double silverman_bandwidth(std::span<const double> samples);

/// Scalar gain from the first integral of the Euler-Lagrange boundary-value
/// problem:
///   K(x) p(x) = (1 / sigma_W^2) \int_x^\infty (h(y) - h_mean) p(y) dy,
/// with p the Gaussian-kernel smoothing of the particle measure and each
/// kernel carrying its particle's value h(X^i). Centering at the ensemble
/// mean h_mean makes the total flux vanish exactly. K' is tabulated by
/// finite differences.
GainField gain_integral_1d(std::span<const double> particles,
                           const std::function<double(double)>& obs_map, double obs_noise,
                           const IntegralGainOptions& options = {});

/// Constant-gain approximation (1 / sigma_W^2) Cov(X, h(X)) over the
/// particles (columns of `particles`), with the unbiased (N - 1) normalizer.
GainField gain_constant_approx(const Matrix& particles,
                               const std::function<double(const Vector&)>& obs_map,
                               double obs_noise);

}  // namespace pdafpf
