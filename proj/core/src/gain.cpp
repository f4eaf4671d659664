#include "pdafpf/gain.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "pdafpf/errors.hpp"

namespace pdafpf {

namespace {

void require_positive_noise(double obs_noise, const char* where) {
  if (!(obs_noise > 0.0) || !std::isfinite(obs_noise)) {
    throw ConfigError(std::string(where) + ": obs_noise must be positive");
  }
}

void require_psd(const Matrix& cov, const char* where) {
  if (cov.rows() != cov.cols()) throw ConfigError(std::string(where) + ": covariance must be square");
  if (!cov.allFinite()) throw NumericalError(std::string(where) + ": covariance is not finite");
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale) {
    throw NumericalError(std::string(where) + ": covariance is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
    throw NumericalError(std::string(where) + ": covariance is not positive semidefinite");
  }
}

double upper_tail(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

}  // namespace

GainField GainField::constant(Vector gain) {
  if (!gain.allFinite()) throw NumericalError("GainField: constant gain is not finite");
  GainField field;
  field.kind_ = Kind::kConstant;
  field.constant_ = std::move(gain);
  return field;
}

GainField GainField::tabulated(std::vector<double> nodes, std::vector<double> values,
                               std::vector<double> derivatives) {
  if (nodes.size() < 2 || values.size() != nodes.size() || derivatives.size() != nodes.size()) {
    throw ConfigError("GainField: tabulated field needs >= 2 nodes with matching tables");
  }
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    if (!(nodes[i] > nodes[i - 1])) throw ConfigError("GainField: nodes must be strictly increasing");
  }
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(values.begin(), values.end(), finite) ||
      !std::all_of(derivatives.begin(), derivatives.end(), finite)) {
    throw NumericalError("GainField: tabulated values are not finite");
  }
  GainField field;
  field.kind_ = Kind::kTabulated;
  field.nodes_ = std::move(nodes);
  field.values_ = std::move(values);
  field.derivatives_ = std::move(derivatives);
  return field;
}

double GainField::interpolate(const std::vector<double>& table, double x) const {
  if (x <= nodes_.front()) return table.front();
  if (x >= nodes_.back()) return table.back();
  const auto upper = std::upper_bound(nodes_.begin(), nodes_.end(), x);
  const std::size_t i = static_cast<std::size_t>(upper - nodes_.begin());
  const double t = (x - nodes_[i - 1]) / (nodes_[i] - nodes_[i - 1]);
  return table[i - 1] + t * (table[i] - table[i - 1]);
}

double GainField::value_1d(double x) const {
  if (kind_ == Kind::kConstant) return constant_[0];
  return interpolate(values_, x);
}

double GainField::derivative_1d(double x) const {
  if (kind_ == Kind::kConstant) return 0.0;
  // The clamped extension is flat outside the nodes.
  if (x < nodes_.front() || x > nodes_.back()) return 0.0;
  return interpolate(derivatives_, x);
}

Vector GainField::value(const Vector& x) const {
  if (kind_ == Kind::kConstant) return constant_;
  return Vector::Constant(1, value_1d(x[0]));
}

Vector GainField::derivative(const Vector& x) const {
  if (kind_ == Kind::kConstant) return Vector::Zero(constant_.size());
  return Vector::Constant(1, derivative_1d(x[0]));
}

GainField gain_linear(double obs_gain, double cov, double obs_noise) {
  require_positive_noise(obs_noise, "gain_linear");
  if (!(cov >= 0.0)) throw NumericalError("gain_linear: variance must be non-negative");
  return GainField::constant(Vector::Constant(1, obs_gain * cov / (obs_noise * obs_noise)));
}

GainField gain_linear(const RowVector& obs_row, const Matrix& cov, double obs_noise) {
  require_positive_noise(obs_noise, "gain_linear");
  require_psd(cov, "gain_linear");
  if (obs_row.size() != cov.rows()) throw ConfigError("gain_linear: H and covariance dimensions differ");
  return GainField::constant(cov * obs_row.transpose() / (obs_noise * obs_noise));
}

double silverman_bandwidth(std::span<const double> samples) {
  const std::size_t n = samples.size();
  if (n < 2) return 0.0;
  const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  const double sd = std::sqrt(ss / (n - 1));

  std::vector<double> work(samples.begin(), samples.end());
  auto quantile = [&](double q) {
    const double pos = q * (n - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const auto at = work.begin() + static_cast<std::ptrdiff_t>(lo);
    std::nth_element(work.begin(), at, work.end());
    const double below = *at;
    const double above = lo + 1 < n ? *std::min_element(at + 1, work.end()) : below;
    return below + (pos - lo) * (above - below);
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
}

GainField gain_integral_1d(std::span<const double> particles,
                           const std::function<double(double)>& obs_map, double obs_noise,
                           const IntegralGainOptions& options) {
  require_positive_noise(obs_noise, "gain_integral_1d");
  const std::size_t n = particles.size();
  if (n < 2) throw ConfigError("gain_integral_1d: at least two particles are required");
  if (options.nodes < 3 || options.bin_refinement < 1) {
    throw ConfigError("gain_integral_1d: need >= 3 nodes and bin_refinement >= 1");
  }

  const auto [min_it, max_it] = std::minmax_element(particles.begin(), particles.end());
  const double lo = *min_it;
  const double hi = *max_it;
  if (!std::isfinite(lo) || !std::isfinite(hi)) throw NumericalError("gain_integral_1d: non-finite particle");

  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = obs_map(particles[i]);
  const double h_mean = std::accumulate(h.begin(), h.end(), 0.0) / n;

  const double scale = std::max({1.0, std::abs(lo), std::abs(hi)});
  if (hi - lo <= 1e-12 * scale) {
    GainField field = GainField::zero(1);
    field.mark_degenerate();
    return field;
  }

  const int nodes = options.nodes;
  const int refine = options.bin_refinement;
  const double node_step = (hi - lo) / (nodes - 1);
  const double bin_step = node_step / refine;
  const int bins = (nodes - 1) * refine + 1;

  double bandwidth = options.bandwidth > 0.0 ? options.bandwidth : silverman_bandwidth(particles);
  if (!(bandwidth > 0.0)) bandwidth = node_step;

  // Linear binning of the particle measure (mass) and of the centered
  // observation weights h(X^i) - h_mean.
  std::vector<double> mass(bins, 0.0);
  std::vector<double> flux(bins, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = (particles[i] - lo) / bin_step;
    int j = std::min(static_cast<int>(t), bins - 2);
    const double frac = t - j;
    const double w = h[i] - h_mean;
    mass[j] += 1.0 - frac;
    mass[j + 1] += frac;
    flux[j] += (1.0 - frac) * w;
    flux[j + 1] += frac * w;
  }

  // Kernel tables indexed by the offset (node position - bin position) / bin_step.
  const int span = bins - 1;
  std::vector<double> density_kernel(2 * span + 1);
  std::vector<double> tail_kernel(2 * span + 1);
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * bandwidth);
  for (int o = -span; o <= span; ++o) {
    const double z = o * bin_step / bandwidth;
    density_kernel[o + span] = norm * std::exp(-0.5 * z * z);
    tail_kernel[o + span] = upper_tail(z);
  }

  std::vector<double> node_x(nodes), density(nodes), gain(nodes);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_var = 1.0 / (obs_noise * obs_noise);
  for (int k = 0; k < nodes; ++k) {
    node_x[k] = lo + k * node_step;
    double p = 0.0;
    double f = 0.0;
    const int center = k * refine;
    for (int j = 0; j < bins; ++j) {
      const int o = center - j + span;
      p += mass[j] * density_kernel[o];
      f += flux[j] * tail_kernel[o];
    }
    density[k] = p * inv_n;
    gain[k] = density[k] > 0.0 ? inv_var * f * inv_n / density[k] : 0.0;
  }
  node_x.back() = hi;

  // Tail guard: nodes with negligible density copy the nearest valid node.
  const double peak = *std::max_element(density.begin(), density.end());
  const double floor = options.density_floor * peak;
  std::vector<int> nearest(nodes, -1);
  int last_valid = -1;
  for (int k = 0; k < nodes; ++k) {
    if (density[k] >= floor) last_valid = k;
    nearest[k] = last_valid;
  }
  int next_valid = -1;
  int guarded = 0;
  for (int k = nodes - 1; k >= 0; --k) {
    if (density[k] >= floor) {
      next_valid = k;
      continue;
    }
    int pick = nearest[k];
    if (pick < 0 || (next_valid >= 0 && next_valid - k < k - pick)) pick = next_valid;
    gain[k] = gain[pick];
    ++guarded;
  }

  std::vector<double> slope(nodes);
  slope.front() = (gain[1] - gain[0]) / (node_x[1] - node_x[0]);
  slope.back() = (gain[nodes - 1] - gain[nodes - 2]) / (node_x[nodes - 1] - node_x[nodes - 2]);
  for (int k = 1; k < nodes - 1; ++k) {
    slope[k] = (gain[k + 1] - gain[k - 1]) / (node_x[k + 1] - node_x[k - 1]);
  }

  GainField field = GainField::tabulated(std::move(node_x), std::move(gain), std::move(slope));
  field.set_guarded_nodes(guarded);
  return field;
}

GainField gain_constant_approx(const Matrix& particles,
                               const std::function<double(const Vector&)>& obs_map,
                               double obs_noise) {
  require_positive_noise(obs_noise, "gain_constant_approx");
  const Eigen::Index n = particles.cols();
  if (n < 2) throw ConfigError("gain_constant_approx: at least two particles are required");
  Vector h(n);
  for (Eigen::Index i = 0; i < n; ++i) h[i] = obs_map(particles.col(i));
  const Vector mean = particles.rowwise().mean();
  const double h_mean = h.mean();
  Vector cross = Vector::Zero(particles.rows());
  for (Eigen::Index i = 0; i < n; ++i) cross += (particles.col(i) - mean) * (h[i] - h_mean);
  return GainField::constant(cross / ((n - 1) * obs_noise * obs_noise));
}

}  // namespace pdafpf
