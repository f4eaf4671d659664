#include "pdafpf/fpf.hpp"

#include <algorithm>
#include <mutex>
#include <cmath>
#include <sstream>
#include <thread>
#include <vector>

#include "pdafpf/errors.hpp"

namespace pdafpf {

namespace {

template <typename Fn>
void parallel_for(Eigen::Index count, unsigned threads, Fn&& fn) {
  const unsigned workers =
      static_cast<unsigned>(std::clamp<Eigen::Index>(threads, 1, std::max<Eigen::Index>(count, 1)));
  if (workers <= 1) {
    fn(Eigen::Index{0}, count);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  const Eigen::Index chunk = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const Eigen::Index begin = w * chunk;
    const Eigen::Index end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&fn, begin, end] { fn(begin, end); });
  }
}

}  // namespace

void ParticleEnsemble::validate() const {
  if (size() < 2) throw ConfigError("ParticleEnsemble: at least two particles are required");
  if (dim() < 1) throw ConfigError("ParticleEnsemble: state dimension must be positive");
  if (!states.allFinite()) throw NumericalError("ParticleEnsemble: non-finite particle state");
}

ParticleEnsemble ParticleEnsemble::sample(const Vector& mean, const Matrix& cov, Eigen::Index count,
                                          RandomStream& stream) {
  return ParticleEnsemble{sample_gaussian(mean, cov, count, stream)};
}

double MomentEstimates::h_variance() const { return std::max(0.0, h2_mean - h_mean * h_mean); }

MomentEstimates estimate_moments(const ParticleEnsemble& ens, const ObservationMap& obs_map) {
  const Eigen::Index n = ens.size();
  if (n < 2) throw ConfigError("estimate_moments: at least two particles are required");
  MomentEstimates out;
  out.mean = ens.states.rowwise().mean();
  const Matrix centered = ens.states.colwise() - out.mean;
  out.cov = centered * centered.transpose() / static_cast<double>(n - 1);
  double sum = 0.0;
  double sum_sq = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double h = obs_map(ens.states.col(i));
    sum += h;
    sum_sq += h * h;
  }
  out.h_mean = sum / static_cast<double>(n);
  out.h2_mean = sum_sq / static_cast<double>(n);
  return out;
}

double innovation_from_h(double h_x, double beta_m, double h_mean, double dz_m, double dt) {
  return dz_m - (0.5 * beta_m * h_x + (1.0 - 0.5 * beta_m) * h_mean) * dt;
}

double innovation(const Vector& x, double beta_m, double h_mean, double dz_m, double dt,
                  const ObservationMap& obs_map) {
  if (!(beta_m >= 0.0 && beta_m <= 1.0)) throw ConfigError("innovation: beta must lie in [0, 1]");
  return innovation_from_h(obs_map(x), beta_m, h_mean, dz_m, dt);
}

Vector wong_zakai_correction(const GainField& gain, const Vector& x,
                             const AssociationBelief& beliefs, double obs_noise, double dt) {
  if (gain.kind() == GainField::Kind::kConstant) return Vector::Zero(gain.dim());
  double weight = 0.0;
  for (Eigen::Index m = 1; m < beliefs.beta.size(); ++m) weight += beliefs.beta[m] * beliefs.beta[m];
  return 0.5 * obs_noise * obs_noise * weight * gain.value(x).cwiseProduct(gain.derivative(x)) * dt;
}

ParticleEnsemble fpf_step(const ParticleEnsemble& ens, const TargetModel& model,
                          const AssociationBelief& beliefs, const GainField& gain,
                          const MeasurementBatch& batch, double dt, const Matrix& noise,
                          const FpfStepOptions& options) {
  if (!(dt > 0.0)) throw ConfigError("fpf_step: dt must be positive");
  const Eigen::Index n = ens.size();
  const Eigen::Index d = ens.dim();
  const Eigen::Index channels = batch.channels.size();
  if (d != model.dim()) throw ConfigError("fpf_step: ensemble and model dimensions differ");
  if (beliefs.channels() != channels) {
    throw ConfigError("fpf_step: beliefs cover " + std::to_string(beliefs.channels()) +
                      " channels but the batch has " + std::to_string(channels));
  }
  if (noise.rows() != d || noise.cols() != n) throw ConfigError("fpf_step: noise must be d x N");
  if (gain.dim() != d) throw ConfigError("fpf_step: gain dimension differs from the state");

  // Frozen for the step: h(X^i) and the population prediction h_mean.
  Vector h(n);
  double h_sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    h[i] = model.obs_map(ens.states.col(i));
    h_sum += h[i];
  }
  const double h_mean = h_sum / static_cast<double>(n);
  const double root_dt = std::sqrt(dt);
  const double obs_noise = model.obs_noise;
  const bool constant_gain = gain.kind() == GainField::Kind::kConstant;

  double wz_weight = 0.0;
  for (Eigen::Index m = 1; m <= channels; ++m) wz_weight += beliefs.beta[m] * beliefs.beta[m];

  ParticleEnsemble next{Matrix(d, n)};
  std::vector<Eigen::Index> failures;
  std::mutex failure_lock;

  parallel_for(n, options.threads, [&](Eigen::Index begin, Eigen::Index end) {
    Vector x(d);
    Vector out(d);
    for (Eigen::Index i = begin; i < end; ++i) {
      x = ens.states.col(i);
      out.noalias() = x + model.drift(x) * dt + model.diffusion.cwiseProduct(noise.col(i)) * root_dt;

      double weighted_innovation = 0.0;
      bool active = false;
      for (Eigen::Index m = 1; m <= channels; ++m) {
        const double beta = beliefs.beta[m];
        if (beta == 0.0) continue;
        active = true;
        weighted_innovation += beta * innovation_from_h(h[i], beta, h_mean, batch.channels[m - 1], dt);
      }
      if (active) {
        if (constant_gain) {
          out += gain.constant_value() * weighted_innovation;
        } else {
          const double k = gain.value_1d(x[0]);
          out[0] += k * weighted_innovation;
          out[0] += 0.5 * obs_noise * obs_noise * wz_weight * (k * gain.derivative_1d(x[0])) * dt;
        }
      }
      if (!out.allFinite()) {
        std::lock_guard lock(failure_lock);
        failures.push_back(i);
      }
      next.states.col(i) = out;
    }
  });

  if (!failures.empty()) {
    const Eigen::Index i = *std::min_element(failures.begin(), failures.end());
    const Vector x = ens.states.col(i);
    std::ostringstream msg;
    msg << "fpf_step: particle " << i << " became non-finite; |x|=" << x.norm()
        << " |drift dt|=" << (model.drift(x) * dt).norm() << " |K|=" << gain.value(x).norm()
        << " |K'|=" << gain.derivative(x).norm() << " h=" << h[i] << " h_mean=" << h_mean;
    throw NumericalError(msg.str());
  }
  return next;
}

}  // namespace pdafpf

namespace pdafpf {

GainField compute_gain(GainMode mode, const ParticleEnsemble& ens, const TargetModel& model,
                       const MomentEstimates& moments, const IntegralGainOptions& options) {
  switch (mode) {
    case GainMode::kLinear: {
      if (!model.linear) throw ConfigError("linear gain requires a linear observation model");
      if (ens.dim() == 1) {
        return gain_linear(model.linear->observation[0], moments.cov(0, 0), model.obs_noise);
      }
      return gain_linear(model.linear->observation, moments.cov, model.obs_noise);
    }
    case GainMode::kIntegral1d: {
      if (ens.dim() != 1) throw ConfigError("integral-1d gain requires a scalar state");
      const std::span<const double> particles(ens.states.data(), static_cast<std::size_t>(ens.size()));
      const auto& h = model.obs_map;
      return gain_integral_1d(
          particles, [&h](double x) { return h(Vector::Constant(1, x)); }, model.obs_noise, options);
    }
    case GainMode::kConstantApprox:
      return gain_constant_approx(ens.states, model.obs_map, model.obs_noise);
  }
  throw ConfigError("compute_gain: unknown gain mode");
}

}  // namespace pdafpf
