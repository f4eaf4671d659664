#include "pdafpf/association.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "pdafpf/errors.hpp"

namespace pdafpf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

bool inside_unit_interval(const Vector& p) {
  return (p.array() >= 0.0).all() && (p.array() <= 1.0).all();
}

// Diffusion column of channel k: the increment is affine in dZ.
template <typename Increment>
Vector diffusion_column(const Increment& increment, const Vector& state, Eigen::Index k, Eigen::Index channels,
                        double dt) {
  Vector unit = Vector::Zero(channels);
  unit[k] = 1.0;
  return increment(state, unit, dt) - increment(state, Vector::Zero(channels), dt);
}

// -1/2 noise_var sum_k (D b_k) b_k, the drift that turns the Ito equation into
// its Stratonovich form. Directional derivatives by central differences.
template <typename Increment>
Vector ito_correction(const Increment& increment, const Vector& state, Eigen::Index channels, double dt,
                      double noise_var) {
  Vector total = Vector::Zero(state.size());
  for (Eigen::Index k = 0; k < channels; ++k) {
    const Vector b = diffusion_column(increment, state, k, channels, dt);
    const double scale = b.cwiseAbs().maxCoeff();
    if (scale == 0.0) continue;
    const double eps = 1e-6 / std::max(1.0, scale);
    const Vector plus = diffusion_column(increment, state + eps * b, k, channels, dt);
    const Vector minus = diffusion_column(increment, state - eps * b, k, channels, dt);
    total += (plus - minus) / (2.0 * eps);
  }
  return -0.5 * noise_var * total;
}

// Recursive halving of (dt, dZ). `increment(state, dz, dt)` returns the Euler
// increment of the full state vector. A step that needs splitting is
// integrated along the straight-line interpolation of Z, so every sub-step
// carries the Ito-to-Stratonovich drift correction.
template <typename Increment>
Vector substep(const Vector& state, const Vector& dz, double dt, int depth, const SubstepPolicy& policy,
               double noise_var, int& steps, const Increment& increment, const char* where) {
  Vector inc = increment(state, dz, dt);
  if (depth > 0) inc += ito_correction(increment, state, dz.size(), dt, noise_var) * dt;
  const Vector candidate = state + inc;
  const double size = inc.cwiseAbs().maxCoeff();
  const bool too_large = !(size <= policy.max_increment);
  const bool leaves = !inside_unit_interval(candidate);
  if (!too_large && !leaves) {
    ++steps;
    return candidate;
  }
  if (depth >= policy.max_depth) {
    if (too_large || !candidate.allFinite()) {
      std::ostringstream msg;
      msg << where << ": stiff update, increment " << size << " still exceeds "
          << policy.max_increment << " after " << (1 << policy.max_depth)
          << " sub-steps (dt=" << dt << ", state=" << state.transpose() << ")";
      throw NumericalError(msg.str());
    }
    // Small overshoot of the simplex at full depth is left to the projection.
    ++steps;
    return candidate;
  }
  const Vector half_dz = 0.5 * dz;
  const Vector mid = substep(state, half_dz, 0.5 * dt, depth + 1, policy, noise_var, steps, increment, where);
  return substep(mid, half_dz, 0.5 * dt, depth + 1, policy, noise_var, steps, increment, where);
}

void require_positive(double v, const char* what, const char* where) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw ConfigError(std::string(where) + ": " + what + " must be positive");
  }
}

double log_sum_exp(const Vector& v) {
  const double top = v.maxCoeff();
  if (!std::isfinite(top)) return top;
  return top + std::log((v.array() - top).exp().sum());
}

double log_gaussian(double dz, double dt, double obs_noise) {
  const double var = obs_noise * obs_noise * dt;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * dz * dz / var;
}

}  // namespace

AssociationBelief AssociationBelief::uniform(Eigen::Index channels) {
  return {Vector::Constant(channels + 1, 1.0 / static_cast<double>(channels + 1))};
}

AssociationBelief AssociationBelief::certain(Eigen::Index channels, Eigen::Index m) {
  AssociationBelief b{Vector::Zero(channels + 1)};
  b.beta[m] = 1.0;
  return b;
}

void AssociationBelief::validate(double tolerance) const {
  if (beta.size() < 2) throw ConfigError("AssociationBelief: at least one channel is required");
  if (!inside_unit_interval(beta)) throw ConfigError("AssociationBelief: entries must lie in [0, 1]");
  if (std::abs(beta.sum() - 1.0) > tolerance) throw ConfigError("AssociationBelief: entries must sum to 1");
}

void JointAssociationBelief::validate(double tolerance) const {
  if (!(pi1 >= 0.0 && pi1 <= 1.0 && pi2 >= 0.0 && pi2 <= 1.0)) {
    throw ConfigError("JointAssociationBelief: entries must lie in [0, 1]");
  }
  if (std::abs(pi1 + pi2 - 1.0) > tolerance) {
    throw ConfigError("JointAssociationBelief: entries must sum to 1");
  }
}

double project_to_simplex(Vector& p) {
  const Vector raw = p;
  p = p.cwiseMax(0.0).cwiseMin(1.0);
  const double total = p.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw NumericalError("project_to_simplex: degenerate belief, every entry clipped to zero");
  }
  p /= total;
  return (p - raw).cwiseAbs().sum();
}

BetaSdeTerms beta_sde_terms(const AssociationBelief& belief, const MomentEstimates& moments,
                            const Vector& dz, double rate, double dt, double obs_noise) {
  const Eigen::Index M = belief.channels();
  if (dz.size() != M) throw ConfigError("beta_sde_terms: batch and belief channel counts differ");
  const double inv_var = 1.0 / (obs_noise * obs_noise);
  const double h = moments.h_mean;
  const double spread = moments.h_variance();
  const auto b = belief.beta.tail(M);

  BetaSdeTerms terms{Vector(M), Vector(M), Vector(M)};
  for (Eigen::Index m = 0; m < M; ++m) {
    terms.prior[m] = rate / M * (1.0 - (M + 1) * b[m]) * dt;
    const double own = dz[m] - b[m] * h * dt;
    double cross = 0.0;
    double spread_sum = 0.0;
    for (Eigen::Index j = 0; j < M; ++j) {
      cross += b[j] * (own - (dz[j] - b[j] * h * dt));
      spread_sum += b[j] * (b[j] - b[m]);
    }
    terms.innovation[m] = inv_var * b[m] * h * cross;
    terms.variance[m] = inv_var * b[m] * spread * spread_sum * dt;
  }
  return terms;
}

BetaStepResult beta_sde_step(const AssociationBelief& belief, const MomentEstimates& moments,
                             const MeasurementBatch& batch, double rate, double dt,
                             double obs_noise, const SubstepPolicy& policy) {
  require_positive(dt, "dt", "beta_sde_step");
  require_positive(obs_noise, "obs_noise", "beta_sde_step");
  const Eigen::Index M = belief.channels();
  if (M < 1) throw ConfigError("beta_sde_step: at least one channel is required");
  if (batch.channels.size() != M) throw ConfigError("beta_sde_step: batch and belief channel counts differ");

  auto increment = [&](const Vector& state, const Vector& dz, double h) {
    const BetaSdeTerms terms = beta_sde_terms(AssociationBelief{state}, moments, dz, rate, h, obs_noise);
    Vector inc(M + 1);
    inc.tail(M) = terms.total();
    // beta^0 is the residual 1 - sum_{m>=1} beta^m.
    inc[0] = (1.0 - (state.tail(M) + inc.tail(M)).sum()) - state[0];
    return inc;
  };

  BetaStepResult result;
  result.info.substeps = 0;
  Vector next = substep(belief.beta, batch.channels, dt, 0, policy, obs_noise * obs_noise,
                        result.info.substeps, increment, "beta_sde_step");
  result.info.projection = project_to_simplex(next);
  result.belief.beta = std::move(next);
  return result;
}

AssociationBelief beta_predict(const AssociationBelief& belief, double rate, double dt) {
  const Eigen::Index k = belief.beta.size();
  AssociationProcess chain{static_cast<int>(k), rate, 0};
  const double stay = association_stay_probability(chain, dt);
  const double leak = (1.0 - stay) / static_cast<double>(k - 1);
  AssociationBelief out{stay * belief.beta + leak * (Vector::Ones(k) - belief.beta)};
  return out;
}

double log_particle_likelihood(const Vector& h_values, double dz, double dt, double obs_noise) {
  const Eigen::Index n = h_values.size();
  if (n < 1) throw ConfigError("log_particle_likelihood: at least one particle is required");
  const double var = obs_noise * obs_noise * dt;
  const Vector exponents = (-0.5 / var) * (dz - h_values.array() * dt).square().matrix();
  return -0.5 * std::log(2.0 * std::numbers::pi * var) + log_sum_exp(exponents) -
         std::log(static_cast<double>(n));
}

BayesStepResult bayes_update(const AssociationBelief& prior, const Vector& log_likelihoods,
                             bool include_undetected) {
  const Eigen::Index k = prior.beta.size();
  if (log_likelihoods.size() != k) throw ConfigError("bayes_update: one log-likelihood per hypothesis");
  const Eigen::Index first = include_undetected ? 0 : 1;
  const Eigen::Index count = k - first;

  Vector log_post(count);
  for (Eigen::Index m = first; m < k; ++m) {
    const double lp = prior.beta[m] > 0.0 ? std::log(prior.beta[m]) : kNegInf;
    const double v = lp + log_likelihoods[m];
    log_post[m - first] = std::isnan(v) ? kNegInf : v;
  }

  BayesStepResult result{prior, false};
  const double norm = log_sum_exp(log_post);
  if (!std::isfinite(norm)) {
    result.underflow = true;
    return result;
  }
  const double mass = include_undetected ? 1.0 : 1.0 - prior.beta[0];
  for (Eigen::Index m = first; m < k; ++m) {
    result.belief.beta[m] = mass * std::exp(log_post[m - first] - norm);
  }
  return result;
}

BayesStepResult beta_bayes_step(const AssociationBelief& belief, const ParticleEnsemble& ens,
                                const MeasurementBatch& batch, double dt,
                                const ClutterLikelihood& clutter, double obs_noise,
                                const ObservationMap& obs_map) {
  require_positive(dt, "dt", "beta_bayes_step");
  require_positive(obs_noise, "obs_noise", "beta_bayes_step");
  if (clutter.kind == ClutterLikelihood::Kind::kUniformVolume) {
    require_positive(clutter.volume, "clutter volume", "beta_bayes_step");
  }
  if (ens.size() < 1) throw ConfigError("beta_bayes_step: at least one particle is required");
  const Eigen::Index M = belief.channels();
  if (batch.channels.size() != M) throw ConfigError("beta_bayes_step: batch and belief channel counts differ");

  Vector h(ens.size());
  for (Eigen::Index i = 0; i < ens.size(); ++i) h[i] = obs_map(ens.states.col(i));

  Vector log_clutter(M);
  for (Eigen::Index m = 0; m < M; ++m) {
    log_clutter[m] = clutter.kind == ClutterLikelihood::Kind::kUniformVolume
                         ? -std::log(clutter.volume)
                         : log_gaussian(batch.channels[m], dt, obs_noise);
  }
  const double all_clutter = log_clutter.sum();

  Vector log_lik(M + 1);
  log_lik[0] = all_clutter;
  for (Eigen::Index m = 1; m <= M; ++m) {
    log_lik[m] = all_clutter - log_clutter[m - 1] +
                 log_particle_likelihood(h, batch.channels[m - 1], dt, obs_noise);
  }
  return bayes_update(belief, log_lik, clutter.include_undetected);
}

double pi_sde_increment(const JointAssociationBelief& belief, const MomentEstimates& target1,
                        const MomentEstimates& target2, const Vector& dz, double rate, double dt,
                        double obs_noise) {
  const double inv_var = 1.0 / (obs_noise * obs_noise);
  const double p1 = belief.pi1;
  const double p2 = belief.pi2;
  const double diff = p1 - p2;
  const double dmu1 = dz[0] - diff * target1.h_mean * dt;
  const double dmu2 = dz[1] - diff * target2.h_mean * dt;
  const double spread = target1.h_variance() + target2.h_variance();
  return -rate * diff * dt + inv_var * p1 * p2 * (target1.h_mean - target2.h_mean) * (dmu1 - dmu2) -
         inv_var * p1 * p2 * diff * spread * dt;
}

JointStepResult pi_sde_step(const JointAssociationBelief& belief, const MomentEstimates& target1,
                            const MomentEstimates& target2, const MeasurementBatch& batch,
                            double rate, double dt, double obs_noise, const SubstepPolicy& policy) {
  require_positive(dt, "dt", "pi_sde_step");
  require_positive(obs_noise, "obs_noise", "pi_sde_step");
  if (batch.channels.size() != 2) throw ConfigError("pi_sde_step: the two-target model has 2 channels");

  auto increment = [&](const Vector& state, const Vector& dz, double h) {
    const double d1 = pi_sde_increment({state[0], state[1]}, target1, target2, dz, rate, h, obs_noise);
    Vector inc(2);
    inc << d1, -d1;
    return inc;
  };

  JointStepResult result;
  result.info.substeps = 0;
  Vector state(2);
  state << belief.pi1, belief.pi2;
  Vector next = substep(state, batch.channels, dt, 0, policy, obs_noise * obs_noise, result.info.substeps,
                        increment, "pi_sde_step");
  next[1] = 1.0 - next[0];
  result.info.projection = project_to_simplex(next);
  result.belief = {next[0], next[1]};
  return result;
}

JointAssociationBelief pi_predict(const JointAssociationBelief& belief, double rate, double dt) {
  AssociationBelief as{Vector(2)};
  as.beta << belief.pi1, belief.pi2;
  const AssociationBelief out = beta_predict(as, rate, dt);
  return {out.beta[0], out.beta[1]};
}

JointBayesStepResult pi_bayes_step(const JointAssociationBelief& belief,
                                   const ParticleEnsemble& target1, const ParticleEnsemble& target2,
                                   const MeasurementBatch& batch, double dt, double obs_noise,
                                   const ObservationMap& obs_map) {
  require_positive(dt, "dt", "pi_bayes_step");
  require_positive(obs_noise, "obs_noise", "pi_bayes_step");
  if (batch.channels.size() != 2) throw ConfigError("pi_bayes_step: the two-target model has 2 channels");
  auto h_values = [&](const ParticleEnsemble& ens) {
    Vector h(ens.size());
    for (Eigen::Index i = 0; i < ens.size(); ++i) h[i] = obs_map(ens.states.col(i));
    return h;
  };
  const Vector h1 = h_values(target1);
  const Vector h2 = h_values(target2);
  const double z1 = batch.channels[0];
  const double z2 = batch.channels[1];

  // Hypothesis 0 carries no mass here; entries 1 and 2 are the permutations.
  AssociationBelief prior{Vector(3)};
  prior.beta << 0.0, belief.pi1, belief.pi2;
  Vector log_lik(3);
  log_lik << 0.0,
      log_particle_likelihood(h1, z1, dt, obs_noise) + log_particle_likelihood(h2, z2, dt, obs_noise),
      log_particle_likelihood(h1, z2, dt, obs_noise) + log_particle_likelihood(h2, z1, dt, obs_noise);
  const BayesStepResult post = bayes_update(prior, log_lik, false);
  return {{post.belief.beta[1], post.belief.beta[2]}, post.underflow};
}

AssociationBelief marginals_from_joint(const JointAssociationBelief& belief, int target_index) {
  belief.validate(1e-9);
  AssociationBelief out{Vector(3)};
  if (target_index == 1) {
    out.beta << 0.0, belief.pi1, belief.pi2;
  } else if (target_index == 2) {
    out.beta << 0.0, belief.pi2, belief.pi1;
  } else {
    throw ConfigError("marginals_from_joint: target index must be 1 or 2");
  }
  return out;
}

Matrix pda_signals(double h, Eigen::Index channels) {
  Matrix g = Matrix::Zero(channels + 1, channels);
  for (Eigen::Index m = 0; m < channels; ++m) g(m + 1, m) = h;
  return g;
}

Matrix jpda_signals(double h1, double h2) {
  Matrix g(2, 2);
  g << h1, h2, h2, h1;
  return g;
}

Vector wonham_increment(const Vector& posterior, const Matrix& signals, const Vector& dz,
                        const Matrix& intensity, double dt, double obs_noise) {
  const Eigen::Index k = posterior.size();
  if (signals.rows() != k || signals.cols() != dz.size() || intensity.rows() != k ||
      intensity.cols() != k) {
    throw ConfigError("wonham_increment: inconsistent posterior/signals/intensity shapes");
  }
  const double inv_var = 1.0 / (obs_noise * obs_noise);
  Vector inc = intensity.transpose() * posterior * dt;
  for (Eigen::Index m = 0; m < signals.cols(); ++m) {
    const double mean_signal = posterior.dot(signals.col(m));
    const double innov = dz[m] - mean_signal * dt;
    inc += inv_var * innov *
           posterior.cwiseProduct((signals.col(m).array() - mean_signal).matrix());
  }
  return inc;
}

WonhamStepResult wonham_step(const Vector& posterior, const Matrix& signals,
                             const MeasurementBatch& batch, const Matrix& intensity, double dt,
                             double obs_noise, const SubstepPolicy& policy) {
  require_positive(dt, "dt", "wonham_step");
  require_positive(obs_noise, "obs_noise", "wonham_step");
  auto increment = [&](const Vector& state, const Vector& dz, double h) {
    return wonham_increment(state, signals, dz, intensity, h, obs_noise);
  };
  WonhamStepResult result;
  result.info.substeps = 0;
  result.posterior = substep(posterior, batch.channels, dt, 0, policy, obs_noise * obs_noise,
                             result.info.substeps, increment, "wonham_step");
  result.info.projection = project_to_simplex(result.posterior);
  return result;
}

}  // namespace pdafpf
