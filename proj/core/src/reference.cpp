#include "pdafpf/reference.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "pdafpf/errors.hpp"
#include "pdafpf/random.hpp"

namespace pdafpf {

namespace {

const LinearDynamics& require_linear(const TargetModel& model, const char* where) {
  if (!model.linear) throw ConfigError(std::string(where) + ": a linear model is required");
  return *model.linear;
}

Matrix stabilize_covariance(const Matrix& cov, const char* where) {
  Matrix sym = 0.5 * (cov + cov.transpose());
  if (!sym.allFinite()) throw NumericalError(std::string(where) + ": covariance is not finite");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  const double lowest = eig.eigenvalues().minCoeff();
  if (lowest < -1e-9 * scale) {
    std::ostringstream msg;
    msg << where << ": covariance lost positive semidefiniteness (eigenvalue " << lowest << ")";
    throw NumericalError(msg.str());
  }
  if (lowest < 0.0) {
    sym = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() *
          eig.eigenvectors().transpose();
  }
  return sym;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// z / (exp(z) - 1), continuous at zero.
double bernoulli(double z) {
  if (std::abs(z) < 1e-10) return 1.0 - 0.5 * z;
  return z / std::expm1(z);
}

double eval_scalar(const ObservationMap& h, double x) { return h(Vector::Constant(1, x)); }

}  // namespace

// --- Kalman-Bucy -------------------------------------------------------------

KalmanState kalman_bucy_predict(const KalmanState& state, const TargetModel& model, double dt) {
  const LinearDynamics& lin = require_linear(model, "kalman_bucy_predict");
  if (!(dt > 0.0)) throw ConfigError("kalman_bucy_predict: dt must be positive");
  const Matrix& F = lin.drift;
  const Matrix Q = model.diffusion.cwiseAbs2().asDiagonal();
  KalmanState next;
  next.mean = state.mean + F * state.mean * dt;
  next.cov = stabilize_covariance(state.cov + (F * state.cov + state.cov * F.transpose() + Q) * dt,
                                  "kalman_bucy_predict");
  return next;
}

KalmanState kalman_bucy_step(const KalmanState& state, const TargetModel& model, double dz, double dt) {
  const LinearDynamics& lin = require_linear(model, "kalman_bucy_step");
  if (!(dt > 0.0)) throw ConfigError("kalman_bucy_step: dt must be positive");
  const Matrix& F = lin.drift;
  const RowVector& H = lin.observation;
  const double inv_var = 1.0 / (model.obs_noise * model.obs_noise);
  const Matrix Q = model.diffusion.cwiseAbs2().asDiagonal();
  const Vector gain = state.cov * H.transpose() * inv_var;

  KalmanState next;
  next.mean = state.mean + F * state.mean * dt + gain * (dz - H.dot(state.mean) * dt);
  const Matrix ph = state.cov * H.transpose();
  const Matrix riccati =
      F * state.cov + state.cov * F.transpose() + Q - ph * ph.transpose() * inv_var;
  next.cov = stabilize_covariance(state.cov + riccati * dt, "kalman_bucy_step");
  if (!next.mean.allFinite()) throw NumericalError("kalman_bucy_step: mean is not finite");
  return next;
}

double scalar_riccati_steady_state(double alpha, double sigma_b, double gamma, double sigma_w) {
  // (gamma^2 / sigma_W^2) P^2 - 2 alpha P - sigma_B^2 = 0.
  const double a = gamma * gamma / (sigma_w * sigma_w);
  if (a == 0.0) return -sigma_b * sigma_b / (2.0 * alpha);
  return (alpha + std::sqrt(alpha * alpha + a * sigma_b * sigma_b)) / a;
}

// --- Grid density --------------------------------------------------------------

double GridDensity::mean() const {
  double m = 0.0;
  for (Eigen::Index i = 0; i < cells(); ++i) m += mass[i] * center(i);
  return m;
}

double GridDensity::variance() const {
  const double mu = mean();
  double v = 0.0;
  for (Eigen::Index i = 0; i < cells(); ++i) v += mass[i] * (center(i) - mu) * (center(i) - mu);
  return v;
}

double GridDensity::boundary_mass(int width) const {
  const Eigen::Index w = std::min<Eigen::Index>(width, cells() / 2);
  return mass.head(w).sum() + mass.tail(w).sum();
}

Vector GridDensity::histogram(std::span<const double> samples) const {
  Vector counts = Vector::Zero(cells());
  for (double s : samples) {
    const double t = std::floor((s - lower) / spacing);
    const Eigen::Index i =
        static_cast<Eigen::Index>(std::clamp(t, 0.0, static_cast<double>(cells() - 1)));
    counts[i] += 1.0;
  }
  if (!samples.empty()) counts /= static_cast<double>(samples.size());
  return counts;
}

void GridDensity::validate() const {
  if (cells() < 3) throw ConfigError("GridDensity: at least three cells are required");
  if (!(spacing > 0.0)) throw ConfigError("GridDensity: spacing must be positive");
  if (!mass.allFinite() || (mass.array() < 0.0).any()) {
    throw NumericalError("GridDensity: mass must be finite and non-negative");
  }
}

GridDensity GridDensity::gaussian(double mean, double var, double lower, double upper, int cells) {
  if (!(upper > lower) || cells < 3 || !(var > 0.0)) {
    throw ConfigError("GridDensity::gaussian: need upper > lower, >= 3 cells and var > 0");
  }
  GridDensity g{lower, (upper - lower) / cells, Vector(cells)};
  const double sd = std::sqrt(var);
  for (int i = 0; i < cells; ++i) {
    const double a = (lower + i * g.spacing - mean) / sd;
    const double b = (lower + (i + 1) * g.spacing - mean) / sd;
    g.mass[i] = normal_cdf(b) - normal_cdf(a);
  }
  g.mass /= g.mass.sum();
  return g;
}

GridDensity GridDensity::around_gaussian(double mean, double var, int cells, double extent_sd) {
  const double half = extent_sd * std::sqrt(var);
  return gaussian(mean, var, mean - half, mean + half, cells);
}

double l1_distance(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().sum(); }

GridDensity fokker_planck_step(const GridDensity& density, const TargetModel& model, double dt,
                               int* substeps) {
  if (model.dim() != 1) throw ConfigError("fokker_planck_step: scalar model required");
  if (!(dt > 0.0)) throw ConfigError("fokker_planck_step: dt must be positive");
  const Eigen::Index n = density.cells();
  const double dx = density.spacing;
  const double diff = 0.5 * model.diffusion[0] * model.diffusion[0];

  // Face i + 1/2 sits between cells i and i + 1. In terms of cell masses,
  // flux = forward * m_i - backward * m_{i+1}.
  Vector forward(n - 1), backward(n - 1);
  for (Eigen::Index f = 0; f < n - 1; ++f) {
    const double x = density.lower + static_cast<double>(f + 1) * dx;
    const double a = model.drift(Vector::Constant(1, x))[0];
    if (!std::isfinite(a)) throw NumericalError("fokker_planck_step: non-finite drift");
    if (diff > 0.0) {
      const double peclet = a * dx / diff;
      forward[f] = diff / (dx * dx) * bernoulli(-peclet);
      backward[f] = diff / (dx * dx) * bernoulli(peclet);
    } else {
      forward[f] = std::max(a, 0.0) / dx;
      backward[f] = std::max(-a, 0.0) / dx;
    }
  }

  // Positivity of the explicit scheme: every cell loses at most half its mass per sub-step.
  double max_rate = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double out = 0.0;
    if (i < n - 1) out += forward[i];
    if (i > 0) out += backward[i - 1];
    max_rate = std::max(max_rate, out);
  }
  const int steps = std::max(1, static_cast<int>(std::ceil(max_rate * dt / 0.5)));
  const double h = dt / steps;

  Vector m = density.mass;
  Vector flux(n - 1);
  for (int s = 0; s < steps; ++s) {
    for (Eigen::Index f = 0; f < n - 1; ++f) flux[f] = forward[f] * m[f] - backward[f] * m[f + 1];
    for (Eigen::Index f = 0; f < n - 1; ++f) {
      m[f] -= h * flux[f];
      m[f + 1] += h * flux[f];
    }
  }
  if (substeps) *substeps = steps;
  return GridDensity{density.lower, density.spacing, m.cwiseMax(0.0)};
}

GridStepResult ks_grid_step(const GridDensity& density, const TargetModel& model,
                            const AssociationBelief& beliefs, const MeasurementBatch& batch, double dt) {
  density.validate();
  if (model.dim() != 1) throw ConfigError("ks_grid_step: scalar model required");
  if (beliefs.channels() != batch.channels.size()) {
    throw ConfigError("ks_grid_step: beliefs and batch channel counts differ");
  }
  const double edge = density.boundary_mass();
  if (edge > 1e-6) {
    std::ostringstream msg;
    msg << "ks_grid_step: grid too small, boundary mass " << edge << " exceeds 1e-6";
    throw NumericalError(msg.str());
  }

  const Eigen::Index n = density.cells();
  Vector h(n);
  for (Eigen::Index i = 0; i < n; ++i) h[i] = eval_scalar(model.obs_map, density.center(i));
  const double h_mean = density.mass.dot(h);
  const double inv_var = 1.0 / (model.obs_noise * model.obs_noise);

  Vector weighted = density.mass;
  bool any = false;
  for (Eigen::Index m = 1; m <= beliefs.channels(); ++m) any = any || beliefs.beta[m] != 0.0;
  if (any) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double centered = h[i] - h_mean;
      double exponent = 0.0;
      for (Eigen::Index m = 1; m <= beliefs.channels(); ++m) {
        const double b = beliefs.beta[m];
        exponent += inv_var * b * centered * (batch.channels[m - 1] - h_mean * dt);
        exponent -= 0.5 * inv_var * b * b * centered * centered * dt;
      }
      weighted[i] *= std::exp(exponent);
    }
  }

  GridStepResult result;
  result.density = fokker_planck_step({density.lower, density.spacing, weighted}, model, dt,
                                      &result.fp_substeps);
  const double total = result.density.mass.sum();
  if (!(total > 0.0) || !std::isfinite(total)) throw NumericalError("ks_grid_step: total mass vanished");
  result.normalization_drift = std::abs(total - 1.0);
  result.density.mass /= total;
  return result;
}

// --- Consistency check ---------------------------------------------------------

ConsistencyReport consistency_check(const ConsistencyConfig& cfg) {
  const TargetModel& model = cfg.model;
  model.validate();
  if (model.dim() != 1) throw ConfigError("consistency_check: scalar model required");
  if (cfg.channels < 1) throw ConfigError("consistency_check: at least one channel is required");
  if (!(cfg.dt > 0.0) || cfg.horizon < cfg.dt) throw ConfigError("consistency_check: need 0 < dt <= horizon");
  if (cfg.association == ConsistencyConfig::Association::kKnown && cfg.channels != 1) {
    throw ConfigError("consistency_check: known association is defined for one channel");
  }

  const auto steps = static_cast<long>(std::llround(cfg.horizon / cfg.dt));
  const Eigen::Index M = cfg.channels;

  RandomStream truth_init(cfg.seed, stream_entity(StreamKind::kTruthInit));
  RandomStream truth_noise(cfg.seed, stream_entity(StreamKind::kTruthDynamics));
  RandomStream assoc_noise(cfg.seed, stream_entity(StreamKind::kAssociation));
  RandomStream meas_noise(cfg.seed, stream_entity(StreamKind::kMeasurement));
  RandomStream particle_init(cfg.seed, stream_entity(StreamKind::kParticleInit));
  RandomStream particle_noise(cfg.seed, stream_entity(StreamKind::kParticleNoise));

  const double prior_sd = std::sqrt(cfg.prior_var);
  TruthState truth;
  truth.targets = {Vector::Constant(1, cfg.prior_mean + prior_sd * truth_init.normal())};
  AssociationProcess chain{static_cast<int>(M + 1), cfg.rate, 1};
  if (cfg.association == ConsistencyConfig::Association::kSde) {
    chain.current = std::min<int>(static_cast<int>(M), static_cast<int>(truth_init.uniform() * (M + 1)));
  }
  truth.association = chain.current;

  ParticleEnsemble ens = ParticleEnsemble::sample(Vector::Constant(1, cfg.prior_mean),
                                                  Matrix::Constant(1, 1, cfg.prior_var),
                                                  cfg.particles, particle_init);
  GridDensity grid = GridDensity::around_gaussian(cfg.prior_mean, cfg.prior_var, cfg.cells, cfg.extent_sd);

  AssociationBelief beliefs;
  switch (cfg.association) {
    case ConsistencyConfig::Association::kNone: beliefs.beta = Vector::Zero(M + 1); beliefs.beta[0] = 1.0; break;
    case ConsistencyConfig::Association::kKnown: beliefs = AssociationBelief::certain(M, 1); break;
    case ConsistencyConfig::Association::kSde: beliefs = AssociationBelief::uniform(M); break;
  }

  ConsistencyReport report;
  auto record = [&](double t) {
    const std::span<const double> xs(ens.states.data(), static_cast<std::size_t>(ens.size()));
    report.times.push_back(t);
    report.l1.push_back(l1_distance(grid.histogram(xs), grid.mass));
    report.particle_mean.push_back(ens.states.mean());
    report.grid_mean.push_back(grid.mean());
  };
  record(0.0);

  const std::vector<TargetModel> models{model};
  Matrix noise(1, cfg.particles);
  for (long k = 0; k < steps; ++k) {
    truth.time = static_cast<double>(k) * cfg.dt;
    MeasurementBatch batch = emit_measurements(models, truth, cfg.dt, meas_noise.normals(M));
    if (cfg.zero_observations) batch.channels.setZero();

    const MomentEstimates moments = estimate_moments(ens, model.obs_map);
    const GainField gain = compute_gain(cfg.gain, ens, model, moments, cfg.gain_options);
    particle_noise.fill_normals(noise);
    ParticleEnsemble next = fpf_step(ens, model, beliefs, gain, batch, cfg.dt, noise, {cfg.threads});
    grid = ks_grid_step(grid, model, beliefs, batch, cfg.dt).density;
    if (cfg.association == ConsistencyConfig::Association::kSde) {
      beliefs = beta_sde_step(beliefs, moments, batch, cfg.rate, cfg.dt, model.obs_noise).belief;
    }
    ens = std::move(next);

    truth.targets[0] = step_truth(model, truth.targets[0], cfg.dt, truth_noise.normals(1));
    if (cfg.association == ConsistencyConfig::Association::kSde) {
      chain.current = step_association(chain, cfg.dt, assoc_noise.uniform());
      truth.association = chain.current;
    }

    const bool last = k + 1 == steps;
    if (last || (cfg.sample_every > 0 && (k + 1) % cfg.sample_every == 0)) {
      record(static_cast<double>(k + 1) * cfg.dt);
    }
  }
  return report;
}

}  // namespace pdafpf
