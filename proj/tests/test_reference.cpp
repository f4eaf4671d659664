#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "pdafpf/errors.hpp"
#include "pdafpf/random.hpp"
#include "pdafpf/reference.hpp"

namespace pdafpf {
namespace {

struct Lyapunov {
  double mean;
  double var;
};

Lyapunov ou_moments(double alpha, double sigma_b, double m0, double v0, double t) {
  const double e = std::exp(alpha * t);
  return {m0 * e, v0 * e * e + sigma_b * sigma_b / (-2.0 * alpha) * (1.0 - e * e)};
}

TEST(KalmanBucy, NoiselessModelPropagatesMean) {
  const TargetModel model = TargetModel::white_noise_acceleration((Vector(2) << 0.0, 1.0).finished(), 0.06);
  KalmanState s{(Vector(2) << 1.0, 2.0).finished(), Matrix::Zero(2, 2)};
  model.validate();
  TargetModel still = model;
  still.diffusion = Vector::Zero(2);
  for (int k = 0; k < 100; ++k) s = kalman_bucy_predict(s, still, 0.01);
  EXPECT_NEAR(s.mean[0], 3.0, 1e-12);
  EXPECT_EQ(s.mean[1], 2.0);
  EXPECT_LE(s.cov.cwiseAbs().maxCoeff(), 1e-15);
}

TEST(KalmanBucy, ScalarCovarianceReachesRiccatiRoot) {
  const double alpha = -0.5, sigma_b = 0.3, gamma = 1.0, sigma_w = 0.3;
  const TargetModel model = TargetModel::scalar_linear(alpha, sigma_b, gamma, sigma_w);
  KalmanState s{Vector::Zero(1), Matrix::Constant(1, 1, 1.0)};
  for (int k = 0; k < 20000; ++k) s = kalman_bucy_step(s, model, 0.0, 1e-3);
  const double p = scalar_riccati_steady_state(alpha, sigma_b, gamma, sigma_w);
  EXPECT_NEAR(2.0 * alpha * p + sigma_b * sigma_b - gamma * gamma * p * p / (sigma_w * sigma_w), 0.0, 1e-12);
  EXPECT_GT(p, 0.0);
  EXPECT_NEAR(s.cov(0, 0), p, 1e-6);
}

TEST(KalmanBucy, StepMatchesClosedForm) {
  const TargetModel model = TargetModel::scalar_linear(-0.5, 0.3, 2.0, 0.4);
  const KalmanState s{Vector::Constant(1, 0.7), Matrix::Constant(1, 1, 0.2)};
  const double dz = 0.013, dt = 0.01;
  const KalmanState n = kalman_bucy_step(s, model, dz, dt);
  const double k = 0.2 * 2.0 / 0.16;
  EXPECT_DOUBLE_EQ(n.mean[0], 0.7 - 0.5 * 0.7 * dt + k * (dz - 2.0 * 0.7 * dt));
  EXPECT_DOUBLE_EQ(n.cov(0, 0), 0.2 + (-0.2 + 0.09 - 0.2 * 0.2 * 4.0 / 0.16) * dt);
}

TEST(KalmanBucy, IndefiniteCovarianceThrows) {
  const TargetModel model = TargetModel::scalar_linear(-0.5, 0.0, 1.0, 0.01);
  const KalmanState s{Vector::Zero(1), Matrix::Constant(1, 1, 1.0)};
  EXPECT_THROW(kalman_bucy_step(s, model, 0.0, 1.0), NumericalError);
}

TEST(GridDensity, GaussianCellMassesCarryMoments) {
  const GridDensity g = GridDensity::around_gaussian(0.4, 0.25, 800);
  EXPECT_NEAR(g.mass.sum(), 1.0, 1e-14);
  EXPECT_NEAR(g.mean(), 0.4, 1e-10);
  // Midpoint rule adds spacing^2 / 12 to the variance.
  EXPECT_NEAR(g.variance(), 0.25 + g.spacing * g.spacing / 12.0, 1e-6);
  EXPECT_LT(g.boundary_mass(), 1e-12);
}

TEST(GridDensity, HistogramClampsToEdgeCells) {
  const GridDensity g = GridDensity::gaussian(0.0, 1.0, 0.0, 1.0, 4);
  const std::vector<double> xs{-3.0, 0.1, 0.6, 0.6, 9.0};
  const Vector h = g.histogram(xs);
  EXPECT_DOUBLE_EQ(h[0], 0.4);
  EXPECT_DOUBLE_EQ(h[1], 0.0);
  EXPECT_DOUBLE_EQ(h[2], 0.4);
  EXPECT_DOUBLE_EQ(h[3], 0.2);
}

TEST(GridDensity, L1Distance) {
  EXPECT_DOUBLE_EQ(l1_distance((Vector(3) << 0.2, 0.5, 0.3).finished(), (Vector(3) << 0.3, 0.5, 0.2).finished()),
                   0.2);
  EXPECT_EQ(l1_distance(Vector::Ones(4), Vector::Ones(4)), 0.0);
}

TEST(GridDensity, ValidateRejectsBadMass) {
  GridDensity g = GridDensity::gaussian(0.0, 1.0, -4.0, 4.0, 10);
  g.mass[3] = -0.1;
  EXPECT_THROW(g.validate(), NumericalError);
  EXPECT_THROW(GridDensity::gaussian(0.0, 1.0, 1.0, 0.0, 10), ConfigError);
}

TEST(GridSolver, UnobservedPropagationFollowsLyapunovMoments) {
  const double alpha = -0.5, sigma_b = 0.3;
  const TargetModel model = TargetModel::scalar_linear(alpha, sigma_b, 1.0, 0.3);
  GridDensity g = GridDensity::around_gaussian(0.5, 0.4, 400);
  const double h2 = g.spacing * g.spacing / 12.0;
  const AssociationBelief none = AssociationBelief::certain(1, 0);
  const MeasurementBatch batch{0.0, Vector::Constant(1, 0.05)};
  const double dt = 1e-4;
  double worst_drift = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const GridStepResult r = ks_grid_step(g, model, none, batch, dt);
    worst_drift = std::max(worst_drift, r.normalization_drift);
    g = r.density;
  }
  const Lyapunov exact = ou_moments(alpha, sigma_b, 0.5, 0.4, 1.0);
  EXPECT_NEAR(g.mean(), exact.mean, 1e-3);
  EXPECT_NEAR(g.variance() - h2, exact.var, 1e-3);
  EXPECT_LE(worst_drift, 1e-8);
  EXPECT_NEAR(g.mass.sum(), 1.0, 1e-12);
}

TEST(GridSolver, VarianceErrorShrinksUnderRefinement) {
  const double alpha = -1.0, sigma_b = 0.5;
  const TargetModel model = TargetModel::scalar_linear(alpha, sigma_b, 1.0, 0.3);
  const Lyapunov exact = ou_moments(alpha, sigma_b, 0.0, 1.0, 0.5);
  std::vector<double> errors;
  for (int cells : {50, 100, 200}) {
    GridDensity g = GridDensity::around_gaussian(0.0, 1.0, cells);
    for (int k = 0; k < 500; ++k) g = fokker_planck_step(g, model, 1e-3);
    errors.push_back(std::abs(g.variance() - exact.var));
  }
  EXPECT_LT(errors[1], errors[0]);
  EXPECT_LT(errors[2], errors[1]);
}

TEST(GridSolver, SingleCertainChannelTracksKalmanBucy) {
  const double alpha = -0.5, sigma_b = 0.3, gamma = 1.0, sigma_w = 0.3, dt = 1e-4;
  const TargetModel model = TargetModel::scalar_linear(alpha, sigma_b, gamma, sigma_w);
  GridDensity g = GridDensity::around_gaussian(0.0, 1.0, 400);
  KalmanState kb{Vector::Zero(1), Matrix::Constant(1, 1, 1.0)};
  RandomStream rng(4, stream_entity(StreamKind::kMeasurement));
  double x = 0.8;
  const AssociationBelief one = AssociationBelief::certain(1, 1);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    const double dz = gamma * x * dt + sigma_w * std::sqrt(dt) * rng.normal();
    x += alpha * x * dt + sigma_b * std::sqrt(dt) * rng.normal();
    g = ks_grid_step(g, model, one, {0.0, Vector::Constant(1, dz)}, dt).density;
    kb = kalman_bucy_step(kb, model, dz, dt);
    worst = std::max(worst, std::abs(g.mean() - kb.mean[0]));
  }
  EXPECT_LE(worst, 1e-2);
  EXPECT_NEAR(g.variance(), kb.cov(0, 0), 1e-2);
}

TEST(GridSolver, MassAtTheEdgeIsAnError) {
  const TargetModel model = TargetModel::scalar_linear(-0.5, 0.3, 1.0, 0.3);
  const GridDensity g = GridDensity::gaussian(0.0, 1.0, -1.0, 1.0, 50);
  try {
    ks_grid_step(g, model, AssociationBelief::certain(1, 0), {0.0, Vector::Zero(1)}, 1e-3);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("grid too small"), std::string::npos) << e.what();
  }
}

TEST(GridSolver, ChannelCountMismatchIsConfigError) {
  const TargetModel model = TargetModel::scalar_linear(-0.5, 0.3, 1.0, 0.3);
  const GridDensity g = GridDensity::around_gaussian(0.0, 1.0, 100);
  EXPECT_THROW(ks_grid_step(g, model, AssociationBelief::uniform(2), {0.0, Vector::Zero(1)}, 1e-3), ConfigError);
}

// Expected L1 between an N-sample histogram and its own cell probabilities:
// sum_i E|B_i / N - p_i| with B_i ~ Binomial(N, p_i), normal approximation.
double sampling_l1(const Vector& p, double n) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) total += std::sqrt(2.0 * p[i] * (1.0 - p[i]) / (std::numbers::pi * n));
  return total;
}

TEST(Consistency, ZeroObservationsAgreeToSamplingError) {
  ConsistencyConfig cfg;
  cfg.model = TargetModel::scalar_linear(-0.5, 0.3, 1.0, 0.3);
  cfg.zero_observations = true;
  cfg.association = ConsistencyConfig::Association::kKnown;
  cfg.horizon = 0.5;
  cfg.sample_every = 5000;
  const ConsistencyReport r = consistency_check(cfg);
  ASSERT_FALSE(r.l1.empty());
  // Under dZ = 0 the posterior stays Gaussian with Kalman-Bucy moments.
  KalmanState kb{Vector::Zero(1), Matrix::Constant(1, 1, 1.0)};
  for (int k = 0; k < 5000; ++k) kb = kalman_bucy_step(kb, cfg.model, 0.0, cfg.dt);
  const GridDensity g = GridDensity::around_gaussian(0.0, 1.0, cfg.cells, cfg.extent_sd);
  const Vector p = GridDensity::gaussian(kb.mean[0], kb.cov(0, 0), g.lower, g.upper(), cfg.cells).mass;
  EXPECT_LE(r.final_l1(), 1.5 * sampling_l1(p, static_cast<double>(cfg.particles)));
}

TEST(Consistency, PdaWithEvolvingBeliefsStaysCloseToGrid) {
  ConsistencyConfig cfg;
  cfg.model = TargetModel::scalar_linear(-0.5, 0.3, 1.0, 0.3);
  cfg.channels = 2;
  cfg.association = ConsistencyConfig::Association::kSde;
  cfg.particles = 10000;
  cfg.cells = 400;
  cfg.dt = 1e-4;
  cfg.horizon = 1.0;
  cfg.seed = 3;
  const ConsistencyReport r = consistency_check(cfg);
  EXPECT_LE(r.final_l1(), 0.15);
  ASSERT_EQ(r.particle_mean.size(), r.grid_mean.size());
  EXPECT_NEAR(r.particle_mean.back(), r.grid_mean.back(), 0.05);
}

}  // namespace
}  // namespace pdafpf
