#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "pdafpf/association.hpp"
#include "pdafpf/errors.hpp"

namespace pdafpf {
namespace {

MomentEstimates h_moments(double h_mean, double h2_mean) {
  MomentEstimates m;
  m.mean = Vector::Constant(1, h_mean);
  m.cov = Matrix::Constant(1, 1, std::max(0.0, h2_mean - h_mean * h_mean));
  m.h_mean = h_mean;
  m.h2_mean = h2_mean;
  return m;
}

MomentEstimates moments_of(const Vector& h) {
  return h_moments(h.mean(), h.squaredNorm() / static_cast<double>(h.size()));
}

TEST(BetaSde, SymmetricFixedPoint) {
  for (Eigen::Index M : {1, 2, 3, 4}) {
    const AssociationBelief b = AssociationBelief::uniform(M);
    const MeasurementBatch batch{0.0, Vector::Constant(M, 0.037)};
    const BetaStepResult r = beta_sde_step(b, h_moments(1.3, 2.5), batch, 1.0, 0.01, 0.3);
    EXPECT_LE((r.belief.beta - b.beta).cwiseAbs().maxCoeff(), 1e-15) << "M = " << M;
  }
}

TEST(BetaSde, PriorTermRelaxesTowardUniform) {
  const Eigen::Index M = 3;
  const double c = 1.0;
  const double dt = 1e-3;
  AssociationBelief b{(Vector(4) << 0.1, 0.6, 0.2, 0.1).finished()};
  const Vector start = b.beta;
  const MeasurementBatch batch{0.0, Vector::Zero(M)};
  for (int k = 0; k < 1000; ++k) b = beta_sde_step(b, h_moments(0.0, 0.0), batch, c, dt, 0.3).belief;
  const double decay = std::exp(-c * (M + 1.0) / M * 1.0);
  for (Eigen::Index m = 0; m <= M; ++m) {
    EXPECT_NEAR(b.beta[m], 0.25 + (start[m] - 0.25) * decay, 1e-4) << m;
  }
}

TEST(BetaSde, SingleChannelMeasurementTermsCancel) {
  const AssociationBelief b{(Vector(2) << 0.3, 0.7).finished()};
  const BetaSdeTerms t = beta_sde_terms(b, h_moments(2.0, 7.0), Vector::Constant(1, 0.4), 1.5, 0.01, 0.2);
  EXPECT_EQ(t.innovation[0], 0.0);
  EXPECT_EQ(t.variance[0], 0.0);
  EXPECT_DOUBLE_EQ(t.prior[0], 1.5 * (1.0 - 2.0 * 0.7) * 0.01);
}

TEST(BetaSde, InvariantUnderChannelRelabeling) {
  const AssociationBelief b{(Vector(4) << 0.1, 0.5, 0.15, 0.25).finished()};
  const Vector dz = (Vector(3) << 0.02, -0.01, 0.005).finished();
  const AssociationBelief pb{(Vector(4) << 0.1, 0.25, 0.5, 0.15).finished()};
  const Vector pdz = (Vector(3) << 0.005, 0.02, -0.01).finished();
  const MomentEstimates m = h_moments(0.8, 1.1);
  const Vector a = beta_sde_step(b, m, {0.0, dz}, 1.0, 0.01, 0.3).belief.beta;
  const Vector p = beta_sde_step(pb, m, {0.0, pdz}, 1.0, 0.01, 0.3).belief.beta;
  EXPECT_NEAR(p[0], a[0], 1e-15);
  EXPECT_NEAR(p[1], a[3], 1e-15);
  EXPECT_NEAR(p[2], a[1], 1e-15);
  EXPECT_NEAR(p[3], a[2], 1e-15);
}

TEST(BetaSde, ResultStaysOnSimplex) {
  const AssociationBelief b{(Vector(3) << 0.0, 0.98, 0.02).finished()};
  const BetaStepResult r = beta_sde_step(b, h_moments(5.0, 26.0), {0.0, (Vector(2) << -0.02, 0.03).finished()}, 1.0,
                                         0.01, 0.1);
  EXPECT_NO_THROW(r.belief.validate());
  EXPECT_GT(r.info.substeps, 1);
}

TEST(WonhamAverage, MatchesBetaSdeWhenEveryHypothesisIsAChannel) {
  // Averaging the Wonham increment with signals h(X^i) e_m over the particles
  // reproduces the association SDE increment when beta^0 = 0.
  const Eigen::Index M = 3;
  const Vector h = (Vector(6) << 0.4, 1.1, -0.3, 0.9, 2.0, 0.7).finished();
  const Vector q = (Vector(4) << 0.0, 0.5, 0.3, 0.2).finished();
  const Vector dz = (Vector(3) << 0.012, -0.004, 0.02).finished();
  const double c = 1.3, dt = 1e-2, sigma = 0.4;
  const Matrix intensity = AssociationProcess{static_cast<int>(M + 1), c, 0}.intensity();
  Vector avg = Vector::Zero(M + 1);
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    avg += wonham_increment(q, pda_signals(h[i], M), dz, intensity, dt, sigma) / static_cast<double>(h.size());
  }
  const Vector sde = beta_sde_terms(AssociationBelief{q}, moments_of(h), dz, c, dt, sigma).total();
  EXPECT_LE((avg.tail(M) - sde).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(WonhamAverage, GapWithUndetectedMassMatchesDerivedTerm) {
  // With beta^0 > 0 the printed SDE differs from the averaged Wonham increment by
  // beta^m beta^0 / sigma^2 (-h_mean dZ^m + E[h^2] beta^m dt).
  const Eigen::Index M = 2;
  const Vector h = (Vector(5) << 0.4, 1.1, -0.3, 0.9, 2.0).finished();
  const Vector q = (Vector(3) << 0.3, 0.45, 0.25).finished();
  const Vector dz = (Vector(2) << 0.015, -0.006).finished();
  const double c = 0.7, dt = 1e-2, sigma = 0.5;
  const Matrix intensity = AssociationProcess{static_cast<int>(M + 1), c, 0}.intensity();
  Vector avg = Vector::Zero(M + 1);
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    avg += wonham_increment(q, pda_signals(h[i], M), dz, intensity, dt, sigma) / static_cast<double>(h.size());
  }
  const MomentEstimates mom = moments_of(h);
  const Vector sde = beta_sde_terms(AssociationBelief{q}, mom, dz, c, dt, sigma).total();
  for (Eigen::Index m = 1; m <= M; ++m) {
    const double gap = q[m] * q[0] / (sigma * sigma) * (-mom.h_mean * dz[m - 1] + mom.h2_mean * q[m] * dt);
    EXPECT_NEAR(sde[m - 1] - avg[m], gap, 1e-14) << m;
  }
}

TEST(Wonham, UninformativeFrozenChainKeepsPosterior) {
  const Vector q = (Vector(3) << 0.2, 0.5, 0.3).finished();
  const Matrix intensity = AssociationProcess{3, 0.0, 0}.intensity();
  const WonhamStepResult r = wonham_step(q, pda_signals(0.0, 2), {0.0, (Vector(2) << 0.3, -0.1).finished()}, intensity,
                                         0.01, 0.2);
  EXPECT_LE((r.posterior - q).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Wonham, InformativeSignalsIdentifyTheAssociation) {
  const double dt = 1e-3, sigma = 0.01;
  const Matrix intensity = AssociationProcess{3, 0.0, 0}.intensity();
  int good = 0;
  const int runs = 40;
  for (int r = 0; r < runs; ++r) {
    RandomStream rng(100 + r, stream_entity(StreamKind::kMeasurement));
    const int truth = r % 3;
    const double h = 1.0 + 0.5 * rng.normal();
    const Matrix signals = pda_signals(h, 2);
    Vector q = Vector::Constant(3, 1.0 / 3.0);
    for (int k = 0; k < 500; ++k) {
      const Vector dz = signals.row(truth).transpose() * dt + sigma * std::sqrt(dt) * rng.normals(2);
      q = wonham_step(q, signals, {0.0, dz}, intensity, dt, sigma).posterior;
    }
    good += q[truth] > 0.95;
  }
  EXPECT_GE(good, static_cast<int>(std::ceil(0.95 * runs)));
}

TEST(Substepping, SplitStepKeepsItoMean) {
  // A step that has to be split is integrated with the Ito-to-Stratonovich
  // drift, so its mean over measurement noise stays near the single Euler step;
  // what is left is higher order in the step and well below the drift an
  // uncorrected split would add.
  const Vector q0 = Vector::Constant(3, 1.0 / 3.0);
  const Matrix signals = pda_signals(1.0, 2);
  const Matrix intensity = AssociationProcess{3, 0.0, 0}.intensity();
  const double dt = 1e-3, sigma = 0.2;
  const SubstepPolicy fine{0.01, 10};
  RandomStream rng(17, stream_entity(StreamKind::kMeasurement));
  const int n = 20000;
  Vector sum_diff = Vector::Zero(3);
  Vector sum_sq = Vector::Zero(3);
  int split = 0;
  for (int s = 0; s < n; ++s) {
    const Vector dz = signals.row(1).transpose() * dt + sigma * std::sqrt(dt) * rng.normals(2);
    const MeasurementBatch batch{0.0, dz};
    const WonhamStepResult a = wonham_step(q0, signals, batch, intensity, dt, sigma, fine);
    const Vector euler = q0 + wonham_increment(q0, signals, dz, intensity, dt, sigma);
    split += a.info.substeps > 1;
    const Vector d = a.posterior - euler;
    sum_diff += d;
    sum_sq += d.cwiseProduct(d);
  }
  ASSERT_GT(split, n / 2);
  // The Stratonovich drift that an uncorrected split would add.
  Vector strat = Vector::Zero(3);
  for (Eigen::Index k = 0; k < 2; ++k) {
    Vector e = Vector::Zero(2);
    e[k] = 1.0;
    auto column = [&](const Vector& x) {
      return Vector(wonham_increment(x, signals, e, intensity, dt, sigma) -
                    wonham_increment(x, signals, Vector::Zero(2), intensity, dt, sigma));
    };
    const Vector b = column(q0);
    const double eps = 1e-6;
    strat += 0.5 * sigma * sigma * (column(q0 + eps * b) - column(q0 - eps * b)) / (2.0 * eps);
  }
  strat *= dt;
  for (Eigen::Index i = 0; i < 3; ++i) {
    const double mean = sum_diff[i] / n;
    const double se = std::sqrt((sum_sq[i] / n - mean * mean) / n);
    EXPECT_LE(std::abs(mean), 0.1 * std::abs(strat[i]) + 4.0 * se) << i;
    if (std::abs(strat[i]) > 1e-6) EXPECT_GT(std::abs(strat[i]), 8.0 * se) << i;
  }
}

TEST(Substepping, CapExceededIsStiffError) {
  const JointAssociationBelief b{0.5, 0.5};
  const MomentEstimates t1 = h_moments(1e6, 1e12);
  const MomentEstimates t2 = h_moments(-1e6, 1e12);
  try {
    pi_sde_step(b, t1, t2, {0.0, (Vector(2) << 1.0, -1.0).finished()}, 1.0, 1e-3, 0.005);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("stiff"), std::string::npos) << e.what();
  }
}

TEST(PiSde, SymmetricPointIsFixed) {
  const MomentEstimates m = h_moments(0.7, 1.0);
  EXPECT_EQ(pi_sde_increment({0.5, 0.5}, m, m, (Vector(2) << 0.3, -0.2).finished(), 1.0, 0.01, 0.1), 0.0);
}

TEST(PiSde, VertexOnlyFeelsThePrior) {
  const MomentEstimates a = h_moments(0.7, 1.0);
  const MomentEstimates b = h_moments(-0.4, 0.5);
  EXPECT_DOUBLE_EQ(pi_sde_increment({1.0, 0.0}, a, b, (Vector(2) << 0.3, -0.2).finished(), 2.0, 0.01, 0.1), -0.02);
}

TEST(PiSde, StepKeepsComplement) {
  const JointStepResult r = pi_sde_step({0.6, 0.4}, h_moments(1.0, 1.1), h_moments(-1.0, 1.1),
                                        {0.0, (Vector(2) << 0.01, -0.01).finished()}, 1.0, 1e-3, 0.1);
  EXPECT_NO_THROW(r.belief.validate());
  EXPECT_GT(r.belief.pi1, 0.6);
}

TEST(PiSde, InvariantUnderTargetRelabeling) {
  const MomentEstimates a = h_moments(0.7, 1.0);
  const MomentEstimates b = h_moments(-0.4, 0.5);
  const Vector dz = (Vector(2) << 0.004, -0.002).finished();
  const double d = pi_sde_increment({0.3, 0.7}, a, b, dz, 1.0, 1e-3, 0.2);
  const double swapped = pi_sde_increment({0.7, 0.3}, a, b, (Vector(2) << dz[1], dz[0]).finished(), 1.0, 1e-3, 0.2);
  EXPECT_NEAR(d, -swapped, 1e-15);
}

TEST(Marginals, MappingCases) {
  const AssociationBelief t1 = marginals_from_joint({0.7, 0.3}, 1);
  const AssociationBelief t2 = marginals_from_joint({0.7, 0.3}, 2);
  EXPECT_EQ(t1.beta, (Vector(3) << 0.0, 0.7, 0.3).finished());
  EXPECT_EQ(t2.beta, (Vector(3) << 0.0, 0.3, 0.7).finished());
  EXPECT_EQ(marginals_from_joint({0.5, 0.5}, 1).beta, marginals_from_joint({0.5, 0.5}, 2).beta);
  EXPECT_THROW(marginals_from_joint({0.7, 0.7}, 1), ConfigError);
}

TEST(Bayes, EqualLikelihoodsKeepPrior) {
  const AssociationBelief prior{(Vector(3) << 0.2, 0.3, 0.5).finished()};
  const BayesStepResult r = bayes_update(prior, Vector::Constant(3, -4.2), true);
  EXPECT_LE((r.belief.beta - prior.beta).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_FALSE(r.underflow);
}

TEST(Bayes, LikelihoodRatioArithmetic) {
  const AssociationBelief prior{(Vector(2) << 0.5, 0.5).finished()};
  const BayesStepResult r = bayes_update(prior, (Vector(2) << std::log(3.0), 0.0).finished(), true);
  EXPECT_NEAR(r.belief.beta[0], 0.75, 1e-15);
  EXPECT_NEAR(r.belief.beta[1], 0.25, 1e-15);
}

TEST(Bayes, InvariantUnderCommonLikelihoodScale) {
  const AssociationBelief prior{(Vector(4) << 0.1, 0.2, 0.3, 0.4).finished()};
  const Vector ll = (Vector(4) << -1.0, 2.0, 0.5, -3.0).finished();
  const Vector a = bayes_update(prior, ll, true).belief.beta;
  const Vector b = bayes_update(prior, (ll.array() - 900.0).matrix(), true).belief.beta;
  EXPECT_LE((a - b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Bayes, UnderflowReturnsPriorWithFlag) {
  const AssociationBelief prior{(Vector(3) << 0.2, 0.3, 0.5).finished()};
  const double ninf = -std::numeric_limits<double>::infinity();
  const BayesStepResult r = bayes_update(prior, Vector::Constant(3, ninf), true);
  EXPECT_TRUE(r.underflow);
  EXPECT_EQ(r.belief.beta, prior.beta);
}

TEST(Bayes, UndetectedMassIsCarriedWhenExcluded) {
  const AssociationBelief prior{(Vector(3) << 0.2, 0.4, 0.4).finished()};
  const BayesStepResult r = bayes_update(prior, (Vector(3) << 5.0, std::log(3.0), 0.0).finished(), false);
  EXPECT_EQ(r.belief.beta[0], 0.2);
  EXPECT_NEAR(r.belief.beta[1], 0.6, 1e-15);
  EXPECT_NEAR(r.belief.beta[2], 0.2, 1e-15);
}

TEST(Bayes, EqualChannelMeasurementsKeepPrior) {
  RandomStream rng(4, stream_entity(StreamKind::kParticleInit));
  const ParticleEnsemble ens = ParticleEnsemble::sample(Vector::Zero(1), Matrix::Identity(1, 1), 500, rng);
  const AssociationBelief prior{(Vector(3) << 0.2, 0.4, 0.4).finished()};
  const auto h = [](const Vector& x) { return x[0]; };
  for (auto kind : {ClutterLikelihood::Kind::kGaussianNoise, ClutterLikelihood::Kind::kUniformVolume}) {
    const ClutterLikelihood clutter{kind, 10.0, false};
    const BayesStepResult r =
        beta_bayes_step(prior, ens, {0.0, Vector::Constant(2, 0.01)}, 0.01, clutter, 0.3, h);
    EXPECT_LE((r.belief.beta - prior.beta).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Bayes, ParticleLikelihoodConvergesToGaussianConvolution) {
  const double mu = 0.4, var = 0.5, dt = 0.01, sigma = 0.3;
  RandomStream rng(6, stream_entity(StreamKind::kParticleInit));
  const ParticleEnsemble ens =
      ParticleEnsemble::sample(Vector::Constant(1, mu), Matrix::Constant(1, 1, var), 100000, rng);
  const Vector h = ens.states.row(0).transpose();
  for (double dz : {0.0, 0.004, 0.03, -0.05}) {
    const double s2 = sigma * sigma * dt + var * dt * dt;
    const double closed = -0.5 * std::log(2.0 * std::numbers::pi * s2) - 0.5 * (dz - mu * dt) * (dz - mu * dt) / s2;
    EXPECT_NEAR(std::exp(log_particle_likelihood(h, dz, dt, sigma) - closed), 1.0, 0.02) << dz;
  }
}

TEST(Simplex, ProjectionClipsAndRenormalizes) {
  Vector p = (Vector(3) << -0.1, 0.6, 0.6).finished();
  const double moved = project_to_simplex(p);
  EXPECT_NEAR(p[0], 0.0, 0.0);
  EXPECT_NEAR(p[1], 0.5, 1e-15);
  EXPECT_NEAR(moved, 0.1 + 0.1 + 0.1, 1e-15);
  Vector dead = (Vector(2) << -0.1, -0.2).finished();
  EXPECT_THROW(project_to_simplex(dead), NumericalError);
}

TEST(Simplex, PredictionKeepsUniformAndSum) {
  const AssociationBelief u = AssociationBelief::uniform(3);
  EXPECT_LE((beta_predict(u, 2.0, 0.1).beta - u.beta).cwiseAbs().maxCoeff(), 1e-15);
  const AssociationBelief b{(Vector(4) << 0.7, 0.1, 0.1, 0.1).finished()};
  const AssociationBelief p = beta_predict(b, 2.0, 0.01);
  EXPECT_NEAR(p.beta.sum(), 1.0, 1e-15);
  EXPECT_LT(p.beta[0], 0.7);
}

}  // namespace
}  // namespace pdafpf
