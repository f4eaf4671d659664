#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "pdafpf/errors.hpp"
#include "pdafpf/models.hpp"
#include "pdafpf/random.hpp"

namespace pdafpf {
namespace {

TargetModel zero_model(Eigen::Index d, double diffusion) {
  TargetModel m;
  m.drift = [](const Vector& x) { return Vector::Zero(x.size()); };
  m.diffusion = Vector::Constant(d, diffusion);
  m.obs_map = [](const Vector& x) { return x[0]; };
  m.obs_noise = 1.0;
  return m;
}

TEST(StepTruth, ZeroDynamicsLeavesStateUnchanged) {
  const TargetModel m = zero_model(2, 0.0);
  const Vector x = (Vector(2) << 1.5, -2.0).finished();
  const Vector next = step_truth(m, x, 0.01, (Vector(2) << 0.3, -1.2).finished());
  EXPECT_EQ(next, x);
}

TEST(StepTruth, WhiteNoiseAccelerationDeterministicStep) {
  const TargetModel m = TargetModel::white_noise_acceleration((Vector(2) << 0.0, 1.0).finished(), 0.06);
  const Vector next = step_truth(m, (Vector(2) << 0.0, 6.0).finished(), 0.01, Vector::Zero(2));
  EXPECT_NEAR(next[0], 0.06, 1e-15);
  EXPECT_EQ(next[1], 6.0);
}

TEST(StepTruth, IncrementVarianceMatchesDt) {
  const TargetModel m = zero_model(1, 1.0);
  RandomStream rng(11, stream_entity(StreamKind::kTruthDynamics));
  const double dt = 0.01;
  const int n = 100000;
  double sum = 0.0;
  double sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = step_truth(m, Vector::Zero(1), dt, rng.normals(1))[0];
    sum += v;
    sq += v * v;
  }
  const double mean = sum / n;
  const double var = (sq - n * mean * mean) / (n - 1);
  EXPECT_NEAR(var / dt, 1.0, 0.05);
}

TEST(StepTruth, NonFiniteDriftIsReported) {
  TargetModel m = zero_model(2, 0.0);
  m.drift = [](const Vector& x) {
    Vector out = Vector::Zero(x.size());
    out[1] = std::numeric_limits<double>::infinity();
    return out;
  };
  try {
    step_truth(m, Vector::Zero(2), 0.01, Vector::Zero(2));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("component 1"), std::string::npos) << e.what();
  }
}

TEST(StepTruth, LocalErrorAgainstMatrixExponentialIsSecondOrder) {
  // Rotation generator: exp(F dt) is a plane rotation by dt.
  const Matrix f = (Matrix(2, 2) << 0.0, 1.0, -1.0, 0.0).finished();
  const TargetModel m = TargetModel::make_linear(f, Vector::Zero(2), (RowVector(2) << 1.0, 0.0).finished(), 1.0);
  const Vector x = (Vector(2) << 0.7, -1.3).finished();
  std::vector<double> constants;
  for (double dt : {0.02, 0.01, 0.005, 0.0025}) {
    const Matrix rot = (Matrix(2, 2) << std::cos(dt), std::sin(dt), -std::sin(dt), std::cos(dt)).finished();
    const double err = (step_truth(m, x, dt, Vector::Zero(2)) - rot * x).norm();
    constants.push_back(err / (dt * dt));
  }
  for (std::size_t i = 1; i < constants.size(); ++i) {
    EXPECT_NEAR(constants[i] / constants[i - 1], 1.0, 0.02);
  }
}

TEST(StepAssociation, ZeroRateNeverJumps) {
  const AssociationProcess proc{5, 0.0, 3};
  for (double u : {0.0, 0.2, 0.5, 0.999}) {
    EXPECT_EQ(step_association(proc, 0.01, u), 3);
    EXPECT_EQ(step_association(proc, 10.0, u), 3);
  }
}

TEST(StepAssociation, SymmetricChainOccupancyIsUniform) {
  AssociationProcess proc{5, 1.0, 0};
  RandomStream rng(5, stream_entity(StreamKind::kAssociation));
  std::vector<long> counts(5, 0);
  const long steps = 1000000;
  for (long k = 0; k < steps; ++k) {
    proc.current = step_association(proc, 0.1, rng.uniform());
    ++counts[proc.current];
  }
  for (long c : counts) EXPECT_NEAR(static_cast<double>(c) / steps, 0.2, 0.2 * 0.02);
}

TEST(StepAssociation, TwoStateHoldingTimeIsInverseRate) {
  const double rate = 2.0;
  const double dt = 1e-3;
  AssociationProcess proc{2, rate, 1};
  RandomStream rng(9, stream_entity(StreamKind::kAssociation));
  long holds = 0;
  long held_steps = 0;
  long run = 0;
  for (long k = 0; k < 4000000; ++k) {
    const int next = step_association(proc, dt, rng.uniform());
    ++run;
    if (next != proc.current) {
      ++holds;
      held_steps += run;
      run = 0;
    }
    proc.current = next;
  }
  const double mean_hold = held_steps * dt / holds;
  EXPECT_NEAR(mean_hold * rate, 1.0, 0.05);
}

TEST(StepAssociation, LargeStepsAreSubsteppedInClosedForm) {
  const AssociationProcess proc{2, 1.0, 1};
  // Three sub-steps leaving with q = 1/3 each: the deviation from 1/2 contracts by 1/3 per sub-step.
  EXPECT_NEAR(association_stay_probability(proc, 1.0), 0.5 + 0.5 / 27.0, 1e-15);
  EXPECT_NEAR(association_stay_probability(proc, 0.1), 0.9, 1e-15);
}

TEST(AssociationProcess, IntensityRowsSumToZero) {
  const AssociationProcess proc{5, 2.0, 0};
  const Matrix q = proc.intensity();
  for (Eigen::Index i = 0; i < 5; ++i) {
    EXPECT_NEAR(q.row(i).sum(), 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(q(i, i), -2.0);
    for (Eigen::Index j = 0; j < 5; ++j) {
      if (j != i) EXPECT_DOUBLE_EQ(q(i, j), 0.5);
    }
  }
  EXPECT_DOUBLE_EQ((AssociationProcess{2, 3.0, 0}.intensity())(0, 1), 3.0);
}

TEST(EmitMeasurements, SingleTargetIndicatorWithoutNoise) {
  TargetModel m = zero_model(1, 0.0);
  m.obs_map = [](const Vector& x) { return 2.0 * x[0]; };
  m.obs_noise = 1e-300;
  TruthState truth{0.0, {Vector::Constant(1, 1.5)}, 1};
  const std::vector<TargetModel> models{m};
  const MeasurementBatch batch = emit_measurements(models, truth, 0.01, Vector::Zero(2));
  ASSERT_EQ(batch.channels.size(), 2);
  EXPECT_DOUBLE_EQ(batch.channels[0], 3.0 * 0.01);
  EXPECT_EQ(batch.channels[1], 0.0);
}

TEST(EmitMeasurements, TwoTargetPermutationSwapsChannels) {
  TargetModel m = zero_model(1, 0.0);
  m.obs_noise = 1e-300;
  TruthState truth{0.0, {Vector::Constant(1, 1.0), Vector::Constant(1, -4.0)}, 2};
  const std::vector<TargetModel> models{m, m};
  const MeasurementBatch swapped = emit_measurements(models, truth, 0.5, Vector::Zero(2));
  EXPECT_DOUBLE_EQ(swapped.channels[0], -2.0);
  EXPECT_DOUBLE_EQ(swapped.channels[1], 0.5);
  truth.association = 1;
  const MeasurementBatch straight = emit_measurements(models, truth, 0.5, Vector::Zero(2));
  EXPECT_DOUBLE_EQ(straight.channels[0], 0.5);
  EXPECT_DOUBLE_EQ(straight.channels[1], -2.0);
}

TEST(EmitMeasurements, UndetectedChannelsArePureNoise) {
  const TargetModel m = zero_model(1, 0.0);
  TruthState truth{0.0, {Vector::Constant(1, 3.0)}, 0};
  const std::vector<TargetModel> models{m};
  RandomStream rng(3, stream_entity(StreamKind::kMeasurement));
  const double dt = 0.01;
  const int n = 100000;
  Vector sum = Vector::Zero(3);
  Vector sq = Vector::Zero(3);
  for (int i = 0; i < n; ++i) {
    const Vector dz = emit_measurements(models, truth, dt, rng.normals(3)).channels;
    sum += dz;
    sq += dz.cwiseProduct(dz);
  }
  for (Eigen::Index c = 0; c < 3; ++c) {
    EXPECT_NEAR(sum[c] / n, 0.0, 4.0 * std::sqrt(dt / n));
    EXPECT_NEAR(sq[c] / n / dt, 1.0, 0.05);
  }
}

TEST(EmitMeasurements, UniformClutterAddsToOffChannels) {
  TargetModel m = zero_model(1, 0.0);
  m.obs_noise = 1e-300;
  TruthState truth{0.0, {Vector::Constant(1, 1.0)}, 2};
  const std::vector<TargetModel> models{m};
  const std::vector<double> clutter{4.0, 9.0, -1.0};
  const MeasurementBatch batch = emit_measurements(models, truth, 0.1, Vector::Zero(3), clutter);
  EXPECT_DOUBLE_EQ(batch.channels[0], 0.4);
  EXPECT_DOUBLE_EQ(batch.channels[1], 0.1);
  EXPECT_DOUBLE_EQ(batch.channels[2], -0.1);
}

TEST(RandomStream, SameKeyReproducesAndKeysDiffer) {
  RandomStream a(42, stream_entity(StreamKind::kParticleNoise, 3));
  RandomStream b(42, stream_entity(StreamKind::kParticleNoise, 3));
  RandomStream c(42, stream_entity(StreamKind::kParticleNoise, 4));
  const Vector va = a.normals(64);
  EXPECT_EQ(va, b.normals(64));
  EXPECT_NE(va, c.normals(64));
}

TEST(RandomStream, SingularCovarianceSamplesStayOnSubspace) {
  RandomStream rng(1, 1);
  const Matrix cov = (Matrix(2, 2) << 1.0, 1.0, 1.0, 1.0).finished();
  const Matrix s = sample_gaussian(Vector::Zero(2), cov, 1000, rng);
  EXPECT_LT((s.row(0) - s.row(1)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TargetModel, ValidateRejectsBadNoise) {
  TargetModel m = zero_model(1, 1.0);
  m.obs_noise = 0.0;
  EXPECT_THROW(m.validate(), ConfigError);
  m = zero_model(1, -1.0);
  EXPECT_THROW(m.validate(), ConfigError);
}

}  // namespace
}  // namespace pdafpf
