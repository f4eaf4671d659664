#pragma once

#include <cstdint>
#include <random>

#include "pdafpf/types.hpp"

namespace pdafpf {

/// Entities that own an independent random stream within one run.
enum class StreamKind : std::uint32_t {
  kTruthInit = 1,
  kTruthDynamics = 2,
  kAssociation = 3,
  kMeasurement = 4,
  kClutter = 5,
  kParticleInit = 6,
  kParticleNoise = 7,
};

/// Packs (kind, index) into the entity half of a stream key.
constexpr std::uint64_t stream_entity(StreamKind kind, std::uint32_t index = 0) {
  return (static_cast<std::uint64_t>(kind) << 32) | index;
}

/// A deterministic random stream addressed by (run seed, entity). Two
/// streams with different keys are statistically independent; the same key
/// always reproduces the same sequence.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t entity);

  double normal() { return normal_(engine_); }
  /// Uniform on [0, 1).
  double uniform() { return uniform_(engine_); }
  double uniform(double lower, double upper) { return lower + (upper - lower) * uniform(); }

  Vector normals(Eigen::Index n);
  /// Fills `out` column by column with standard normal draws.
  void fill_normals(Matrix& out);

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Draws `count` samples from N(mean, cov) as the columns of a d x count
/// matrix. `cov` may be singular (PSD); a symmetric eigen square root is used.
Matrix sample_gaussian(const Vector& mean, const Matrix& cov, Eigen::Index count,
                       RandomStream& stream);

}  // namespace pdafpf
