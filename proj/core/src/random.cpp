#include "pdafpf/random.hpp"

#include <array>

#include "pdafpf/errors.hpp"

namespace pdafpf {

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t entity) {
  const std::array<std::uint32_t, 4> words{
      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
      static_cast<std::uint32_t>(entity), static_cast<std::uint32_t>(entity >> 32)};
  std::seed_seq seq(words.begin(), words.end());
  engine_.seed(seq);
}

Vector RandomStream::normals(Eigen::Index n) {
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out[i] = normal();
  return out;
}

void RandomStream::fill_normals(Matrix& out) {
  // Column-major storage: consecutive draws fill one particle at a time.
  double* data = out.data();
  for (Eigen::Index i = 0, n = out.size(); i < n; ++i) data[i] = normal();
}

Matrix sample_gaussian(const Vector& mean, const Matrix& cov, Eigen::Index count,
                       RandomStream& stream) {
  const Eigen::Index d = mean.size();
  if (cov.rows() != d || cov.cols() != d) {
    throw ConfigError("sample_gaussian: covariance must be " + std::to_string(d) + "x" +
                      std::to_string(d));
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (cov + cov.transpose()));
  if (eig.info() != Eigen::Success || eig.eigenvalues().minCoeff() < -1e-12) {
    throw ConfigError("sample_gaussian: covariance is not positive semidefinite");
  }
  const Matrix root = eig.eigenvectors() *
                      eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                      eig.eigenvectors().transpose();
  Matrix draws(d, count);
  stream.fill_normals(draws);
  return (root * draws).colwise() + mean;
}

}  // namespace pdafpf
