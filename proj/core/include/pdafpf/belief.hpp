#pragma once

#include "pdafpf/types.hpp"

namespace pdafpf {

/// Association probabilities beta^0..beta^M of one target; index 0 is the
/// "not detected" hypothesis.
struct AssociationBelief {
  Vector beta;

  Eigen::Index channels() const { return beta.size() - 1; }
  double operator[](Eigen::Index m) const { return beta[m]; }

  /// beta^m = 1 / (M + 1) for every m.
  static AssociationBelief uniform(Eigen::Index channels);
  /// All mass on hypothesis `m`.
  static AssociationBelief certain(Eigen::Index channels, Eigen::Index m);

  /// Throws ConfigError unless every entry lies in [0, 1] and the entries
  /// sum to one within `tolerance`.
  void validate(double tolerance = 1e-9) const;
};

/// Joint association probabilities (pi^1, pi^2) of the two-target model:
/// pi^1 = P(Z^1 from target 1, Z^2 from target 2), pi^2 the swap.
struct JointAssociationBelief {
  double pi1 = 0.5;
  double pi2 = 0.5;

  void validate(double tolerance = 1e-9) const;
};

}  // namespace pdafpf
