#pragma once

#include "pdafpf/belief.hpp"
#include "pdafpf/fpf.hpp"
#include "pdafpf/models.hpp"

namespace pdafpf {

/// Adaptive sub-stepping of the association SDEs. A step is halved (with
/// dt and every dZ^m split evenly) while its increment exceeds
/// `max_increment` in any component or would leave [0, 1]; at most
/// 2^max_depth sub-steps are taken.
struct SubstepPolicy {
  double max_increment = 0.1;
  int max_depth = 10;
};

struct BeliefStepInfo {
  /// L1 mass moved by the final simplex projection.
  double projection = 0.0;
  /// Number of Euler sub-steps actually taken.
  int substeps = 1;
};

struct BetaStepResult {
  AssociationBelief belief;
  BeliefStepInfo info;
};

struct JointStepResult {
  JointAssociationBelief belief;
  BeliefStepInfo info;
};

/// Clips to [0, 1] and renormalizes. Returns the L1 correction; throws
/// NumericalError if every entry was clipped to zero.
double project_to_simplex(Vector& p);

/// The three terms of the single-target association SDE for m = 1..M (each
/// an M-vector, entry m-1 for channel m), evaluated for one Euler step.
struct BetaSdeTerms {
  Vector prior;
  Vector innovation;
  Vector variance;

  Vector total() const { return prior + innovation + variance; }
};

/// dbeta^m = c/M [1 - (M+1) beta^m] dt
///   + 1/sigma_W^2 beta^m h_mean sum_j beta^j [(dZ^m - beta^m h_mean dt) - (dZ^j - beta^j h_mean dt)]
///   + 1/sigma_W^2 beta^m (h2_mean - h_mean^2) sum_j beta^j (beta^j - beta^m) dt,
/// with sums over j = 1..M.
BetaSdeTerms beta_sde_terms(const AssociationBelief& belief, const MomentEstimates& moments,
                            const Vector& dz, double rate, double dt, double obs_noise);

/// One step of the association SDE above. beta^0 is set to
/// 1 - sum_{m>=1} beta^m before projection.
BetaStepResult beta_sde_step(const AssociationBelief& belief, const MomentEstimates& moments,
                             const MeasurementBatch& batch, double rate, double dt,
                             double obs_noise, const SubstepPolicy& policy = {});

/// Time update of the association chain: each hypothesis keeps its mass with
/// the chain's stay probability and leaks the rest uniformly to the others.
AssociationBelief beta_predict(const AssociationBelief& belief, double rate, double dt);

/// Density of the measurements that do not originate from the target.
struct ClutterLikelihood {
  enum class Kind {
    /// Uniform over a region of measure `volume` (in units of dZ).
    kUniformVolume,
    /// Pure observation noise, N(0, sigma_W^2 dt), as in the continuous model.
    kGaussianNoise,
  };
  Kind kind = Kind::kGaussianNoise;
  double volume = 1.0;
  /// Whether hypothesis 0 ("not detected") takes part in the update. When
  /// false its mass is carried through unchanged and the remaining mass is
  /// redistributed over the detection hypotheses 1..M only.
  bool include_undetected = false;
};

struct BayesStepResult {
  AssociationBelief belief;
  /// Set when every likelihood underflowed and the prior was returned.
  bool underflow = false;
};

/// log of the particle approximation
///   L(dZ) ~ 1/N sum_i N(dZ; h(X^i) dt, sigma_W^2 dt),
/// computed with log-sum-exp. `h_values` holds h(X^i).
double log_particle_likelihood(const Vector& h_values, double dz, double dt, double obs_noise);

/// Bayes rule in the log domain: posterior_m ~ prior_m exp(log_likelihood_m)
/// over hypotheses 0..M. Hypothesis 0 is handled per `include_undetected`.
BayesStepResult bayes_update(const AssociationBelief& prior, const Vector& log_likelihoods,
                             bool include_undetected);

/// Discrete-time association update
///   P(A = m | dZ) ~ P(dZ | A = m) beta^m,
/// P(dZ | A = m) = L(dZ^m) prod_{j != m} clutter(dZ^j).
BayesStepResult beta_bayes_step(const AssociationBelief& belief, const ParticleEnsemble& ens,
                                const MeasurementBatch& batch, double dt,
                                const ClutterLikelihood& clutter, double obs_noise,
                                const ObservationMap& obs_map);

/// Two-target joint association SDE:
///   dpi^1 = -c (pi^1 - pi^2) dt + 1/sigma_W^2 pi^1 pi^2 (h1 - h2)(dmu^1 - dmu^2)
///           - 1/sigma_W^2 pi^1 pi^2 (pi^1 - pi^2) [var h^1 + var h^2] dt,
///   dmu^m = dZ^m - (pi^1 - pi^2) h^m dt,  pi^2 = 1 - pi^1.
JointStepResult pi_sde_step(const JointAssociationBelief& belief, const MomentEstimates& target1,
                            const MomentEstimates& target2, const MeasurementBatch& batch,
                            double rate, double dt, double obs_noise,
                            const SubstepPolicy& policy = {});

/// Raw Euler increment of pi^1 (no sub-stepping, no projection).
double pi_sde_increment(const JointAssociationBelief& belief, const MomentEstimates& target1,
                        const MomentEstimates& target2, const Vector& dz, double rate, double dt,
                        double obs_noise);

JointAssociationBelief pi_predict(const JointAssociationBelief& belief, double rate, double dt);

/// Discrete joint-Bayes update over the two permutation hypotheses, each
/// target's channel likelihood approximated by its own particles.
struct JointBayesStepResult {
  JointAssociationBelief belief;
  bool underflow = false;
};
JointBayesStepResult pi_bayes_step(const JointAssociationBelief& belief,
                                   const ParticleEnsemble& target1, const ParticleEnsemble& target2,
                                   const MeasurementBatch& batch, double dt, double obs_noise,
                                   const ObservationMap& obs_map);

/// Per-target association probabilities from the joint ones:
/// target 1 gets (pi^1, pi^2) on channels (1, 2), target 2 the swap.
/// beta^0 is zero (every target is detected in the two-target model).
AssociationBelief marginals_from_joint(const JointAssociationBelief& belief, int target_index);

/// Channel drifts under each association state for the single-target model
/// with M channels: row k is h e_k (row 0 is zero). Shape (M+1) x M.
Matrix pda_signals(double h, Eigen::Index channels);
/// Two-target channel drifts: row k-1 is Psi(k) [h1; h2]. Shape 2 x 2.
Matrix jpda_signals(double h1, double h2);

struct WonhamStepResult {
  Vector posterior;
  BeliefStepInfo info;
};

/// Euler increment of the Wonham filter
///   dq = Lambda^T q dt + sum_m q .* (g^m - gbar^m) (dZ^m - gbar^m dt) / sigma_W^2,
/// where g^m is column m of `signals` and gbar^m = q . g^m.
Vector wonham_increment(const Vector& posterior, const Matrix& signals, const Vector& dz,
                        const Matrix& intensity, double dt, double obs_noise);

/// Wonham filter step for a Markov chain observed through `signals` (known
/// target states). Sub-stepped and simplex-projected like beta_sde_step.
WonhamStepResult wonham_step(const Vector& posterior, const Matrix& signals,
                             const MeasurementBatch& batch, const Matrix& intensity, double dt,
                             double obs_noise, const SubstepPolicy& policy = {});

}  // namespace pdafpf
