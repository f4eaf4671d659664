#include "pdafpf/harness.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>

#include "pdafpf/association.hpp"
#include "pdafpf/errors.hpp"
#include "pdafpf/random.hpp"
#include "pdafpf/reference.hpp"

namespace pdafpf {

namespace {

struct StepContext {
  long step = 0;
  double time = 0.0;
  std::string entity = "truth";
};

[[noreturn]] void rethrow_annotated(const StepContext& ctx) {
  std::ostringstream prefix;
  prefix << "step " << ctx.step << " (t=" << ctx.time << "), " << ctx.entity << ": ";
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(prefix.str() + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix.str() + e.what());
  } catch (const IoError& e) {
    throw IoError(prefix.str() + e.what());
  }
}

Vector initial_truth(const TargetSpec& spec, RandomStream& stream) {
  if (spec.initial) return *spec.initial;
  return sample_gaussian(spec.prior_mean, spec.prior_cov, 1, stream).col(0);
}

IntegralGainOptions gain_options(const ScenarioConfig& config) {
  IntegralGainOptions options;
  options.bandwidth = config.bandwidth;
  return options;
}

void append(std::vector<double>& row, const Vector& v) {
  row.insert(row.end(), v.data(), v.data() + v.size());
}

Vector ensemble_mean(const ParticleEnsemble& ens) { return ens.states.rowwise().mean(); }

void note(RunDiagnostics& diag, const BeliefStepInfo& info) {
  diag.projections.push_back(info.projection);
  diag.max_substeps = std::max(diag.max_substeps, info.substeps);
}

struct Streams {
  Streams(std::uint64_t seed, std::uint32_t targets)
      : association(seed, stream_entity(StreamKind::kAssociation)),
        measurement(seed, stream_entity(StreamKind::kMeasurement)),
        clutter(seed, stream_entity(StreamKind::kClutter)) {
    for (std::uint32_t n = 0; n < targets; ++n) {
      truth_init.emplace_back(seed, stream_entity(StreamKind::kTruthInit, n));
      truth_dynamics.emplace_back(seed, stream_entity(StreamKind::kTruthDynamics, n));
      particle_init.emplace_back(seed, stream_entity(StreamKind::kParticleInit, n));
      particle_noise.emplace_back(seed, stream_entity(StreamKind::kParticleNoise, n));
    }
  }
  RandomStream association;
  RandomStream measurement;
  RandomStream clutter;
  std::vector<RandomStream> truth_init;
  std::vector<RandomStream> truth_dynamics;
  std::vector<RandomStream> particle_init;
  std::vector<RandomStream> particle_noise;
};

RunRecord run_single_target(const ScenarioConfig& config) {
  const TargetModel model = build_model(config.model);
  const Eigen::Index d = model.dim();
  const Eigen::Index M = config.channels;
  const double dt = config.dt;
  const double sigma = model.obs_noise;
  const long steps = config.steps();
  const TargetSpec& target = config.targets[0];

  RunRecord record;
  record.config = config;
  record.columns = record_columns(config);
  record.rows.reserve(static_cast<std::size_t>(steps));

  Streams streams(config.seed, 1);
  TruthState truth;
  truth.targets = {initial_truth(target, streams.truth_init[0])};
  // Chain index i is association label i, or i + 1 when state 0 is excluded.
  const int offset = config.always_detected ? 1 : 0;
  const int chain_states = static_cast<int>(M) + 1 - offset;
  const double chain_rate =
      config.rate * static_cast<double>(chain_states - 1) / static_cast<double>(M);
  AssociationProcess chain{chain_states, chain_rate, 0};
  chain.current = config.initial_association
                      ? *config.initial_association - offset
                      : std::min(chain_states - 1,
                                 static_cast<int>(streams.association.uniform() * chain_states));
  truth.association = chain.current + offset;

  ParticleEnsemble ens = ParticleEnsemble::sample(target.prior_mean, target.prior_cov, config.particles,
                                                  streams.particle_init[0]);
  AssociationBelief belief = AssociationBelief::uniform(M);
  if (!config.initial_belief.empty()) {
    belief.beta = Eigen::Map<const Vector>(config.initial_belief.data(), M + 1);
  }
  if (config.association == AssociationMode::kKnown) belief = AssociationBelief::certain(M, chain.current);

  std::optional<KalmanState> kalman;
  if (config.oracles.kalman) kalman = KalmanState{target.prior_mean, target.prior_cov};
  std::optional<GridDensity> grid;
  if (config.oracles.grid) {
    grid = GridDensity::around_gaussian(target.prior_mean[0], target.prior_cov(0, 0), config.grid_cells);
  }
  std::optional<Vector> wonham;
  if (config.oracles.wonham) wonham = belief.beta;
  std::optional<AssociationBelief> bayes;
  if (config.oracles.bayes) bayes = belief;

  ClutterLikelihood clutter_likelihood;
  if (config.clutter.model == ClutterModel::kUniform) {
    clutter_likelihood.kind = ClutterLikelihood::Kind::kUniformVolume;
    clutter_likelihood.volume = config.clutter.volume * dt;
  }

  const std::vector<TargetModel> models{model};
  const IntegralGainOptions options = gain_options(config);
  const Matrix intensity = AssociationProcess{static_cast<int>(M + 1), config.rate, 0}.intensity();
  Matrix noise(d, config.particles);
  std::vector<double> clutter_points;
  GainField gain;
  StepContext ctx;

  for (long k = 0; k < steps; ++k) {
    ctx.step = k;
    ctx.time = static_cast<double>(k) * dt;
    try {
      ctx.entity = "measurements";
      truth.time = ctx.time;
      if (config.clutter.model == ClutterModel::kUniform) {
        clutter_points.resize(static_cast<std::size_t>(M));
        const double half = 0.5 * config.clutter.volume;
        for (double& p : clutter_points) {
          p = streams.clutter.uniform(config.clutter.center - half, config.clutter.center + half);
        }
      }
      const MeasurementBatch batch =
          emit_measurements(models, truth, dt, streams.measurement.normals(M), clutter_points);

      ctx.entity = "target 1";
      const MomentEstimates moments = estimate_moments(ens, model.obs_map);
      if (k % config.gain_stride == 0) {
        gain = compute_gain(config.gain, ens, model, moments, options);
        if (gain.degenerate()) ++record.diagnostics.degenerate_gains;
      }

      ctx.entity = "association filter";
      AssociationBelief used = belief;
      if (config.association == AssociationMode::kKnown) {
        used = AssociationBelief::certain(M, truth.association);
      } else if (config.association == AssociationMode::kBayes) {
        const BayesStepResult res = beta_bayes_step(beta_predict(belief, config.rate, dt), ens, batch, dt,
                                                    clutter_likelihood, sigma, model.obs_map);
        if (res.underflow) ++record.diagnostics.bayes_underflows;
        record.diagnostics.projections.push_back(0.0);
        used = res.belief;
      }

      ctx.entity = "target 1";
      streams.particle_noise[0].fill_normals(noise);
      ParticleEnsemble next = fpf_step(ens, model, used, gain, batch, dt, noise, {config.threads});

      if (kalman) {
        ctx.entity = "kalman oracle";
        kalman = truth.association == 0
                     ? kalman_bucy_predict(*kalman, model, dt)
                     : kalman_bucy_step(*kalman, model, batch.channels[truth.association - 1], dt);
      }
      if (grid) {
        ctx.entity = "grid oracle";
        const GridStepResult res = ks_grid_step(*grid, model, used, batch, dt);
        record.diagnostics.max_grid_drift = std::max(record.diagnostics.max_grid_drift, res.normalization_drift);
        grid = res.density;
      }
      if (wonham) {
        ctx.entity = "wonham oracle";
        const Matrix signals = pda_signals(model.obs_map(truth.targets[0]), M);
        const WonhamStepResult res = wonham_step(*wonham, signals, batch, intensity, dt, sigma);
        note(record.diagnostics, res.info);
        wonham = res.posterior;
      }
      if (bayes) {
        ctx.entity = "bayes oracle";
        const BayesStepResult res = beta_bayes_step(beta_predict(*bayes, config.rate, dt), ens, batch, dt,
                                                    clutter_likelihood, sigma, model.obs_map);
        if (res.underflow) ++record.diagnostics.bayes_underflows;
        bayes = res.belief;
      }

      ctx.entity = "association filter";
      if (config.association == AssociationMode::kSde) {
        const BetaStepResult res = beta_sde_step(belief, moments, batch, config.rate, dt, sigma);
        note(record.diagnostics, res.info);
        belief = res.belief;
      } else {
        belief = used;
      }
      ens = std::move(next);

      ctx.entity = "truth";
      truth.targets[0] = step_truth(model, truth.targets[0], dt, streams.truth_dynamics[0].normals(d));
      chain.current = step_association(chain, dt, streams.association.uniform());
      truth.association = chain.current + offset;

      std::vector<double> row;
      row.reserve(record.columns.size());
      row.push_back(static_cast<double>(k + 1) * dt);
      append(row, truth.targets[0]);
      append(row, batch.channels);
      append(row, ensemble_mean(ens));
      append(row, belief.beta);
      if (kalman) append(row, kalman->mean);
      if (grid) {
        row.push_back(grid->mean());
        row.push_back(grid->variance());
      }
      if (wonham) append(row, *wonham);
      if (bayes) append(row, bayes->beta);
      record.rows.push_back(std::move(row));
      record.associations.push_back(truth.association);
    } catch (const Error&) {
      rethrow_annotated(ctx);
    }
  }
  return record;
}

RunRecord run_two_target(const ScenarioConfig& config) {
  const TargetModel model = build_model(config.model);
  const Eigen::Index d = model.dim();
  const double dt = config.dt;
  const double sigma = model.obs_noise;
  const long steps = config.steps();

  RunRecord record;
  record.config = config;
  record.columns = record_columns(config);
  record.rows.reserve(static_cast<std::size_t>(steps));

  Streams streams(config.seed, 2);
  TruthState truth;
  truth.targets = {initial_truth(config.targets[0], streams.truth_init[0]),
                   initial_truth(config.targets[1], streams.truth_init[1])};
  AssociationProcess chain{2, config.rate, 0};
  chain.current = config.initial_association ? *config.initial_association - 1
                                             : (streams.association.uniform() < 0.5 ? 0 : 1);
  truth.association = chain.current + 1;

  std::vector<ParticleEnsemble> ens;
  for (std::size_t n = 0; n < 2; ++n) {
    ens.push_back(ParticleEnsemble::sample(config.targets[n].prior_mean, config.targets[n].prior_cov,
                                           config.particles, streams.particle_init[n]));
  }
  JointAssociationBelief belief;
  if (!config.initial_belief.empty()) belief = {config.initial_belief[0], config.initial_belief[1]};

  auto known = [](int label) {
    return label == 1 ? JointAssociationBelief{1.0, 0.0} : JointAssociationBelief{0.0, 1.0};
  };
  if (config.association == AssociationMode::kKnown) belief = known(truth.association);

  std::vector<KalmanState> kalman;
  if (config.oracles.kalman) {
    for (const TargetSpec& t : config.targets) kalman.push_back({t.prior_mean, t.prior_cov});
  }
  std::optional<Vector> wonham;
  if (config.oracles.wonham) {
    wonham = Vector(2);
    *wonham << belief.pi1, belief.pi2;
  }
  std::optional<JointAssociationBelief> bayes;
  if (config.oracles.bayes) bayes = belief;

  const std::vector<TargetModel> models{model, model};
  const IntegralGainOptions options = gain_options(config);
  const Matrix intensity = chain.intensity();
  Matrix noise(d, config.particles);
  std::vector<GainField> gains(2);
  StepContext ctx;

  for (long k = 0; k < steps; ++k) {
    ctx.step = k;
    ctx.time = static_cast<double>(k) * dt;
    try {
      ctx.entity = "measurements";
      truth.time = ctx.time;
      const MeasurementBatch batch = emit_measurements(models, truth, dt, streams.measurement.normals(2));

      std::vector<MomentEstimates> moments;
      for (std::size_t n = 0; n < 2; ++n) {
        ctx.entity = "target " + std::to_string(n + 1);
        moments.push_back(estimate_moments(ens[n], model.obs_map));
        if (k % config.gain_stride == 0) {
          gains[n] = compute_gain(config.gain, ens[n], model, moments[n], options);
          if (gains[n].degenerate()) ++record.diagnostics.degenerate_gains;
        }
      }

      ctx.entity = "association filter";
      JointAssociationBelief used = belief;
      if (config.association == AssociationMode::kKnown) {
        used = known(truth.association);
      } else if (config.association == AssociationMode::kBayes) {
        const JointBayesStepResult res =
            pi_bayes_step(pi_predict(belief, config.rate, dt), ens[0], ens[1], batch, dt, sigma, model.obs_map);
        if (res.underflow) ++record.diagnostics.bayes_underflows;
        record.diagnostics.projections.push_back(0.0);
        used = res.belief;
      }

      std::vector<ParticleEnsemble> next;
      for (std::size_t n = 0; n < 2; ++n) {
        ctx.entity = "target " + std::to_string(n + 1);
        streams.particle_noise[n].fill_normals(noise);
        next.push_back(fpf_step(ens[n], model, marginals_from_joint(used, static_cast<int>(n) + 1), gains[n],
                                batch, dt, noise, {config.threads}));
      }

      for (std::size_t n = 0; n < kalman.size(); ++n) {
        ctx.entity = "kalman oracle, target " + std::to_string(n + 1);
        // Target 1 is seen on channel 1 under association 1 and on channel 2 under association 2.
        const bool swapped = truth.association == 2;
        const Eigen::Index channel = (n == 0) == !swapped ? 0 : 1;
        kalman[n] = kalman_bucy_step(kalman[n], model, batch.channels[channel], dt);
      }
      if (wonham) {
        ctx.entity = "wonham oracle";
        const Matrix signals = jpda_signals(model.obs_map(truth.targets[0]), model.obs_map(truth.targets[1]));
        const WonhamStepResult res = wonham_step(*wonham, signals, batch, intensity, dt, sigma);
        note(record.diagnostics, res.info);
        wonham = res.posterior;
      }
      if (bayes) {
        ctx.entity = "bayes oracle";
        const JointBayesStepResult res =
            pi_bayes_step(pi_predict(*bayes, config.rate, dt), ens[0], ens[1], batch, dt, sigma, model.obs_map);
        if (res.underflow) ++record.diagnostics.bayes_underflows;
        bayes = res.belief;
      }

      ctx.entity = "association filter";
      if (config.association == AssociationMode::kSde) {
        const JointStepResult res = pi_sde_step(belief, moments[0], moments[1], batch, config.rate, dt, sigma);
        note(record.diagnostics, res.info);
        belief = res.belief;
      } else {
        belief = used;
      }
      ens = std::move(next);

      ctx.entity = "truth";
      for (std::size_t n = 0; n < 2; ++n) {
        truth.targets[n] = step_truth(model, truth.targets[n], dt, streams.truth_dynamics[n].normals(d));
      }
      chain.current = step_association(chain, dt, streams.association.uniform());
      truth.association = chain.current + 1;

      std::vector<double> row;
      row.reserve(record.columns.size());
      row.push_back(static_cast<double>(k + 1) * dt);
      append(row, truth.targets[0]);
      append(row, truth.targets[1]);
      append(row, batch.channels);
      append(row, ensemble_mean(ens[0]));
      append(row, ensemble_mean(ens[1]));
      row.push_back(belief.pi1);
      row.push_back(belief.pi2);
      for (const KalmanState& s : kalman) append(row, s.mean);
      if (wonham) append(row, *wonham);
      if (bayes) {
        row.push_back(bayes->pi1);
        row.push_back(bayes->pi2);
      }
      record.rows.push_back(std::move(row));
      record.associations.push_back(truth.association);
    } catch (const Error&) {
      rethrow_annotated(ctx);
    }
  }
  return record;
}

}  // namespace

double RunDiagnostics::projection_fraction_below(double limit) const {
  if (projections.empty()) return 1.0;
  const auto below = std::count_if(projections.begin(), projections.end(), [&](double p) { return p < limit; });
  return static_cast<double>(below) / static_cast<double>(projections.size());
}

std::size_t RunRecord::column(std::string_view name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw ConfigError("record has no column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

bool RunRecord::has_column(std::string_view name) const {
  return std::find(columns.begin(), columns.end(), name) != columns.end();
}

std::vector<double> RunRecord::series(std::string_view name) const {
  const std::size_t c = column(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row[c]);
  return out;
}

std::vector<std::string> state_names(Eigen::Index dim) {
  if (dim == 1) return {"x"};
  if (dim == 2) return {"pos", "vel"};
  std::vector<std::string> out;
  for (Eigen::Index i = 1; i <= dim; ++i) out.push_back("x" + std::to_string(i));
  return out;
}

std::vector<std::string> record_columns(const ScenarioConfig& config) {
  const auto names = state_names(config.model.diffusion.size());
  std::vector<std::string> cols{"time"};
  auto add_state = [&](const std::string& prefix) {
    for (const auto& s : names) cols.push_back(prefix + "_" + s);
  };
  auto add_indexed = [&](const std::string& prefix, int from, int to) {
    for (int i = from; i <= to; ++i) cols.push_back(prefix + "_" + std::to_string(i));
  };

  if (config.two_target()) {
    add_state("truth1");
    add_state("truth2");
    add_indexed("meas", 1, 2);
    add_state("est1");
    add_state("est2");
    add_indexed("pi", 1, 2);
    if (config.oracles.kalman) {
      add_state("kalman1");
      add_state("kalman2");
    }
    if (config.oracles.wonham) add_indexed("wonham", 1, 2);
    if (config.oracles.bayes) add_indexed("bayes_pi", 1, 2);
    return cols;
  }

  add_state("truth");
  add_indexed("meas", 1, config.channels);
  add_state("est");
  add_indexed("beta", 0, config.channels);
  if (config.oracles.kalman) add_state("kalman");
  if (config.oracles.grid) {
    cols.push_back("grid_mean");
    cols.push_back("grid_var");
  }
  if (config.oracles.wonham) add_indexed("wonham", 0, config.channels);
  if (config.oracles.bayes) add_indexed("bayes_beta", 0, config.channels);
  return cols;
}

RunRecord run_scenario(const ScenarioConfig& config) {
  config.validate();
  return config.two_target() ? run_two_target(config) : run_single_target(config);
}

std::vector<RunRecord> run_batch(const ScenarioConfig& config, int count) {
  if (count < 1) throw ConfigError("batch count must be >= 1");
  std::vector<RunRecord> out;
  for (int i = 0; i < count; ++i) {
    ScenarioConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(i);
    out.push_back(run_scenario(c));
  }
  return out;
}

}  // namespace pdafpf
