#include <benchmark/benchmark.h>

#include <vector>

#include "pdafpf/association.hpp"
#include "pdafpf/fpf.hpp"
#include "pdafpf/gain.hpp"
#include "pdafpf/random.hpp"
#include "pdafpf/reference.hpp"

namespace {

using namespace pdafpf;

void BM_FpfStep(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const auto threads = static_cast<unsigned>(state.range(1));
  Vector diffusion(2);
  diffusion << 0.0, 1.0;
  const TargetModel model = TargetModel::white_noise_acceleration(diffusion, 0.06);
  RandomStream rng(1, stream_entity(StreamKind::kParticleInit));
  Vector mean(2);
  mean << 0.0, 6.0;
  const ParticleEnsemble ens = ParticleEnsemble::sample(mean, Matrix::Identity(2, 2) * 0.1, n, rng);
  Matrix noise(2, n);
  rng.fill_normals(noise);
  const MomentEstimates moments = estimate_moments(ens, model.obs_map);
  const GainField gain = gain_linear(model.linear->observation, moments.cov, model.obs_noise);
  const AssociationBelief beliefs = AssociationBelief::uniform(4);
  MeasurementBatch batch{0.0, Vector::Constant(4, 0.01)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(fpf_step(ens, model, beliefs, gain, batch, 0.01, noise, {threads}));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_FpfStep)->Args({1000, 1})->Args({10000, 1})->Args({10000, 4});

void BM_GainIntegral1d(benchmark::State& state) {
  RandomStream rng(2, stream_entity(StreamKind::kParticleInit));
  std::vector<double> xs(static_cast<std::size_t>(state.range(0)));
  for (double& x : xs) x = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(gain_integral_1d(xs, [](double x) { return x * x * x; }, 1.0));
  }
}
BENCHMARK(BM_GainIntegral1d)->Arg(1000)->Arg(10000);

void BM_KsGridStep(benchmark::State& state) {
  const TargetModel model = TargetModel::scalar_linear(-0.5, 0.3, 1.0, 0.3);
  GridDensity grid = GridDensity::around_gaussian(0.0, 1.0, static_cast<int>(state.range(0)));
  const AssociationBelief beliefs = AssociationBelief::certain(1, 1);
  MeasurementBatch batch{0.0, Vector::Constant(1, 1e-4)};
  for (auto _ : state) {
    benchmark::DoNotOptimize(ks_grid_step(grid, model, beliefs, batch, 1e-4));
  }
}
BENCHMARK(BM_KsGridStep)->Arg(400)->Arg(1600);

void BM_BetaSdeStep(benchmark::State& state) {
  const auto channels = static_cast<Eigen::Index>(state.range(0));
  MomentEstimates moments{Vector::Constant(1, 1.0), Matrix::Constant(1, 1, 0.1), 1.0, 1.1};
  const AssociationBelief belief = AssociationBelief::uniform(channels);
  RandomStream rng(3, stream_entity(StreamKind::kMeasurement));
  MeasurementBatch batch{0.0, rng.normals(channels) * 0.01};
  for (auto _ : state) {
    benchmark::DoNotOptimize(beta_sde_step(belief, moments, batch, 1.0, 0.01, 0.3));
  }
}
BENCHMARK(BM_BetaSdeStep)->Arg(2)->Arg(4)->Arg(16);

}  // namespace
BENCHMARK_MAIN();
