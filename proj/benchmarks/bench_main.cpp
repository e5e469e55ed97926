#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "htq/diffusion.hpp"
#include "htq/distributions.hpp"
#include "htq/regulator.hpp"
#include "htq/simulator.hpp"

namespace {

htq::SystemConfig mm1m(int n) {
  htq::SystemConfig cfg;
  cfg.n = n;
  cfg.lambda = 1.0;
  cfg.theta = 0.0;
  cfg.patience = htq::unscaled_patience(htq::DistributionSpec::exponential(1.0));
  return cfg;
}

htq::SystemConfig hazard_linear(int n) {
  htq::SystemConfig cfg;
  cfg.n = n;
  cfg.lambda = 1.0;
  cfg.theta = 1.0;
  cfg.service = htq::DistributionSpec::erlang(2, 2.0);
  cfg.patience = htq::HazardScaledPatience{htq::HazardFunction::linear(1.0)};
  return cfg;
}

// Arrivals per second through the full replication loop.
void BM_ReplicationUnscaled(benchmark::State& state) {
  const auto cfg = mm1m(static_cast<int>(state.range(0)));
  htq::RunOptions opt;
  opt.horizon = 1'000'000;
  opt.burn_in = 100'000;
  opt.sample_stride = 100;
  std::uint64_t seed = 1;
  for (auto _ : state) {
    opt.seed = seed++;
    benchmark::DoNotOptimize(htq::run_replication(cfg, opt));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * opt.horizon));
}
BENCHMARK(BM_ReplicationUnscaled)->Arg(25)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_ReplicationHazard(benchmark::State& state) {
  const auto cfg = hazard_linear(static_cast<int>(state.range(0)));
  htq::RunOptions opt;
  opt.horizon = 1'000'000;
  opt.burn_in = 100'000;
  opt.sample_stride = 100;
  std::uint64_t seed = 1;
  for (auto _ : state) {
    opt.seed = seed++;
    benchmark::DoNotOptimize(htq::run_replication(cfg, opt));
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * opt.horizon));
}
BENCHMARK(BM_ReplicationHazard)->Arg(25)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_ScaledPatienceSampler(benchmark::State& state) {
  const htq::HazardFunction h = state.range(0) == 0
                                    ? htq::HazardFunction::linear(1.0)
                                    : htq::HazardFunction::polynomial({0.5, 0.0, 1.0});
  htq::RandomStream rng(3, 0, htq::StreamId::Patience);
  for (auto _ : state) benchmark::DoNotOptimize(htq::scaled_patience_sampler(h, 400, rng));
}
BENCHMARK(BM_ScaledPatienceSampler)->Arg(0)->Arg(1);

void BM_StationaryDensity(benchmark::State& state) {
  htq::DiffusionSpec spec;
  spec.theta = 1.0;
  spec.sigma2 = 1.5;
  spec.drift = state.range(0) == 0 ? htq::DriftMode{htq::LinearRou{1.0}}
                                   : htq::DriftMode{htq::NonlinearHazard{htq::HazardFunction::linear(1.0)}};
  for (auto _ : state) benchmark::DoNotOptimize(htq::stationary_density(spec));
}
BENCHMARK(BM_StationaryDensity)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_ApplyRegulator(benchmark::State& state) {
  const double dt = 1.0 / static_cast<double>(state.range(0));
  std::vector<double> t;
  std::vector<double> y;
  for (int k = 0; k <= 100; ++k) {
    t.push_back(0.1 * k);
    y.push_back(std::sin(1.3 * k) - 0.02 * k);
  }
  const htq::PathRecord path(t, y, htq::Interpolation::Linear);
  const auto h = htq::HazardFunction::linear(1.0);
  for (auto _ : state) benchmark::DoNotOptimize(htq::apply_regulator(path, h, dt));
}
BENCHMARK(BM_ApplyRegulator)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
