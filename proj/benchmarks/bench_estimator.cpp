#include <benchmark/benchmark.h>

#include "hdmed/censoring.hpp"
#include "hdmed/nuisance.hpp"
#include "hdmed/simulation.hpp"
#include "hdmed/stabilized.hpp"

using namespace hdmed;

namespace {

Dataset sample(std::size_t n, std::size_t p) {
  SimulationSpec spec;
  spec.model = Model::M1;
  spec.n = n;
  spec.p = p;
  const Dataset raw = generate(spec, 7, 0.3);
  return random_ordering(standardize_mediators(raw, Standardization::normal_score), 8);
}

}  // namespace

static void BM_CensoringFit(benchmark::State& state) {
  const Dataset d = sample(static_cast<std::size_t>(state.range(0)), 11);
  for (auto _ : state) {
    auto cf = fit_censoring(d);
    benchmark::DoNotOptimize(cf);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

static void BM_ReciprocalOdds(benchmark::State& state) {
  const Dataset d = sample(static_cast<std::size_t>(state.range(0)), 11);
  for (auto _ : state) {
    auto fit = fit_reciprocal_odds(d, d.n(), 0);
    benchmark::DoNotOptimize(fit);
  }
}

// Advancing the running moments one row at a time over the whole sample.
static void BM_PrefixStreaming(benchmark::State& state) {
  const Dataset d = sample(800, static_cast<std::size_t>(state.range(0)));
  const auto cf = fit_censoring(d);
  for (auto _ : state) {
    PrefixMoments mom(d, cf->responses.y, false);
    for (std::size_t j = 1; j <= d.n(); ++j) mom.advance_to(j);
    benchmark::DoNotOptimize(mom.ksv_slope(0));
  }
  state.SetItemsProcessed(state.iterations() * 800 * state.range(0));
}

static void BM_AssembleNuisance(benchmark::State& state) {
  const Dataset d = sample(800, static_cast<std::size_t>(state.range(0)));
  const auto cf = fit_censoring(d);
  for (auto _ : state) {
    auto ns = assemble_nuisance(d, 640, cf);
    benchmark::DoNotOptimize(ns.psi());
  }
}

static void BM_StabilizedOrdering(benchmark::State& state) {
  const Dataset d = sample(800, static_cast<std::size_t>(state.range(0)));
  StabilizedConfig cfg;
  cfg.scope = state.range(1) ? NuisanceScope::full : NuisanceScope::appendix;
  for (auto _ : state) {
    auto est = stabilized_one_step(d, 640, cfg);
    benchmark::DoNotOptimize(est.s_star);
  }
}

BENCHMARK(BM_CensoringFit)->Arg(200)->Arg(800)->Arg(3200);
BENCHMARK(BM_ReciprocalOdds)->Arg(200)->Arg(800)->Arg(3200);
BENCHMARK(BM_PrefixStreaming)->Arg(100)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AssembleNuisance)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StabilizedOrdering)
    ->Args({100, 0})
    ->Args({1000, 0})
    ->Args({10000, 0})
    ->Args({1000, 1})
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
