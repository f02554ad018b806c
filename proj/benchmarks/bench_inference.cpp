#include <benchmark/benchmark.h>

#include <random>

#include "peanoseg/chain.hpp"
#include "peanoseg/estimation.hpp"
#include "peanoseg/models.hpp"
#include "peanoseg/pipeline.hpp"
#include "peanoseg/shapes.hpp"

namespace {

using namespace peanoseg;

HmcParams params() {
  HmcParams p;
  p.classes = 2;
  p.joint_h = Matrix(2, 2, {0.45, 0.05, 0.05, 0.45});
  p.joint_v = Matrix(2, 2, {0.42, 0.08, 0.08, 0.42});
  p.means = {0.0, 1.0};
  p.variances = {1.0, 1.0};
  return p;
}

std::vector<double> noisy(const ScanGeometry& g) {
  const auto truth = shapes::stripes_blocks(g.layout.shape().order);
  const std::vector<double> means = {0.0, 1.0}, vars = {1.0, 1.0};
  const auto obs = synth_noise(truth, means, vars, 1);
  return g.layout.to_scan_order<double>(obs.values);
}

void BM_BuildScan(benchmark::State& state) {
  const auto order = static_cast<unsigned>(state.range(0));
  for (auto _ : state) {
    auto layout = build_scan(order);
    auto context = build_context(layout);
    benchmark::DoNotOptimize(context.total_extras());
  }
  state.SetItemsProcessed(state.iterations() * (std::int64_t{1} << (2 * order)));
}
BENCHMARK(BM_BuildScan)->DenseRange(6, 9);

void BM_ChainFromPotentials(benchmark::State& state) {
  const auto order = static_cast<unsigned>(state.range(0));
  const auto g = ScanGeometry::of_order(order);
  const auto chain = build_hmc_cps(params(), noisy(g), g.layout, g.context);
  for (auto _ : state) {
    auto post = chain_from_potentials(chain);
    benchmark::DoNotOptimize(post.log_normalizer());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.layout.size()));
}
BENCHMARK(BM_ChainFromPotentials)->DenseRange(6, 9)->Unit(benchmark::kMicrosecond);

void BM_BuildModel(benchmark::State& state) {
  const auto order = static_cast<unsigned>(state.range(0));
  const auto method = static_cast<Method>(state.range(1));
  const auto g = ScanGeometry::of_order(order);
  const auto y = noisy(g);
  const auto p = params();
  const auto e = embed_in_evidential(p);
  for (auto _ : state) {
    PotentialChain chain;
    switch (method) {
      case Method::kHmcPs: chain = build_hmc_ps(p, y, g.layout); break;
      case Method::kHmcCps: chain = build_hmc_cps(p, y, g.layout, g.context); break;
      case Method::kHemcCps: chain = build_hemc_cps(e, y, g.layout, g.context); break;
    }
    benchmark::DoNotOptimize(chain.step_block(0).data());
  }
  state.SetLabel(std::string(to_string(method)));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.layout.size()));
}
BENCHMARK(BM_BuildModel)->ArgsProduct({{7, 8}, {0, 1, 2}})->Unit(benchmark::kMicrosecond);

void BM_SemStep(benchmark::State& state) {
  const auto order = static_cast<unsigned>(state.range(0));
  const bool evidential = state.range(1) != 0;
  const auto g = ScanGeometry::of_order(order);
  const auto y = noisy(g);
  auto p = params();
  auto e = embed_with_omega(p, kDefaultOmegaMass);
  Rng rng(3);
  for (auto _ : state) {
    if (evidential) {
      e = sem_step_evidential(e, y, g.layout, &g.context, rng);
    } else {
      p = sem_step_hmc(p, y, g.layout, &g.context, rng);
    }
  }
  state.SetLabel(evidential ? "hemc-cps" : "hmc-cps");
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(g.layout.size()));
}
BENCHMARK(BM_SemStep)->ArgsProduct({{6, 7, 8}, {0, 1}})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
