#include "cwp/critical.hpp"
#include "cwp/free_energy.hpp"
#include "cwp/hs_oracle.hpp"
#include "cwp/model.hpp"
#include "cwp/sampler.hpp"
#include "cwp/stein.hpp"

#include <benchmark/benchmark.h>

using namespace cwp;

namespace {

void BM_GibbsSweep(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const ModelParams p{3, 2.0, 0.0, n};
    GibbsChain chain(p, nearest_counts(Eigen::VectorXd::Constant(3, 1.0 / 3), n), 1);
    for (auto _ : state) chain.sweep();
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_GibbsSweep)->Arg(100)->Arg(1000)->Arg(10000);

void BM_ConditionedSweep(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const ModelParams p{3, 3.2, 0.0, n};
    const auto cls = find_minimizers(p.phase());
    const auto region = make_region(cls, 0, 0.4 * (cls.minimizers[0].x - cls.minimizers[1].x).norm());
    GibbsChain chain(p, nearest_counts(region.center, n), 1, 0, region);
    for (auto _ : state) chain.sweep();
    state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_ConditionedSweep)->Arg(1000);

void BM_ExactLaw(benchmark::State& state) {
    const ModelParams p{3, 2.0, 0.0, static_cast<int>(state.range(0))};
    for (auto _ : state) benchmark::DoNotOptimize(exact_law(p));
}
BENCHMARK(BM_ExactLaw)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_StreamedMarginal(benchmark::State& state) {
    const auto k = closed_form_constants(3);
    const ModelParams p{3, k.beta_0, k.h_0, static_cast<int>(state.range(0))};
    for (auto _ : state) benchmark::DoNotOptimize(streamed_first_marginal(p));
}
BENCHMARK(BM_StreamedMarginal)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_PairMoments(benchmark::State& state) {
    const ModelParams p{3, 2.0, 0.0, 256};
    const std::vector<int> counts{90, 86, 80};
    for (auto _ : state) benchmark::DoNotOptimize(pair_moments_exact(p, counts));
}
BENCHMARK(BM_PairMoments);

void BM_FindMinimizers(benchmark::State& state) {
    const auto k = closed_form_constants(3);
    const std::vector<PhasePoint> points = {
        {3, 2.0, 0.0}, {3, k.beta_c, 0.0}, {3, 3.2, 0.0}, critical_line_point(3, 0.2), {3, k.beta_0, k.h_0}};
    const auto& p = points[static_cast<std::size_t>(state.range(0))];
    for (auto _ : state) benchmark::DoNotOptimize(find_minimizers(p));
}
BENCHMARK(BM_FindMinimizers)->DenseRange(0, 4);

void BM_HsDensity(benchmark::State& state) {
    const ModelParams p{3, 2.0, 0.0, 20};
    const auto m = find_minimizers(p.phase()).minimizers.front();
    const auto grid = gaussian_envelope_grid(p.phase(), m, static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(hs_density(p, m.x, 0.5, grid));
}
BENCHMARK(BM_HsDensity)->Arg(31)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
