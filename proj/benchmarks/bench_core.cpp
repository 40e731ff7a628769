#include <benchmark/benchmark.h>

#include "nlheat/lattice.hpp"
#include "nlheat/noise.hpp"
#include "nlheat/profile.hpp"
#include "nlheat/radial_operator.hpp"
#include "nlheat/randomize.hpp"
#include "nlheat/rng.hpp"

using namespace nlheat;

static void BM_HeatStep(benchmark::State& state) {
    auto g = build_radial_grid(3, 20.0, static_cast<int>(state.range(0)), 1.0);
    RadialField f(g);
    for (int j = 0; j < g->n(); ++j) f.values[j] = std::exp(-g->nodes[j] * g->nodes[j]);
    heat_step(f, 0.1); // warm the spectral cache
    for (auto _ : state) benchmark::DoNotOptimize(heat_step(f, 0.1));
}
BENCHMARK(BM_HeatStep)->Arg(1024)->Arg(2048);

static void BM_ProfileIntegration(benchmark::State& state) {
    for (auto _ : state)
        benchmark::DoNotOptimize(integrate_profile(1.0, 3.0, 3, 40.0, 20000));
}
BENCHMARK(BM_ProfileIntegration);

static void BM_SimilaritySpectrum(benchmark::State& state) {
    const ProfileSolution ps = integrate_profile(1.0, 3.0, 3);
    auto grid = build_radial_grid(3, 30.0, static_cast<int>(state.range(0)), 1.0);
    for (auto _ : state) {
        RadialOperator op = similarity_generator(grid, 3.0);
        benchmark::DoNotOptimize(eigen_topk(op, 1));
    }
}
BENCHMARK(BM_SimilaritySpectrum)->Arg(1024)->Arg(2048);

static void BM_WienerIncrement(benchmark::State& state) {
    auto g = build_radial_grid(3, 20.0, 1024, 2.0);
    const NoiseColoring nc = build_noise_coloring(g, 1.8, 1.0, 4.3, 192);
    CounterRng rng(7, 0);
    for (auto _ : state) benchmark::DoNotOptimize(sample_wiener_increment(nc, 1e-3, rng));
}
BENCHMARK(BM_WienerIncrement);

static void BM_Randomize(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    LatticeField u0 = LatticeField::zeros(3, 12.0, n);
    std::array<int, 3> m;
    for (std::size_t i = 0; i < u0.size(); ++i) {
        unravel(u0, i, m);
        double xi2 = 0.0;
        bool nyq = false;
        for (int ax = 0; ax < 3; ++ax) {
            if (m[ax] == -n / 2) nyq = true;
            const double xi = m[ax] * M_PI / u0.L;
            xi2 += xi * xi;
        }
        if (!nyq && xi2 < 36.0) u0.spec[i] = Cplx(std::exp(-xi2 / 4.0), 0.0);
    }
    const BlockPartition bp = build_block_partition(3, 8);
    CounterRng rng(13, 0);
    for (auto _ : state) benchmark::DoNotOptimize(randomize(u0, bp, rng));
}
BENCHMARK(BM_Randomize)->Arg(32)->Arg(48);

BENCHMARK_MAIN();
