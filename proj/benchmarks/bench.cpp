#include <cmfkit/cmf.hpp>
#include <cmfkit/ops.hpp>
#include <cmfkit/registration.hpp>
#include <cmfkit/tv.hpp>

#include <benchmark/benchmark.h>

#include <random>

using namespace cmfkit;

namespace {

ScalarField random_field(const Grid& g, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    ScalarField f(g);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = dist(rng);
    return f;
}

Grid bench_grid(const benchmark::State& state) {
    const int n = int(state.range(0));
    return state.range(1) ? Grid(n, n, n) : Grid(n, n);
}

SolverConfig fixed_iters(int iters) {
    SolverConfig cfg;
    cfg.max_iters = iters;
    cfg.tol = 1e-300; // never satisfied: benchmark a fixed iteration count
    return cfg;
}

void BM_gradient(benchmark::State& state) {
    const Grid g = bench_grid(state);
    const ScalarField u = random_field(g, 1);
    VectorField out(g);
    for (auto _ : state) {
        gradient(u, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(g.size()));
}

void BM_divergence(benchmark::State& state) {
    const Grid g = bench_grid(state);
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    VectorField p(g);
    for (std::size_t i = 0; i < p.size(); ++i) p.data()[i] = dist(rng);
    ScalarField out(g);
    for (auto _ : state) {
        divergence(p, out);
        benchmark::DoNotOptimize(out.data());
    }
    state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(g.size()));
}

void BM_warp(benchmark::State& state) {
    const Grid g = bench_grid(state);
    const ScalarField img = random_field(g, 3);
    VectorField u(g, 0.37);
    for (auto _ : state) {
        const ScalarField w = warp(img, u);
        benchmark::DoNotOptimize(w.data());
    }
    state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(g.size()));
}

void BM_tv_denoise(benchmark::State& state) {
    const Grid g(int(state.range(0)), int(state.range(0)));
    const ScalarField f = random_field(g, 4);
    const SolverConfig cfg = fixed_iters(int(state.range(1)));
    for (auto _ : state) {
        const DenoiseResult res = denoise(f, 0.15, Fidelity::l2, cfg);
        benchmark::DoNotOptimize(res.u.data());
    }
    state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(state.range(1)) *
                            int64_t(g.size()));
}

void BM_binary_segment(benchmark::State& state) {
    const Grid g(int(state.range(0)), int(state.range(0)));
    BinarySegProblem prob{random_field(g, 5), random_field(g, 6), 0.3};
    const SolverConfig cfg = fixed_iters(int(state.range(1)));
    for (auto _ : state) {
        const BinarySolveResult res = solve(prob, cfg);
        benchmark::DoNotOptimize(res.u.data());
    }
    state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(state.range(1)) *
                            int64_t(g.size()));
}

void BM_registration_level(benchmark::State& state) {
    const Grid g(int(state.range(0)), int(state.range(0)));
    ScalarField moving = random_field(g, 7);
    ScalarField reference = random_field(g, 8);
    const LinearizedProblem lin = linearize(moving, reference);
    const VectorField u0(g);
    const SolverConfig cfg = fixed_iters(int(state.range(1)));
    for (auto _ : state) {
        const LevelSolveResult res = solve_level(lin, u0, 0.2, cfg);
        benchmark::DoNotOptimize(res.h.data());
    }
    state.SetItemsProcessed(int64_t(state.iterations()) * int64_t(state.range(1)) *
                            int64_t(g.size()));
}

} // namespace

BENCHMARK(BM_gradient)->Args({256, 0})->Args({64, 1});
BENCHMARK(BM_divergence)->Args({256, 0})->Args({64, 1});
BENCHMARK(BM_warp)->Args({256, 0})->Args({64, 1});
BENCHMARK(BM_tv_denoise)->Args({128, 30});
BENCHMARK(BM_binary_segment)->Args({128, 30});
BENCHMARK(BM_registration_level)->Args({64, 50});

BENCHMARK_MAIN();
