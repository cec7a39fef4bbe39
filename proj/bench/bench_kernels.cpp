// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <memory>

#include "ewa/experiments.hpp"
#include "ewa/oracle.hpp"
#include "ewa/rng.hpp"
#include "ewa/sampler.hpp"

using namespace ewa;

namespace {

struct Problem {
    Matrix X;
    NaturalParams theta0;
    GibbsConfig gibbs;
};

Problem make_problem(long n, long p) {
    Rng rng = make_rng(7, "bench");
    Matrix X(n, p);
    for (long i = 0; i < n; ++i)
        for (long j = 0; j < p; ++j) X(i, j) = standard_normal(rng);
    Vector beta = Vector::Zero(p);
    beta[0] = 1.0;
    beta[1] = -0.5;
    const Family fam = Family::gaussian();
    const NaturalParams theta0 = natural_params(X, beta, fam);
    Vector Y(n);
    for (long i = 0; i < n; ++i) Y[i] = sample_response(fam, theta0.theta()[i], rng);
    auto data = std::make_shared<const Dataset>(X, Y, fam);
    return {X, theta0, GibbsConfig::with_defaults(data)};
}

template <auto Fn>
void bm_best_subset(benchmark::State& st) {
    const Problem pr = make_problem(200, 12);
    for (auto _ : st) benchmark::DoNotOptimize(Fn(pr.theta0, pr.X, 3, Family::gaussian(), OracleOptions{}));
}

SamplerConfig chain_config() {
    SamplerConfig s;
    s.n_iters = 4000;
    s.n_chains = 4;
    s.seed = 11;
    return s;
}

template <auto Fn>
void bm_chains(benchmark::State& st) {
    const Problem pr = make_problem(200, 10);
    const GibbsPosterior post(pr.gibbs);
    const SamplerConfig s = chain_config();
    for (auto _ : st) benchmark::DoNotOptimize(Fn(post, s));
}

template <auto Fn>
void bm_grid(benchmark::State& st) {
    const Problem pr = make_problem(100, 2);
    const GibbsPosterior post(pr.gibbs);
    const std::vector<GridAxis> axes{{0.5, 1.5, 301}, {-1.0, 0.0, 301}};
    for (auto _ : st) benchmark::DoNotOptimize(Fn(post, axes, &pr.theta0));
}

template <auto Fn>
void bm_cell(benchmark::State& st) {
    ExperimentConfig cfg;
    cfg.n_list = {100};
    cfg.p_list = {10};
    cfg.p0_list = {2};
    cfg.n_replications = 8;
    cfg.sampler.n_iters = 2000;
    cfg.sampler.n_chains = 1;
    const Cell cell = enumerate_cells(cfg).front();
    for (auto _ : st) benchmark::DoNotOptimize(Fn(cfg, cell));
}

}  // namespace

BENCHMARK(bm_best_subset<best_subset_kl_serial>)->Name("best_subset_kl/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(bm_best_subset<best_subset_kl>)->Name("best_subset_kl/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK(bm_chains<run_chains_serial>)->Name("run_chains/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(bm_chains<run_chains>)->Name("run_chains/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK(bm_grid<grid_posterior_serial>)->Name("grid_posterior/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(bm_grid<grid_posterior>)->Name("grid_posterior/openmp")->Unit(benchmark::kMillisecond);
BENCHMARK(bm_cell<run_cell_serial>)->Name("run_cell/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(bm_cell<run_cell>)->Name("run_cell/openmp")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
