#include <benchmark/benchmark.h>

#include "scarcegrad/bilevel.hpp"
#include "scarcegrad/datasets.hpp"
#include "scarcegrad/jacobi.hpp"
#include "scarcegrad/neumann.hpp"
#include "scarcegrad/rng.hpp"

using namespace scarcegrad;

namespace {

Tensor random_square(Rng& rng, int n) { return Tensor::random_uniform(n, n, rng, -1.0, 1.0); }

Matrix random_symmetric(Rng& rng, int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            m(i, j) = rng.uniform(-1.0, 1.0);
            m(j, i) = m(i, j);
        }
    return m;
}

}  // namespace

static void BM_TapeMatmul(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(1);
    Tensor a = random_square(rng, n);
    Tensor b = random_square(rng, n);
    for (auto _ : state) {
        Tape tape;
        VarId out = tape.matmul(tape.constant(a), tape.constant(b));
        benchmark::DoNotOptimize(tape.value(out).mat().data());
    }
    state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_TapeMatmul)->Arg(64)->Arg(256)->Arg(512);

static void BM_GcnInnerStep(benchmark::State& state) {
    // one hand-derived gradient plus one differentiable optimizer step on a
    // cheaters-sized instance
    Dataset ds = gen_cheaters(0);
    const GcnShape shape{10, {8}, 2};
    for (auto _ : state) {
        Tape tape;
        Rng rng(2);
        GcnParams params = init_gcn_params(tape, shape, rng);
        VarId a = tape.constant(ds.a_obs.adjacency());
        VarId x = tape.constant(ds.x);
        InnerGradWorkspace ws = make_inner_grad_workspace(tape, a, x);
        TapeOptimizer opt(OptimizerKind::adam, 1e-2);
        GcnGradients grads = inner_grad_gcn(tape, params, a, x, ds.targets, ds.split.train,
                                            LossKind::cce, ws);
        auto updated = opt.step(tape, params.flatten(), grads.flatten());
        benchmark::DoNotOptimize(updated.data());
    }
}
BENCHMARK(BM_GcnInnerStep);

static void BM_CheatersHypergradient(benchmark::State& state) {
    // full pipeline: materialize, unroll tau_in steps, outer loss, backward
    Dataset ds = gen_cheaters(0);
    OuterConfig cfg;
    cfg.model.kind = InnerModelSpec::Kind::gcn;
    cfg.model.gcn = GcnShape{10, {8}, 2};
    cfg.model.loss = LossKind::cce;
    cfg.outer_loss = LossKind::cce;
    cfg.tau_in = static_cast<int>(state.range(0));
    cfg.eta_in = 1e-2;

    Rng rng(3);
    DirectEdges d;
    d.support = ds.a_obs.support;
    d.weights.resize(d.support.edge_count());
    for (double& w : d.weights) w = 1e-5 * rng.uniform();

    for (auto _ : state) {
        HypergradResult hg = hypergradient(cfg, ds, d, 42);
        benchmark::DoNotOptimize(hg.param_grad.data());
    }
}
BENCHMARK(BM_CheatersHypergradient)->Arg(25)->Arg(200)->Unit(benchmark::kMillisecond);

static void BM_LaplacianUnroll(benchmark::State& state) {
    Synthetic1Options opts;
    opts.n = 256;
    opts.sigma = 0.06 * std::sqrt(1536.0 / 256.0);
    Dataset ds = gen_synthetic1(0, opts);
    OuterConfig cfg;
    cfg.model.kind = InnerModelSpec::Kind::laplacian;
    cfg.model.loss = LossKind::mse;
    cfg.model.lambda = 1.0;
    cfg.outer_loss = LossKind::mse;
    cfg.tau_in = 500;
    cfg.eta_in = 10.0;

    DirectEdges d;
    d.support = ds.a_obs.support;
    d.weights = ds.a_obs.weights;

    for (auto _ : state) {
        HypergradResult hg = hypergradient(cfg, ds, d, 42);
        benchmark::DoNotOptimize(hg.param_grad.data());
    }
}
BENCHMARK(BM_LaplacianUnroll)->Unit(benchmark::kMillisecond);

static void BM_JacobiEigenvalues(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(4);
    Matrix m = random_symmetric(rng, n);
    for (auto _ : state) {
        JacobiResult r = jacobi_eigenvalues(m, 1e-12);
        benchmark::DoNotOptimize(r.eigenvalues.data());
    }
}
BENCHMARK(BM_JacobiEigenvalues)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_TridiagonalEigenvalues(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(5);
    Matrix m = random_symmetric(rng, n);
    for (auto _ : state) {
        auto values = symmetric_eigenvalues(m);
        benchmark::DoNotOptimize(values.data());
    }
}
BENCHMARK(BM_TridiagonalEigenvalues)->Arg(256)->Arg(512)->Arg(1536)->Unit(benchmark::kMillisecond);

static void BM_NeumannSweep(benchmark::State& state) {
    Synthetic1Options opts;
    opts.n = 512;
    opts.sigma = 0.06 * std::sqrt(1536.0 / 512.0);
    Dataset ds = gen_synthetic1(0, opts);
    RegularizedSystem sys =
        RegularizedSystem::build(ds.a_obs, ds.targets.y_obs, ds.split.train, 1.0);
    SpectralSummary spectral = spectral_bounds(sys);
    NeumannSeries series = NeumannSeries::compute(sys, spectral, 100000, 1e-12);
    for (auto _ : state) {
        auto sweep = analytic_hypergradient_sweep(sys, series, ds.targets.y_obs,
                                                  ds.split.outer, ds.a_obs.support.edges, 0);
        benchmark::DoNotOptimize(sweep.data());
    }
    state.SetItemsProcessed(state.iterations() *
                            static_cast<long>(ds.a_obs.support.edges.size()));
}
BENCHMARK(BM_NeumannSweep)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
