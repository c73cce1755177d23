#include <benchmark/benchmark.h>

#include "fairpath/bilevel.hpp"
#include "fairpath/models.hpp"
#include "fairpath/oracle.hpp"
#include "fairpath/rng.hpp"

// One implicit outer step against the unrolled explicit route at growing
// inner budgets: the implicit step should be flat, the explicit one linear.

using namespace fairpath;

namespace {

struct Instance {
    models::ReprNet net;
    bilevel::GroupBatch b0, b1;
    models::Head init;
};

Instance make_instance(int n, int input, int embed, std::uint64_t seed) {
    auto rng = make_rng(seed);
    Instance inst{models::ReprNet::init({input, embed}, models::Activation::linear, seed, models::Activation::linear),
                  {},
                  {},
                  models::Head::zeros(embed, models::Task::regression)};
    for (auto* b : {&inst.b0, &inst.b1}) {
        b->x = Tensor::zeros({n, input});
        b->y = Tensor::zeros({n, 1});
        for (auto& v : b->x.data) v = rand_normal(rng);
        for (int r = 0; r < n; ++r) {
            double s = 0.0;
            for (int j = 0; j < input; ++j) s += 0.3 * b->x.at(r, j);
            b->y.data[static_cast<std::size_t>(r)] = s + 0.1 * rand_normal(rng);
        }
    }
    return inst;
}

void bm_implicit_outer_step(benchmark::State& state) {
    auto inst = make_instance(256, 96, 16, 3);
    bilevel::BilevelConfig cfg;
    cfg.kappa = 1.0;
    cfg.inner_solver = bilevel::InnerSolver::gd;
    cfg.inner_lr = 0.1;
    cfg.inner_max_steps = static_cast<int>(state.range(0));
    cfg.inner_tol_eps = 1e-6;
    cfg.cg_max_iters = 10;
    cfg.cg_tol_delta = 1e-8;
    cfg.hessian_damping = 1e-6;
    for (auto _ : state) {
        auto step = bilevel::outer_step(inst.net, inst.b0, inst.b1, cfg, inst.init, inst.init, models::LossKind::square);
        benchmark::DoNotOptimize(step.grad.grad_lambda.values.data());
    }
}

void bm_explicit_unrolled_step(benchmark::State& state) {
    auto inst = make_instance(256, 96, 16, 3);
    const int t_steps = static_cast<int>(state.range(0));
    for (auto _ : state) {
        auto grad = oracle::explicit_unrolled_step(inst.net, inst.init, inst.init, inst.b0, inst.b1, t_steps, 1.0, 0.1,
                                                   models::LossKind::square);
        benchmark::DoNotOptimize(grad.values.data());
    }
}

}  // namespace

BENCHMARK(bm_implicit_outer_step)->Arg(5)->Arg(20)->Arg(80);
BENCHMARK(bm_explicit_unrolled_step)->Arg(5)->Arg(20)->Arg(80);

BENCHMARK_MAIN();
