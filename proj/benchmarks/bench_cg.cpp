#include <benchmark/benchmark.h>

#include "fairpath/bilevel.hpp"
#include "fairpath/rng.hpp"

using namespace fairpath;

namespace {

struct SpdSystem {
    std::vector<double> a;
    ParamVector b;
    int dim;
};

SpdSystem make_system(int dim, std::uint64_t seed) {
    auto rng = make_rng(seed);
    std::vector<double> m(static_cast<std::size_t>(dim) * dim);
    for (auto& v : m) v = rand_normal(rng);
    SpdSystem sys;
    sys.dim = dim;
    sys.a.assign(static_cast<std::size_t>(dim) * dim, 0.0);
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < dim; ++j) {
            double s = 0.0;
            for (int k = 0; k < dim; ++k) s += m[static_cast<std::size_t>(k) * dim + i] * m[static_cast<std::size_t>(k) * dim + j];
            sys.a[static_cast<std::size_t>(i) * dim + j] = s / dim + (i == j ? 1.0 : 0.0);
        }
    }
    std::vector<double> bv(static_cast<std::size_t>(dim));
    for (auto& v : bv) v = rand_normal(rng);
    sys.b.add("x", {dim}, bv);
    return sys;
}

void bm_cg_solve(benchmark::State& state) {
    const int dim = static_cast<int>(state.range(0));
    auto sys = make_system(dim, 7);
    auto apply = [&](const ParamVector& p) {
        ParamVector out = p.zeros_like();
        for (int i = 0; i < dim; ++i) {
            double s = 0.0;
            for (int j = 0; j < dim; ++j) s += sys.a[static_cast<std::size_t>(i) * dim + j] * p.values[static_cast<std::size_t>(j)];
            out.values[static_cast<std::size_t>(i)] = s;
        }
        return out;
    };
    for (auto _ : state) {
        auto res = bilevel::cg_solve(apply, sys.b, sys.b.zeros_like(), dim, 1e-10);
        benchmark::DoNotOptimize(res.x.values.data());
    }
}

}  // namespace

BENCHMARK(bm_cg_solve)->Arg(8)->Arg(16)->Arg(32)->Arg(64);

BENCHMARK_MAIN();
