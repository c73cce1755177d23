#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fairpath/bilevel.hpp"
#include "fairpath/oracle.hpp"
#include "fairpath/rng.hpp"

using namespace fairpath;
using bilevel::GroupBatch;
using models::Activation;
using models::LossKind;
using models::Task;

TEST_CASE("fd_gradient: norm squared and linear functions") {
    ParamVector theta;
    theta.add("t", {2}, {1.0, 2.0});
    auto norm2 = [](const ParamVector& p) {
        double s = 0.0;
        for (double v : p.values) s += v * v;
        return s;
    };
    ParamVector g = oracle::fd_gradient(norm2, theta, 1e-6);
    CHECK(g.values[0] == doctest::Approx(2.0).epsilon(1e-8));
    CHECK(g.values[1] == doctest::Approx(4.0).epsilon(1e-8));

    auto linear = [](const ParamVector& p) { return 3.0 * p.values[0] - 0.5 * p.values[1]; };
    ParamVector gl = oracle::fd_gradient(linear, theta, 1e-6);
    CHECK(gl.values[0] == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(gl.values[1] == doctest::Approx(-0.5).epsilon(1e-10));
}

TEST_CASE("fd_gradient: non-finite evaluation reports the coordinate") {
    ParamVector theta;
    theta.add("t", {2}, {1.0, 2.0});
    auto bad = [](const ParamVector& p) { return p.values[1] > 2.0 ? std::nan("") : p.values[0]; };
    bool names_coordinate = false;
    try {
        oracle::fd_gradient(bad, theta, 1e-3);
    } catch (const std::runtime_error& e) {
        names_coordinate = std::string(e.what()).find("coordinate 1") != std::string::npos;
    }
    CHECK(names_coordinate);
}

TEST_CASE("dense_spd_solve: identity, diagonal, random residual, rejection") {
    std::vector<double> id{1, 0, 0, 1};
    auto x = oracle::dense_spd_solve(id, {3.0, -4.0}, 2);
    CHECK(x[0] == doctest::Approx(3.0));
    CHECK(x[1] == doctest::Approx(-4.0));

    std::vector<double> diag{2, 0, 0, 4};
    auto y = oracle::dense_spd_solve(diag, {2.0, 4.0}, 2);
    CHECK(y[0] == doctest::Approx(1.0));
    CHECK(y[1] == doctest::Approx(1.0));

    auto rng = make_rng(5);
    const int n = 20;
    std::vector<double> m(static_cast<std::size_t>(n) * n);
    for (auto& v : m) v = rand_normal(rng);
    std::vector<double> a(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int k = 0; k < n; ++k) s += m[static_cast<std::size_t>(k) * n + i] * m[static_cast<std::size_t>(k) * n + j];
            a[static_cast<std::size_t>(i) * n + j] = s / n + (i == j ? 1.0 : 0.0);
        }
    }
    std::vector<double> b(static_cast<std::size_t>(n));
    for (auto& v : b) v = rand_normal(rng);
    auto sol = oracle::dense_spd_solve(a, b, n);
    double res = 0.0;
    for (int i = 0; i < n; ++i) {
        double ri = -b[static_cast<std::size_t>(i)];
        for (int j = 0; j < n; ++j) ri += a[static_cast<std::size_t>(i) * n + j] * sol[static_cast<std::size_t>(j)];
        res += ri * ri;
    }
    CHECK(std::sqrt(res) < 1e-10);

    std::vector<double> indefinite{1, 0, 0, -1};
    CHECK_THROWS_AS(oracle::dense_spd_solve(indefinite, {1.0, 1.0}, 2), std::invalid_argument);
    std::vector<double> asym{1, 2, 0, 1};
    CHECK_THROWS_AS(oracle::dense_spd_solve(asym, {1.0, 1.0}, 2), std::invalid_argument);
}

namespace {

GroupBatch linear_batch(std::uint64_t seed, int n, int d, const std::vector<double>& coeff, double noise) {
    auto rng = make_rng(seed);
    GroupBatch b;
    b.x = Tensor::zeros({n, d});
    b.y = Tensor::zeros({n, 1});
    for (int r = 0; r < n; ++r) {
        double yv = 0.0;
        for (int j = 0; j < d; ++j) {
            double x = rand_normal(rng);
            b.x.at(r, j) = x;
            yv += coeff[static_cast<std::size_t>(j)] * x;
        }
        b.y.data[static_cast<std::size_t>(r)] = yv + noise * rand_normal(rng);
    }
    return b;
}

}  // namespace

TEST_CASE("exact_bilevel_gradient: kappa 0 equals the direct gradient at the optimum") {
    auto net = models::ReprNet::init({4, 2}, Activation::linear, 3, Activation::linear);
    GroupBatch b0 = linear_batch(1, 48, 4, {1.0, -0.5, 0.2, 0.6}, 0.05);
    GroupBatch b1 = linear_batch(2, 48, 4, {0.4, 0.5, 0.2, -0.6}, 0.05);
    ParamVector total = oracle::exact_bilevel_gradient(net, b0, b1, 0.0, 1e-5, 0.0);

    // direct route: hold the exact heads fixed; at the optimum the implicit
    // terms vanish, so the partial gradient equals the total one
    bilevel::BilevelConfig cfg;
    cfg.inner_solver = bilevel::InnerSolver::exact;
    cfg.inner_tol_eps = 1e-9;
    auto init = models::Head::zeros(2, Task::regression);
    auto sol = bilevel::solve_inner(net, b0, b1, cfg, init, init, LossKind::square);
    auto partial = oracle::fd_gradient(
        [&](const ParamVector& p) {
            models::ReprNet probe = net;
            probe.params = p;
            Tensor z0 = oracle::straightline_forward(probe, b0.x);
            Tensor z1 = oracle::straightline_forward(probe, b1.x);
            return oracle::straightline_loss(z0, sol.head0.params, b0.y, LossKind::square) +
                   oracle::straightline_loss(z1, sol.head1.params, b1.y, LossKind::square);
        },
        net.params, 1e-5);
    CHECK(oracle::rel_error((total - partial).norm2(), partial.norm2()) < 1e-4);
}

TEST_CASE("exact_bilevel_gradient: huge kappa with identical groups matches shared-head direction") {
    auto net = models::ReprNet::init({4, 2}, Activation::linear, 7, Activation::linear);
    GroupBatch b = linear_batch(5, 48, 4, {0.8, -0.3, 0.5, 0.1}, 0.05);
    ParamVector big_kappa = oracle::exact_bilevel_gradient(net, b, b, 1e6, 1e-5, 0.0);
    ParamVector erm_like = oracle::exact_bilevel_gradient(net, b, b, 0.0, 1e-5, 0.0);
    double cosine = big_kappa.dot(erm_like) / (big_kappa.norm2() * erm_like.norm2());
    CHECK(cosine > 0.99);
}

TEST_CASE("explicit_unrolled_step: T = 0 is the outer gradient at the initial heads") {
    auto net = models::ReprNet::init({4, 2}, Activation::linear, 9, Activation::linear);
    GroupBatch b0 = linear_batch(11, 32, 4, {1.0, 0.0, -0.5, 0.3}, 0.05);
    GroupBatch b1 = linear_batch(12, 32, 4, {0.2, 0.7, -0.5, 0.0}, 0.05);
    auto init = models::Head::init(2, Task::regression, 21);
    ParamVector engine = oracle::explicit_unrolled_step(net, init, init, b0, b1, 0, 2.0, 0.1, LossKind::square);
    auto ref = oracle::fd_gradient(
        [&](const ParamVector& p) {
            models::ReprNet probe = net;
            probe.params = p;
            Tensor z0 = oracle::straightline_forward(probe, b0.x);
            Tensor z1 = oracle::straightline_forward(probe, b1.x);
            // identical initial heads: the kappa penalty term is exactly zero
            return oracle::straightline_loss(z0, init.params, b0.y, LossKind::square) +
                   oracle::straightline_loss(z1, init.params, b1.y, LossKind::square);
        },
        net.params, 1e-5);
    CHECK(oracle::rel_error((engine - ref).norm2(), ref.norm2()) < 1e-5);
}

TEST_CASE("explicit_unrolled_step: node budget overrun is reported") {
    auto net = models::ReprNet::init({4, 2}, Activation::linear, 9, Activation::linear);
    GroupBatch b0 = linear_batch(11, 32, 4, {1.0, 0.0, -0.5, 0.3}, 0.05);
    auto init = models::Head::zeros(2, Task::regression);
    bool mentions_budget = false;
    try {
        oracle::explicit_unrolled_step(net, init, init, b0, b0, 10000, 1.0, 0.1, LossKind::square, 500);
    } catch (const std::runtime_error& e) {
        mentions_budget = std::string(e.what()).find("budget") != std::string::npos;
    }
    CHECK(mentions_budget);
}

TEST_CASE("oracle reports serialize and render") {
    oracle::OracleReport rep;
    rep.name = "demo";
    rep.rel_error = 1e-9;
    rep.tolerance = 1e-6;
    rep.pass = true;
    CHECK(rep.to_json().find("\"name\":\"demo\"") != std::string::npos);
    CHECK(rep.to_line().rfind("PASS demo", 0) == 0);
}

TEST_CASE("verification battery: filtered run passes and is deterministic") {
    auto a = oracle::run_all_checks("stationarity_kappa0");
    auto b = oracle::run_all_checks("stationarity_kappa0");
    REQUIRE(a.size() == 1);
    CHECK(a[0].pass);
    CHECK(a[0].rel_error == b[0].rel_error);
}
