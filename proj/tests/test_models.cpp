#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fairpath/bilevel.hpp"
#include "fairpath/models.hpp"
#include "fairpath/oracle.hpp"
#include "fairpath/rng.hpp"

using namespace fairpath;
using models::Activation;
using models::LossKind;
using models::Task;

TEST_CASE("embed: identity single layer passes the batch through") {
    auto net = models::ReprNet::identity(3);
    Tensor x = Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6});
    Tensor z = models::embed(net, x);
    CHECK(z.data == x.data);
}

TEST_CASE("embed: zero weights broadcast the bias") {
    auto net = models::ReprNet::identity(2);
    net.params.values = {0, 0, 0, 0, 0.5, -1.5};  // w = 0, b = (0.5, -1.5)
    Tensor z = models::embed(net, Tensor::matrix(3, 2, {9, 9, 9, 9, 9, 9}));
    for (int r = 0; r < 3; ++r) {
        CHECK(z.at(r, 0) == doctest::Approx(0.5));
        CHECK(z.at(r, 1) == doctest::Approx(-1.5));
    }
}

TEST_CASE("embed: seed-0 two-layer relu net matches the straight-line oracle") {
    auto net = models::ReprNet::init({4, 6, 3}, Activation::relu, 0);
    auto rng = make_rng(11);
    Tensor x = Tensor::zeros({5, 4});
    for (auto& v : x.data) v = rand_normal(rng);
    Tensor engine = models::embed(net, x);
    Tensor straight = oracle::straightline_forward(net, x);
    for (std::size_t i = 0; i < engine.data.size(); ++i) {
        CHECK(engine.data[i] == doctest::Approx(straight.data[i]).epsilon(1e-14));
    }
}

TEST_CASE("embed: width mismatch is rejected") {
    auto net = models::ReprNet::identity(3);
    CHECK_THROWS_AS(models::embed(net, Tensor::matrix(2, 4, {1, 2, 3, 4, 5, 6, 7, 8})), std::invalid_argument);
}

TEST_CASE("group_loss: exact predictions give zero square loss") {
    auto net = models::ReprNet::identity(1);
    auto head = models::Head::zeros(1, Task::regression);
    head.params.values = {1.0, 0.0};  // identity head
    Tensor x = Tensor::matrix(3, 1, {1, 2, 3});
    Tensor y = Tensor::matrix(3, 1, {1, 2, 3});
    CHECK(models::group_loss(head, net, x, y, LossKind::square) == doctest::Approx(0.0));
}

TEST_CASE("group_loss: zero scores give ln 2 logistic loss") {
    auto net = models::ReprNet::identity(2);
    auto head = models::Head::zeros(2, Task::binary_classification);
    Tensor x = Tensor::matrix(4, 2, {1, -1, 2, 0.5, -3, 1, 0, 0});
    Tensor y = Tensor::matrix(4, 1, {1, -1, 1, -1});
    CHECK(models::group_loss(head, net, x, y, LossKind::logistic) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("group_loss: matches a per-sample scalar loop") {
    auto net = models::ReprNet::init({3, 2}, Activation::linear, 4);
    auto head = models::Head::init(2, Task::regression, 9);
    auto rng = make_rng(21);
    Tensor x = Tensor::zeros({7, 3});
    Tensor y = Tensor::zeros({7, 1});
    for (auto& v : x.data) v = rand_normal(rng);
    for (auto& v : y.data) v = rand_normal(rng);
    double engine = models::group_loss(head, net, x, y, LossKind::square);
    Tensor z = oracle::straightline_forward(net, x);
    double reference = oracle::straightline_loss(z, head.params, y, LossKind::square);
    CHECK(engine == doctest::Approx(reference).epsilon(1e-12));
}

TEST_CASE("group_loss: empty batch and bad labels are rejected") {
    auto net = models::ReprNet::identity(2);
    auto head = models::Head::zeros(2, Task::binary_classification);
    CHECK_THROWS_AS(models::group_loss(head, net, Tensor::zeros({0, 2}), Tensor::zeros({0, 1}), LossKind::logistic),
                    std::invalid_argument);
    Tensor x = Tensor::matrix(1, 2, {1, 1});
    Tensor y = Tensor::matrix(1, 1, {0.5});
    CHECK_THROWS_AS(models::group_loss(head, net, x, y, LossKind::logistic), std::invalid_argument);
}

TEST_CASE("predict: zero head scores zero; unit head picks a feature") {
    auto net = models::ReprNet::identity(2);
    auto zero_head = models::Head::zeros(2, Task::regression);
    Tensor x = Tensor::matrix(2, 2, {3, 4, 5, 6});
    Tensor s0 = models::predict(zero_head, net, x);
    CHECK(s0.data == std::vector<double>{0, 0});

    auto e1 = models::Head::zeros(2, Task::regression);
    e1.params.values = {1.0, 0.0, 0.0};  // weight e1, zero bias
    Tensor s1 = models::predict(e1, net, x);
    CHECK(s1.data == std::vector<double>{3, 5});
}

TEST_CASE("predict: seed-0 setup matches hand evaluation") {
    auto net = models::ReprNet::init({3, 4, 2}, Activation::relu, 0);
    auto head = models::Head::init(2, Task::regression, 1);
    auto rng = make_rng(33);
    Tensor x = Tensor::zeros({4, 3});
    for (auto& v : x.data) v = rand_normal(rng);
    Tensor engine = models::predict(head, net, x);
    Tensor z = oracle::straightline_forward(net, x);
    for (int r = 0; r < 4; ++r) {
        double s = head.params.values[2];
        for (int k = 0; k < 2; ++k) s += z.at(r, k) * head.params.values[static_cast<std::size_t>(k)];
        CHECK(engine.data[static_cast<std::size_t>(r)] == doctest::Approx(s).epsilon(1e-14));
    }
}

TEST_CASE("square loss with linear head is convex in the head parameters") {
    auto net = models::ReprNet::init({4, 3}, Activation::linear, 8);
    auto rng = make_rng(55);
    Tensor x = Tensor::zeros({20, 4});
    Tensor y = Tensor::zeros({20, 1});
    for (auto& v : x.data) v = rand_normal(rng);
    for (auto& v : y.data) v = rand_normal(rng);
    for (int trial = 0; trial < 20; ++trial) {
        auto a = models::Head::init(3, Task::regression, 100 + static_cast<std::uint64_t>(trial));
        auto b = models::Head::init(3, Task::regression, 200 + static_cast<std::uint64_t>(trial));
        auto mid = a;
        mid.params.axpy(1.0, b.params);
        mid.params.scale(0.5);
        double la = models::group_loss(a, net, x, y, LossKind::square);
        double lb = models::group_loss(b, net, x, y, LossKind::square);
        double lm = models::group_loss(mid, net, x, y, LossKind::square);
        CHECK(lm <= 0.5 * (la + lb) + 1e-10);
    }
}

TEST_CASE("recovery: inner solver reaches the normal-equations head on y = c.z + noise") {
    auto net = models::ReprNet::init({5, 3}, Activation::linear, 12);
    auto rng = make_rng(77);
    Tensor x = Tensor::zeros({200, 5});
    for (auto& v : x.data) v = rand_normal(rng);
    Tensor z = models::embed(net, x);
    std::vector<double> c{0.8, -0.5, 1.2};
    Tensor y = Tensor::zeros({200, 1});
    for (int r = 0; r < 200; ++r) {
        double s = 0.3;
        for (int k = 0; k < 3; ++k) s += c[static_cast<std::size_t>(k)] * z.at(r, k);
        y.data[static_cast<std::size_t>(r)] = s + 0.01 * rand_normal(rng);
    }
    auto exact = bilevel::fit_head_exact(z, y, models::Head::zeros(3, Task::regression));
    auto gd = bilevel::fit_head_gd(z, y, models::Head::zeros(3, Task::regression), LossKind::square, 0.2, 200000, 1e-9);
    CHECK(gd.converged);
    CHECK((gd.head.params - exact.head.params).norm2() < 1e-4);
}

TEST_CASE("checkpoint: save and load round-trips parameters exactly") {
    auto net = models::ReprNet::init({4, 6, 3}, Activation::relu, 77);
    const std::string path = "test_params.ckpt";
    save_params(path, net.params);
    ParamVector back = load_params(path);
    CHECK(back.values == net.params.values);
    REQUIRE(back.layout.size() == net.params.layout.size());
    for (std::size_t i = 0; i < back.layout.size(); ++i) {
        CHECK(back.layout[i].name == net.params.layout[i].name);
        CHECK(back.layout[i].shape == net.params.layout[i].shape);
        CHECK(back.layout[i].offset == net.params.layout[i].offset);
    }
    std::remove(path.c_str());
}
