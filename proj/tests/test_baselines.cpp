#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fairpath/baselines.hpp"
#include "fairpath/eval.hpp"
#include "fairpath/metrics.hpp"
#include "fairpath/oracle.hpp"
#include "fairpath/rng.hpp"

using namespace fairpath;
using baselines::BaselineConfig;
using baselines::Method;
using models::Activation;
using models::LossKind;
using models::Task;

namespace {

data::GroupedDataset realizable_dataset(std::uint64_t seed, int n_per_group, double noise) {
    auto spec = data::SyntheticSpec::fair_realizable(seed);
    spec.n_per_group = n_per_group;
    spec.noise_scale = noise;
    return data::standardize(data::split(data::gen_synthetic(spec), {0.7, 0.1, 0.2}, seed + 1));
}

BaselineConfig quick_config(Method m, double reg) {
    BaselineConfig cfg;
    cfg.method = m;
    cfg.reg_coeff = reg;
    cfg.batch_size_per_group = 128;
    cfg.max_epochs = 40;
    cfg.outer_lr = 1e-2;
    return cfg;
}

bilevel::TrainOptions opts(std::uint64_t seed) {
    bilevel::TrainOptions o;
    o.seed = seed;
    return o;
}

}  // namespace

TEST_CASE("train_erm: linearly realizable regression reaches near-zero train MSE") {
    auto spec = data::SyntheticSpec::fair_realizable(2);
    spec.n_per_group = 300;
    spec.noise_scale = 0.0;  // exactly realizable
    auto ds = data::standardize(data::split(data::gen_synthetic(spec), {0.7, 0.1, 0.2}, 3));
    auto net = models::ReprNet::init({ds.dim(), 6}, Activation::linear, 1);
    auto head = models::Head::zeros(6, Task::regression);
    auto cfg = quick_config(Method::erm, 0.0);
    cfg.max_epochs = 150;
    auto res = baselines::train_erm(net, head, ds, cfg, opts(5));
    CHECK(res.records.back().perf_train < 1e-3);
}

TEST_CASE("train_erm: identical group distributions give a small sufficiency gap") {
    auto ds = realizable_dataset(11, 1500, 0.05);
    auto net = models::ReprNet::init({ds.dim(), 6}, Activation::linear, 2);
    auto head = models::Head::zeros(6, Task::regression);
    auto cfg = quick_config(Method::erm, 0.0);
    cfg.max_epochs = 60;
    auto res = baselines::train_erm(net, head, ds, cfg, opts(6));
    CHECK(res.records.back().suf_gap_test < 0.05);
}

TEST_CASE("train_erm: reg_coeff must be zero") {
    BaselineConfig cfg;
    cfg.method = Method::erm;
    cfg.reg_coeff = 0.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("one_step: identical group batches keep the penalty at exactly zero") {
    // every row identical in both groups, so any two batch draws coincide and
    // the gradient-incoherence penalty is exactly zero each step
    data::GroupedDataset ds;
    ds.task = Task::regression;
    const int n = 40, d = 3;
    ds.features = Tensor::zeros({n, d});
    for (int i = 0; i < n; ++i) {
        ds.features.at(i, 0) = 0.5;
        ds.features.at(i, 1) = -1.0;
        ds.features.at(i, 2) = 2.0;
        ds.labels.push_back(1.5);
        ds.group.push_back(i % 2);
        ds.split.push_back(i < 28 ? data::Split::train : (i < 34 ? data::Split::val : data::Split::test));
    }
    ds.feature_names = {"a", "b", "c"};
    auto net = models::ReprNet::init({d, 5}, Activation::linear, 3);
    auto head = models::Head::zeros(5, Task::regression);

    auto with_pen = baselines::train_one_step(net, head, ds, quick_config(Method::one_step, 1.0), opts(7));
    auto no_pen = baselines::train_one_step(net, head, ds, quick_config(Method::one_step, 0.0), opts(7));
    CHECK(with_pen.net.params.values == no_pen.net.params.values);
}

TEST_CASE("one_step: reg 0 matches two-head ERM bit for bit under one seed") {
    auto ds = realizable_dataset(31, 300, 0.05);
    auto net = models::ReprNet::init({ds.dim(), 5}, Activation::relu, 4);
    auto head = models::Head::zeros(5, Task::regression);
    auto a = baselines::train_one_step(net, head, ds, quick_config(Method::one_step, 0.0), opts(8));
    auto b = baselines::train_baseline(net, head, ds, quick_config(Method::two_head_erm, 0.0), opts(8));
    CHECK(a.net.params.values == b.net.params.values);
    CHECK(a.head0.params.values == b.head0.params.values);
}

TEST_CASE("one_step: penalty equals the closed-form gradient difference on square loss") {
    // analytic check of || (2/n) Zt^T (Zt h - y0) - (2/n) Zt^T (Zt h - y1) ||^2
    auto rng = make_rng(77);
    const int n = 12, e = 3;
    Tensor z = Tensor::zeros({n, e});
    Tensor y0 = Tensor::zeros({n, 1});
    Tensor y1 = Tensor::zeros({n, 1});
    for (auto& v : z.data) v = rand_normal(rng);
    for (auto& v : y0.data) v = rand_normal(rng);
    for (auto& v : y1.data) v = rand_normal(rng);
    auto head = models::Head::init(e, Task::regression, 5);

    Tape tape;
    auto hb = bind_params(tape, head.params);
    int zc = tape.constant(z);
    int l0 = models::record_loss(tape, models::record_scores(tape, hb, zc), tape.constant(y0), LossKind::square);
    int l1 = models::record_loss(tape, models::record_scores(tape, hb, zc), tape.constant(y1), LossKind::square);
    auto g0 = tape.backward(l0, hb.leaf_ids);
    auto g1 = tape.backward(l1, hb.leaf_ids);
    double engine_pen = 0.0;
    for (std::size_t i = 0; i < g0.size(); ++i) {
        const auto& a = tape.value(g0[i]).data;
        const auto& b = tape.value(g1[i]).data;
        for (std::size_t k = 0; k < a.size(); ++k) engine_pen += (a[k] - b[k]) * (a[k] - b[k]);
    }

    // closed form: gradients differ only through the labels
    double ref = 0.0;
    for (int i = 0; i < e + 1; ++i) {
        double gi = 0.0;
        for (int r = 0; r < n; ++r) {
            double zi = i < e ? z.at(r, i) : 1.0;
            gi += (2.0 / n) * zi * (y1.data[static_cast<std::size_t>(r)] - y0.data[static_cast<std::size_t>(r)]);
        }
        ref += gi * gi;
    }
    CHECK(engine_pen == doctest::Approx(ref).epsilon(1e-10));
}

TEST_CASE("irm_v1: reg 0 is exactly ERM under the same seed") {
    auto ds = realizable_dataset(41, 300, 0.05);
    auto net = models::ReprNet::init({ds.dim(), 5}, Activation::relu, 6);
    auto head = models::Head::zeros(5, Task::regression);
    auto a = baselines::train_baseline(net, head, ds, quick_config(Method::irm_v1, 0.0), opts(10));
    auto b = baselines::train_erm(net, head, ds, quick_config(Method::erm, 0.0), opts(10));
    CHECK(a.net.params.values == b.net.params.values);
    CHECK(a.head0.params.values == b.head0.params.values);
}

TEST_CASE("irm_v1: zero-loss realizable data has zero dummy-scale penalty") {
    // y identically zero: every per-sample loss and its w-derivative vanish
    Tape tape;
    auto head = models::Head::init(3, Task::regression, 5);
    auto rng = make_rng(3);
    Tensor z = Tensor::zeros({10, 3});
    for (auto& v : z.data) v = rand_normal(rng);
    auto hb = bind_params(tape, head.params);
    int zc = tape.constant(z);
    int scores = models::record_scores(tape, hb, zc);
    // labels equal to the scores: residual is identically zero at w = 1
    int labels = tape.constant(tape.value(scores));
    int w = tape.leaf(Tensor::scalar(1.0), true);
    int wb = tape.bfill(w, tape.value(scores).shape);
    int lw = models::record_loss(tape, tape.mul(scores, wb), labels, LossKind::square);
    std::vector<int> wrt{w};
    auto adj = tape.backward(lw, wrt);
    REQUIRE(adj[0] >= 0);
    CHECK(std::fabs(tape.value(adj[0]).scalar_value()) < 1e-14);
}

TEST_CASE("mean_match: penalty pulls group mean outputs together") {
    auto spec = data::SyntheticSpec::biased(51);
    spec.n_per_group = 800;
    auto ds = data::standardize(data::split(data::gen_synthetic(spec), {0.7, 0.1, 0.2}, 4));
    auto net = models::ReprNet::init({ds.dim(), 6}, Activation::linear, 8);
    auto head = models::Head::zeros(6, Task::regression);

    auto none = baselines::train_baseline(net, head, ds, quick_config(Method::erm, 0.0), opts(12));
    auto strong = baselines::train_baseline(net, head, ds, quick_config(Method::mean_match, 10.0), opts(12));

    auto gap_of = [&](const baselines::BaselineResult& r) {
        auto preds = predict_split(ds, r.net, r.head0, r.head1, data::Split::test);
        return metrics::mean_output_gap(preds);
    };
    CHECK(gap_of(strong) < 0.5 * gap_of(none));
}

TEST_CASE("baselines share split hashes with the implicit trainer records") {
    auto ds = realizable_dataset(61, 200, 0.05);
    auto net = models::ReprNet::init({ds.dim(), 4}, Activation::linear, 9);
    auto head = models::Head::zeros(4, Task::regression);
    bilevel::TrainOptions o;
    o.seed = 3;
    o.config_hash = "cfg123";
    o.data_hash = "data456";
    auto cfg = quick_config(Method::erm, 0.0);
    cfg.max_epochs = 2;
    auto res = baselines::train_erm(net, head, ds, cfg, o);
    for (const auto& r : res.records) {
        CHECK(r.config_hash == "cfg123");
        CHECK(r.data_hash == "data456");
        CHECK(r.seed == 3);
    }
}
