#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fairpath/metrics.hpp"
#include "fairpath/oracle.hpp"
#include "fairpath/rng.hpp"

using namespace fairpath;
using metrics::PredictionSet;

namespace {

PredictionSet classification_set(std::initializer_list<std::tuple<int, double, double>> rows) {
    PredictionSet p;
    p.task = models::Task::binary_classification;
    for (auto [g, y, s] : rows) p.push(g, y, s);
    return p;
}

PredictionSet regression_set(std::initializer_list<std::tuple<int, double, double>> rows) {
    PredictionSet p;
    p.task = models::Task::regression;
    for (auto [g, y, s] : rows) p.push(g, y, s);
    return p;
}

}  // namespace

TEST_CASE("suf_gap_classification: identical confusion tables give zero") {
    auto p = classification_set({{0, 1, 2.0}, {0, -1, -2.0}, {1, 1, 2.0}, {1, -1, -2.0}});
    CHECK(metrics::suf_gap_classification(p).value == doctest::Approx(0.0));
}

TEST_CASE("suf_gap_classification: half-and-half PPV/NPV example") {
    // group 0: PPV = NPV = 1; group 1: PPV = NPV = 0.5
    auto p = classification_set({{0, 1, 1.0}, {0, -1, -1.0},
                                 {1, 1, 1.0}, {1, -1, 1.0},
                                 {1, -1, -1.0}, {1, 1, -1.0}});
    auto rep = metrics::suf_gap_classification(p);
    CHECK(rep.value == doctest::Approx(0.5));
    CHECK(rep.terms.size() == 2);
    CHECK(rep.terms[0] == doctest::Approx(0.5));
    CHECK(rep.terms[1] == doctest::Approx(0.5));
}

TEST_CASE("suf_gap_classification: skipped term is flagged, both skipped errors") {
    // nobody predicted negative in group 1: NPV term skipped
    auto p = classification_set({{0, 1, 1.0}, {0, -1, -1.0}, {1, 1, 1.0}});
    auto rep = metrics::suf_gap_classification(p);
    CHECK(rep.skipped[1]);
    CHECK_FALSE(rep.skipped[0]);

    // group 1 has no predictions of either class is impossible while non-empty,
    // but one group predicting only one class on both sides is: all scores
    // positive in group 0, all negative in group 1 -> both terms skipped.
    auto q = classification_set({{0, 1, 1.0}, {1, 1, -1.0}});
    CHECK_THROWS_AS(metrics::suf_gap_classification(q), std::runtime_error);
}

TEST_CASE("suf_gap_classification: matches the brute-force count on random sets") {
    auto rng = make_rng(31);
    for (int trial = 0; trial < 25; ++trial) {
        PredictionSet p;
        p.task = models::Task::binary_classification;
        for (int i = 0; i < 200; ++i) {
            p.push(static_cast<int>(rand_index(rng, 2)), rand_uniform(rng) < 0.5 ? -1.0 : 1.0, rand_normal(rng));
        }
        CHECK(metrics::suf_gap_classification(p).value == oracle::brute_suf_gap_classification(p));
    }
}

TEST_CASE("suf_gap_regression: perfect predictor gives zero") {
    auto rng = make_rng(41);
    PredictionSet p;
    p.task = models::Task::regression;
    for (int i = 0; i < 100; ++i) {
        double y = rand_normal(rng);
        p.push(static_cast<int>(rand_index(rng, 2)), y, y);
    }
    CHECK(metrics::suf_gap_regression(p, 33).value == doctest::Approx(0.0));
}

TEST_CASE("suf_gap_regression: identical samples in both groups give zero") {
    PredictionSet p;
    p.task = models::Task::regression;
    auto rng = make_rng(43);
    for (int i = 0; i < 60; ++i) {
        double y = rand_normal(rng);
        double s = rand_normal(rng);
        p.push(0, y, s);
        p.push(1, y, s);
    }
    CHECK(metrics::suf_gap_regression(p, 9).value == doctest::Approx(0.0));
}

TEST_CASE("suf_gap_regression: hand-enumerated half gap") {
    // every pooled quantile lands at t = 0; group 0 conditionals are 1,
    // group 1 conditionals are 1/2
    auto p = regression_set({{0, -1.0, 0.0}, {0, -2.0, 0.0}, {1, -1.0, 0.0}, {1, 1e9, 0.0}});
    auto rep = metrics::suf_gap_regression(p, 5);
    CHECK(rep.value == doctest::Approx(0.5));
    for (std::size_t i = 0; i < rep.terms.size(); ++i) {
        CHECK_FALSE(rep.skipped[i]);
        CHECK(rep.terms[i] == doctest::Approx(0.5));
    }
}

TEST_CASE("suf_gap_regression: matches the brute-force count on random sets") {
    auto rng = make_rng(47);
    for (int trial = 0; trial < 25; ++trial) {
        PredictionSet p;
        p.task = models::Task::regression;
        for (int i = 0; i < 150; ++i) {
            p.push(static_cast<int>(rand_index(rng, 2)), rand_normal(rng), rand_normal(rng));
        }
        CHECK(metrics::suf_gap_regression(p, 33).value == oracle::brute_suf_gap_regression(p, 33));
    }
}

TEST_CASE("suf_gap invariances: group swap and monotone transforms") {
    auto rng = make_rng(53);
    PredictionSet p;
    p.task = models::Task::regression;
    for (int i = 0; i < 120; ++i) {
        p.push(static_cast<int>(rand_index(rng, 2)), rand_normal(rng), 0.7 * rand_normal(rng) + 0.2);
    }
    auto base = metrics::suf_gap_regression(p, 21).value;
    CHECK(base >= 0.0);
    CHECK(base <= 1.0);

    PredictionSet swapped = p;
    for (auto& g : swapped.group) g = 1 - g;
    CHECK(metrics::suf_gap_regression(swapped, 21).value == base);

    // common strictly increasing map applied to both Y and Yhat
    PredictionSet mapped = p;
    auto monotone = [](double v) { return std::exp(0.5 * v) + 2.0 * v; };
    for (auto& v : mapped.y_true) v = monotone(v);
    for (auto& v : mapped.y_score) v = monotone(v);
    CHECK(metrics::suf_gap_regression(mapped, 21).value == doctest::Approx(base).epsilon(1e-12));

    // classification: monotone sign-preserving transforms leave the gap alone
    PredictionSet c;
    c.task = models::Task::binary_classification;
    for (int i = 0; i < 120; ++i) {
        c.push(static_cast<int>(rand_index(rng, 2)), rand_uniform(rng) < 0.5 ? -1.0 : 1.0, rand_normal(rng));
    }
    auto cbase = metrics::suf_gap_classification(c).value;
    PredictionSet cmapped = c;
    for (auto& v : cmapped.y_score) v = v * 3.0 + (v > 0 ? 1.0 : -1.0) * 0.1;
    CHECK(metrics::suf_gap_classification(cmapped).value == cbase);
}

TEST_CASE("performance: perfect predictions and unweighted group mean") {
    auto p = regression_set({{0, 1.0, 1.0}, {1, 2.0, 2.0}});
    auto perf = metrics::performance(p);
    CHECK(perf.mean == doctest::Approx(0.0));

    // group 0 accuracy 0.8 (4/5), group 1 accuracy 0.6 (3/5) -> 0.7 regardless of sizes
    PredictionSet c;
    c.task = models::Task::binary_classification;
    for (int i = 0; i < 5; ++i) c.push(0, 1.0, i < 4 ? 1.0 : -1.0);
    for (int i = 0; i < 5; ++i) c.push(1, 1.0, i < 3 ? 1.0 : -1.0);
    CHECK(metrics::performance(c).mean == doctest::Approx(0.7));

    // doubling group 1 size leaves the unweighted mean unchanged
    for (int i = 0; i < 5; ++i) c.push(1, 1.0, i < 3 ? 1.0 : -1.0);
    CHECK(metrics::performance(c).mean == doctest::Approx(0.7));
}

TEST_CASE("performance: matches a scalar loop on a random set") {
    auto rng = make_rng(59);
    PredictionSet p;
    p.task = models::Task::regression;
    double se[2] = {0, 0};
    long n[2] = {0, 0};
    for (int i = 0; i < 300; ++i) {
        int g = static_cast<int>(rand_index(rng, 2));
        double y = rand_normal(rng), s = rand_normal(rng);
        p.push(g, y, s);
        se[g] += (s - y) * (s - y);
        ++n[g];
    }
    CHECK(metrics::performance(p).mean == doctest::Approx(0.5 * (se[0] / n[0] + se[1] / n[1])).epsilon(1e-15));
}

TEST_CASE("head_distance: basic cases and the scalar loop") {
    auto h0 = models::Head::zeros(3, models::Task::regression);
    auto h1 = models::Head::zeros(3, models::Task::regression);
    CHECK(metrics::head_distance(h0, h1) == doctest::Approx(0.0));
    h1.params.values[3] = 1.0;  // unit bias difference
    CHECK(metrics::head_distance(h0, h1) == doctest::Approx(1.0));

    auto rng = make_rng(61);
    auto a = models::Head::init(5, models::Task::regression, 3);
    auto b = models::Head::init(5, models::Task::regression, 4);
    double s = 0.0;
    for (std::size_t i = 0; i < a.params.values.size(); ++i) {
        double d = a.params.values[i] - b.params.values[i];
        s += d * d;
    }
    CHECK(metrics::head_distance(a, b) == doctest::Approx(std::sqrt(s)).epsilon(1e-12));
    (void)rng;
}

TEST_CASE("head_distance: layout mismatch is rejected") {
    auto h0 = models::Head::zeros(3, models::Task::regression);
    auto h1 = models::Head::zeros(4, models::Task::regression);
    CHECK_THROWS_AS(metrics::head_distance(h0, h1), std::invalid_argument);
}

TEST_CASE("pearson: independent, identical and degenerate cases") {
    auto rng = make_rng(67);
    std::vector<int> group;
    std::vector<double> y;
    for (int i = 0; i < 4000; ++i) {
        group.push_back(static_cast<int>(rand_index(rng, 2)));
        y.push_back(rand_normal(rng));
    }
    CHECK(std::fabs(metrics::pearson(group, y)) < 0.05);

    std::vector<double> same(group.begin(), group.end());
    CHECK(metrics::pearson(group, same) == doctest::Approx(1.0));

    std::vector<double> constant(group.size(), 3.0);
    CHECK_THROWS_AS(metrics::pearson(group, constant), std::invalid_argument);
}

TEST_CASE("gap report serializes to json") {
    auto p = classification_set({{0, 1, 1.0}, {0, -1, -1.0}, {1, 1, 1.0}, {1, -1, -1.0}});
    auto rep = metrics::suf_gap_classification(p);
    auto text = rep.to_json();
    CHECK(text.find("\"value\"") != std::string::npos);
    CHECK(text.find("\"terms\"") != std::string::npos);
    CHECK(text.find("\"skipped\"") != std::string::npos);
}
