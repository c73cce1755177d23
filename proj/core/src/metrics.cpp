#include "fairpath/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace fairpath::metrics {

void PredictionSet::push(int g, double y, double score) {
    group.push_back(g);
    y_true.push_back(y);
    y_score.push_back(score);
}

void PredictionSet::validate(const char* what) const {
    if (group.size() != y_true.size() || group.size() != y_score.size()) {
        throw std::invalid_argument(std::string(what) + ": ragged prediction set");
    }
    bool has0 = false, has1 = false;
    for (std::size_t i = 0; i < group.size(); ++i) {
        if (group[i] != 0 && group[i] != 1) throw std::invalid_argument(std::string(what) + ": group index not in {0,1}");
        (group[i] == 0 ? has0 : has1) = true;
        if (task == models::Task::binary_classification && y_true[i] != 1.0 && y_true[i] != -1.0) {
            throw std::invalid_argument(std::string(what) + ": classification labels must be in {-1,+1}");
        }
    }
    if (!has0 || !has1) throw std::invalid_argument(std::string(what) + ": both groups must be non-empty");
}

std::string GapReport::to_json() const {
    nlohmann::json j;
    j["value"] = value;
    j["terms"] = terms;
    j["skipped"] = skipped;
    if (!thresholds.empty()) j["thresholds"] = thresholds;
    return j.dump();
}

GapReport suf_gap_classification(const PredictionSet& preds) {
    preds.validate("suf_gap_classification");
    if (preds.task != models::Task::binary_classification) {
        throw std::invalid_argument("suf_gap_classification: prediction set is not a classification task");
    }
    GapReport rep;
    // counts[group][predicted class] and matches where Y == Yhat
    for (double cls : {1.0, -1.0}) {
        long pred0 = 0, pred1 = 0, match0 = 0, match1 = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            double yhat = preds.y_score[i] > 0.0 ? 1.0 : -1.0;
            if (yhat != cls) continue;
            if (preds.group[i] == 0) {
                ++pred0;
                if (preds.y_true[i] == cls) ++match0;
            } else {
                ++pred1;
                if (preds.y_true[i] == cls) ++match1;
            }
        }
        if (pred0 == 0 || pred1 == 0) {
            rep.terms.push_back(0.0);
            rep.skipped.push_back(true);
            continue;
        }
        double d0 = static_cast<double>(match0) / static_cast<double>(pred0);
        double d1 = static_cast<double>(match1) / static_cast<double>(pred1);
        rep.terms.push_back(std::fabs(d0 - d1));
        rep.skipped.push_back(false);
    }
    if (rep.skipped[0] && rep.skipped[1]) {
        throw std::runtime_error("suf_gap_classification: both classes lack predictions in one group, gap undefined");
    }
    rep.value = 0.5 * (rep.terms[0] + rep.terms[1]);
    return rep;
}

namespace {

// Empirical quantiles of the pooled score distribution at q = i/(m+1),
// i = 1..m, by nearest rank on the sorted scores.
std::vector<double> pooled_quantiles(const std::vector<double>& scores, int m) {
    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> t(static_cast<std::size_t>(m));
    const double n1 = static_cast<double>(sorted.size() - 1);
    for (int i = 1; i <= m; ++i) {
        double q = static_cast<double>(i) / static_cast<double>(m + 1);
        auto idx = static_cast<std::size_t>(std::llround(q * n1));
        t[static_cast<std::size_t>(i - 1)] = sorted[idx];
    }
    return t;
}

}  // namespace

GapReport suf_gap_regression(const PredictionSet& preds, int m) {
    preds.validate("suf_gap_regression");
    if (preds.task != models::Task::regression) {
        throw std::invalid_argument("suf_gap_regression: prediction set is not a regression task");
    }
    if (m < 2) throw std::invalid_argument("suf_gap_regression: need m >= 2 sample points");

    GapReport rep;
    rep.thresholds = pooled_quantiles(preds.y_score, m);
    double acc = 0.0;
    int used = 0;
    for (double t : rep.thresholds) {
        long cond0 = 0, cond1 = 0, joint0 = 0, joint1 = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            if (preds.y_score[i] > t) continue;
            if (preds.group[i] == 0) {
                ++cond0;
                if (preds.y_true[i] <= t) ++joint0;
            } else {
                ++cond1;
                if (preds.y_true[i] <= t) ++joint1;
            }
        }
        if (cond0 == 0 || cond1 == 0) {
            rep.terms.push_back(0.0);
            rep.skipped.push_back(true);
            continue;
        }
        double d0 = static_cast<double>(joint0) / static_cast<double>(cond0);
        double d1 = static_cast<double>(joint1) / static_cast<double>(cond1);
        double diff = std::fabs(d0 - d1);
        rep.terms.push_back(diff);
        rep.skipped.push_back(false);
        acc += diff;
        ++used;
    }
    if (used == 0) throw std::runtime_error("suf_gap_regression: every sample point skipped, gap undefined");
    rep.value = acc / static_cast<double>(used);
    return rep;
}

Performance performance(const PredictionSet& preds) {
    preds.validate("performance");
    double acc[2] = {0.0, 0.0};
    long n[2] = {0, 0};
    for (std::size_t i = 0; i < preds.size(); ++i) {
        int g = preds.group[i];
        ++n[g];
        if (preds.task == models::Task::regression) {
            double e = preds.y_score[i] - preds.y_true[i];
            acc[g] += e * e;
        } else {
            double yhat = preds.y_score[i] > 0.0 ? 1.0 : -1.0;
            acc[g] += yhat == preds.y_true[i] ? 1.0 : 0.0;
        }
    }
    Performance p;
    p.group0 = acc[0] / static_cast<double>(n[0]);
    p.group1 = acc[1] / static_cast<double>(n[1]);
    p.mean = 0.5 * (p.group0 + p.group1);
    return p;
}

double head_distance(const models::Head& h0, const models::Head& h1) {
    h0.params.require_same_layout("head_distance", h1.params);
    return (h0.params - h1.params).norm2();
}

double pearson(const std::vector<int>& group, const std::vector<double>& y) {
    if (group.size() != y.size() || group.empty()) throw std::invalid_argument("pearson: size mismatch");
    const double n = static_cast<double>(group.size());
    double mg = 0.0, my = 0.0;
    for (std::size_t i = 0; i < group.size(); ++i) {
        mg += group[i];
        my += y[i];
    }
    mg /= n;
    my /= n;
    double sgg = 0.0, syy = 0.0, sgy = 0.0;
    for (std::size_t i = 0; i < group.size(); ++i) {
        double dg = group[i] - mg;
        double dy = y[i] - my;
        sgg += dg * dg;
        syy += dy * dy;
        sgy += dg * dy;
    }
    if (sgg == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: zero variance in group or label");
    return sgy / std::sqrt(sgg * syy);
}

double mean_output_gap(const PredictionSet& preds) {
    preds.validate("mean_output_gap");
    double s[2] = {0.0, 0.0};
    long n[2] = {0, 0};
    for (std::size_t i = 0; i < preds.size(); ++i) {
        s[preds.group[i]] += preds.y_score[i];
        ++n[preds.group[i]];
    }
    return std::fabs(s[0] / static_cast<double>(n[0]) - s[1] / static_cast<double>(n[1]));
}

}  // namespace fairpath::metrics
