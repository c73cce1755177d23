#pragma once

#include <string>
#include <vector>

#include "fairpath/models.hpp"

namespace fairpath::metrics {

// Per-sample prediction record; scores are raw (regression values or logits).
struct PredictionSet {
    std::vector<int> group;      // 0 or 1
    std::vector<double> y_true;  // real, or {-1,+1} for classification
    std::vector<double> y_score;
    models::Task task = models::Task::regression;

    std::size_t size() const { return group.size(); }
    void push(int g, double y, double score);
    void validate(const char* what) const;
};

struct GapReport {
    double value = 0.0;
    std::vector<double> terms;       // per-class or per-threshold |d0 - d1|
    std::vector<bool> skipped;       // true where a term had an empty conditioning set
    std::vector<double> thresholds;  // regression only: the sampled t_i

    std::string to_json() const;
};

// Sufficiency gap for binary classification: half the summed absolute PPV and
// NPV differences. Scores are thresholded at 0 (score > 0 maps to +1).
GapReport suf_gap_classification(const PredictionSet& preds);

// Sufficiency gap for regression over m pooled-score quantile thresholds:
// mean of |D0(Y<=t | Yhat<=t) - D1(Y<=t | Yhat<=t)| over non-skipped points.
GapReport suf_gap_regression(const PredictionSet& preds, int m = 33);

// Unweighted mean over the two groups of per-group accuracy (classification)
// or per-group MSE (regression). Returns (group0, group1) via the pair and
// the mean through the first element of the returned struct.
struct Performance {
    double mean = 0.0;
    double group0 = 0.0;
    double group1 = 0.0;
};
Performance performance(const PredictionSet& preds);

double head_distance(const models::Head& h0, const models::Head& h1);

// Pearson correlation between the group indicator and the label.
double pearson(const std::vector<int>& group, const std::vector<double>& y);

// Demographic-parity style diagnostic: |mean score group0 - mean score group1|.
double mean_output_gap(const PredictionSet& preds);

}  // namespace fairpath::metrics
