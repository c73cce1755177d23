#pragma once

#include "fairpath/data_io.hpp"
#include "fairpath/metrics.hpp"
#include "fairpath/models.hpp"

namespace fairpath {

// Piecewise predictions: rows of group g are scored with head_g on the shared
// embedding. Pass the same head twice for shared-head methods.
metrics::PredictionSet predict_split(const data::GroupedDataset& ds, const models::ReprNet& net,
                                     const models::Head& head0, const models::Head& head1, data::Split split);

struct SplitEval {
    double perf = 0.0;     // MSE or accuracy
    double suf_gap = 0.0;  // only filled when with_gap
};

SplitEval evaluate_split(const data::GroupedDataset& ds, const models::ReprNet& net, const models::Head& head0,
                         const models::Head& head1, data::Split split, int suf_points, bool with_gap);

// Full per-group train batches, for solving the inner problem on the whole
// split when reporting.
struct TrainBatches {
    Tensor x0, y0, x1, y1;
};
TrainBatches full_train_batches(const data::GroupedDataset& ds);

}  // namespace fairpath
