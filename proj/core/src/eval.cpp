#include "fairpath/eval.hpp"

namespace fairpath {

metrics::PredictionSet predict_split(const data::GroupedDataset& ds, const models::ReprNet& net,
                                     const models::Head& head0, const models::Head& head1, data::Split split) {
    metrics::PredictionSet preds;
    preds.task = ds.task;
    for (int g = 0; g < 2; ++g) {
        auto idx = ds.indices_of(split, g);
        if (idx.empty()) continue;
        Tensor x = ds.gather_features(idx);
        Tensor scores = models::predict(g == 0 ? head0 : head1, net, x);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            preds.push(g, ds.labels[static_cast<std::size_t>(idx[r])], scores.data[r]);
        }
    }
    return preds;
}

SplitEval evaluate_split(const data::GroupedDataset& ds, const models::ReprNet& net, const models::Head& head0,
                         const models::Head& head1, data::Split split, int suf_points, bool with_gap) {
    auto preds = predict_split(ds, net, head0, head1, split);
    SplitEval out;
    out.perf = metrics::performance(preds).mean;
    if (with_gap) {
        out.suf_gap = ds.task == models::Task::regression ? metrics::suf_gap_regression(preds, suf_points).value
                                                          : metrics::suf_gap_classification(preds).value;
    }
    return out;
}

TrainBatches full_train_batches(const data::GroupedDataset& ds) {
    TrainBatches out;
    auto idx0 = ds.indices_of(data::Split::train, 0);
    auto idx1 = ds.indices_of(data::Split::train, 1);
    out.x0 = ds.gather_features(idx0);
    out.y0 = ds.gather_labels(idx0);
    out.x1 = ds.gather_features(idx1);
    out.y1 = ds.gather_labels(idx1);
    return out;
}

}  // namespace fairpath
