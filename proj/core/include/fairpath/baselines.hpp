#pragma once

#include <cstdint>
#include <string>

#include "fairpath/bilevel.hpp"
#include "fairpath/data_io.hpp"
#include "fairpath/models.hpp"
#include "fairpath/run_record.hpp"

namespace fairpath::baselines {

// two_head_erm is the reg_coeff = 0 degenerate of one_step (per-group losses,
// shared trainable head, no penalty); mean_match adds an independence-style
// penalty on the group mean outputs.
enum class Method : std::uint8_t { erm, one_step, irm_v1, mean_match, two_head_erm };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

struct BaselineConfig {
    Method method = Method::erm;
    double reg_coeff = 0.0;
    double outer_lr = 1e-3;
    double adam_eps = 1e-3;
    int batch_size_per_group = 500;
    int max_epochs = 100;
    int suf_points = 33;
    double head_refit_tol = 1e-6;
    // one_step: keep per-group heads across outer steps instead of resetting
    // to the shared initialization.
    bool persist_one_step_heads = false;
    double one_step_head_lr = 0.1;

    void validate() const;
};

struct BaselineResult {
    std::vector<RunRecord> records;
    models::ReprNet net;
    models::Head head0;
    models::Head head1;
};

// Single entry point; `head` is the shared head (or the shared one-step
// initialization h(0)).
BaselineResult train_baseline(models::ReprNet net, models::Head head, const data::GroupedDataset& ds,
                              const BaselineConfig& cfg, const bilevel::TrainOptions& opt);

BaselineResult train_erm(models::ReprNet net, models::Head head, const data::GroupedDataset& ds, BaselineConfig cfg,
                         const bilevel::TrainOptions& opt);
BaselineResult train_one_step(models::ReprNet net, models::Head head, const data::GroupedDataset& ds, BaselineConfig cfg,
                              const bilevel::TrainOptions& opt);
BaselineResult train_irm_v1(models::ReprNet net, models::Head head, const data::GroupedDataset& ds, BaselineConfig cfg,
                            const bilevel::TrainOptions& opt);

}  // namespace fairpath::baselines
