#include "fairpath/baselines.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include "fairpath/autodiff.hpp"
#include "fairpath/eval.hpp"
#include "fairpath/metrics.hpp"
#include "fairpath/optim.hpp"

namespace fairpath::baselines {

const char* method_name(Method m) {
    switch (m) {
        case Method::erm: return "erm";
        case Method::one_step: return "one_step";
        case Method::irm_v1: return "irm_v1";
        case Method::mean_match: return "mean_match";
        case Method::two_head_erm: return "two_head_erm";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    if (name == "erm") return Method::erm;
    if (name == "one_step") return Method::one_step;
    if (name == "irm_v1") return Method::irm_v1;
    if (name == "mean_match") return Method::mean_match;
    if (name == "two_head_erm") return Method::two_head_erm;
    throw std::invalid_argument("unknown baseline method '" + name + "'");
}

void BaselineConfig::validate() const {
    if (reg_coeff < 0.0) throw std::invalid_argument("baseline config: reg_coeff must be >= 0");
    if ((method == Method::erm || method == Method::two_head_erm) && reg_coeff != 0.0) {
        throw std::invalid_argument("baseline config: reg_coeff must be 0 for erm");
    }
    if (!(outer_lr > 0.0)) throw std::invalid_argument("baseline config: outer_lr must be positive");
    if (!(adam_eps > 0.0)) throw std::invalid_argument("baseline config: adam_eps must be positive");
    if (batch_size_per_group < 1) throw std::invalid_argument("baseline config: batch_size_per_group must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("baseline config: max_epochs must be >= 1");
}

namespace {

// Penalty of one IRM_v1 group: || d/dw L_g(w * scores) at w = 1 ||^2 with a
// scalar dummy multiplier on the shared predictor.
int record_irm_penalty(Tape& tape, int scores_id, int labels_id, models::LossKind loss) {
    int w = tape.leaf(Tensor::scalar(1.0), /*requires_grad=*/true);
    int wb = tape.bfill(w, tape.value(scores_id).shape);
    int scaled = tape.mul(scores_id, wb);
    int lw = models::record_loss(tape, scaled, labels_id, loss);
    std::vector<int> wrt{w};
    auto adj = tape.backward(lw, wrt);
    if (adj[0] < 0) return tape.constant_scalar(0.0);
    return tape.square(adj[0]);
}

// || grad_h L0 - grad_h L1 ||^2 through the taped backward, so the penalty
// gradient reaches the representation via the second-order terms.
int record_incoherence_penalty(Tape& tape, int loss0, int loss1, const TapeBinding& h0, const TapeBinding& h1) {
    auto g0 = tape.backward(loss0, h0.leaf_ids);
    auto g1 = tape.backward(loss1, h1.leaf_ids);
    int pen = -1;
    for (std::size_t i = 0; i < g0.size(); ++i) {
        if (g0[i] < 0 && g1[i] < 0) continue;
        int a = g0[i] >= 0 ? g0[i] : tape.constant(Tensor::zeros(tape.value(g1[i]).shape));
        int b = g1[i] >= 0 ? g1[i] : tape.constant(Tensor::zeros(tape.value(g0[i]).shape));
        int term = tape.sum(tape.square(tape.sub(a, b)));
        pen = pen < 0 ? term : tape.add(pen, term);
    }
    return pen < 0 ? tape.constant_scalar(0.0) : pen;
}

}  // namespace

BaselineResult train_baseline(models::ReprNet net, models::Head head, const data::GroupedDataset& ds,
                              const BaselineConfig& cfg, const bilevel::TrainOptions& opt) {
    cfg.validate();
    const auto loss = models::loss_for_task(head.task);
    const bool per_group_eval = cfg.method == Method::one_step || cfg.method == Method::two_head_erm;
    const bool persist = cfg.method == Method::one_step && cfg.persist_one_step_heads;

    const auto n_train0 = ds.indices_of(data::Split::train, 0).size();
    const auto n_train1 = ds.indices_of(data::Split::train, 1).size();
    const int steps_per_epoch = std::max(
        1, static_cast<int>((std::max(n_train0, n_train1) + cfg.batch_size_per_group - 1) / cfg.batch_size_per_group));

    data::BatchStream stream(ds, data::Split::train, cfg.batch_size_per_group, opt.seed);
    Adam adam_net, adam_head;
    adam_net.eps = cfg.adam_eps;
    adam_head.eps = cfg.adam_eps;

    models::Head h0 = head;  // persist mode only
    models::Head h1 = head;

    BaselineResult result;
    result.head0 = head;
    result.head1 = head;
    try {
        for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
            const auto t_start = std::chrono::steady_clock::now();
            double grad_norm_sum = 0.0;
            for (int s = 0; s < steps_per_epoch; ++s) {
                auto batch = stream.next();
                Tape tape;
                auto lambda_b = bind_params(tape, net.params);
                int x0 = tape.constant(batch.x0);
                int x1 = tape.constant(batch.x1);
                int z0 = models::record_embed(tape, lambda_b, x0, net);
                int z1 = models::record_embed(tape, lambda_b, x1, net);
                int y0 = tape.constant(batch.y0);
                int y1 = tape.constant(batch.y1);

                TapeBinding head_b = bind_params(tape, head.params);
                TapeBinding h0_b = head_b;
                TapeBinding h1_b = head_b;
                if (persist) {
                    h0_b = bind_params(tape, h0.params);
                    h1_b = bind_params(tape, h1.params);
                }
                int s0 = models::record_scores(tape, h0_b, z0);
                int s1 = models::record_scores(tape, h1_b, z1);
                int loss0 = models::record_loss(tape, s0, y0, loss);
                int loss1 = models::record_loss(tape, s1, y1, loss);

                int total;
                switch (cfg.method) {
                    case Method::erm:
                    case Method::irm_v1:
                    case Method::mean_match:
                        total = tape.affine(tape.add(loss0, loss1), 0.5, 0.0);  // pooled mean, equal group batches
                        break;
                    case Method::one_step:
                    case Method::two_head_erm:
                        total = tape.add(loss0, loss1);
                        break;
                }
                if (cfg.method == Method::irm_v1 && cfg.reg_coeff != 0.0) {
                    int pen = tape.add(record_irm_penalty(tape, s0, y0, loss), record_irm_penalty(tape, s1, y1, loss));
                    total = tape.add(total, tape.affine(pen, cfg.reg_coeff, 0.0));
                }
                if (cfg.method == Method::mean_match && cfg.reg_coeff != 0.0) {
                    int pen = tape.square(tape.sub(tape.mean(s0), tape.mean(s1)));
                    total = tape.add(total, tape.affine(pen, cfg.reg_coeff, 0.0));
                }
                if (cfg.method == Method::one_step && cfg.reg_coeff != 0.0) {
                    int pen = record_incoherence_penalty(tape, loss0, loss1, h0_b, h1_b);
                    total = tape.add(total, tape.affine(pen, cfg.reg_coeff, 0.0));
                }

                ParamVector g_net = grad(tape, lambda_b, total);
                grad_norm_sum += g_net.norm2();
                adam_net.step(net.params, g_net, cfg.outer_lr);
                if (net.norm_cap) net.params.project_norm(*net.norm_cap);

                if (persist) {
                    // per-group heads take one plain gradient step on their own loss
                    ParamVector gh0 = grad(tape, h0_b, loss0);
                    ParamVector gh1 = grad(tape, h1_b, loss1);
                    h0.params.axpy(-cfg.one_step_head_lr, gh0);
                    h1.params.axpy(-cfg.one_step_head_lr, gh1);
                } else {
                    ParamVector g_head = grad(tape, head_b, total);
                    adam_head.step(head.params, g_head, cfg.outer_lr);
                    if (head.norm_cap) head.params.project_norm(*head.norm_cap);
                }
            }

            // one_step evaluates with its own T = 1 semantics: one head step
            // per group from the trained shared initialization on full train
            models::Head eval0 = head;
            models::Head eval1 = head;
            if (per_group_eval) {
                if (persist) {
                    eval0 = h0;
                    eval1 = h1;
                } else {
                    const auto full = full_train_batches(ds);
                    Tensor z0 = models::embed(net, full.x0);
                    Tensor z1 = models::embed(net, full.x1);
                    eval0 = bilevel::fit_head_gd(z0, full.y0, head, loss, cfg.one_step_head_lr, 1, 0.0).head;
                    eval1 = bilevel::fit_head_gd(z1, full.y1, head, loss, cfg.one_step_head_lr, 1, 0.0).head;
                }
            }
            result.head0 = eval0;
            result.head1 = eval1;

            RunRecord rec;
            rec.epoch = epoch;
            rec.method = method_name(cfg.method);
            rec.param_value = cfg.reg_coeff;
            rec.perf_train = evaluate_split(ds, net, eval0, eval1, data::Split::train, cfg.suf_points, false).perf;
            rec.perf_val = evaluate_split(ds, net, eval0, eval1, data::Split::val, cfg.suf_points, false).perf;
            auto test_eval = evaluate_split(ds, net, eval0, eval1, data::Split::test, cfg.suf_points, true);
            rec.perf_test = test_eval.perf;
            rec.suf_gap_test = test_eval.suf_gap;
            rec.head_distance = per_group_eval ? metrics::head_distance(eval0, eval1) : 0.0;
            rec.grad_norm = grad_norm_sum / steps_per_epoch;
            rec.inner_steps = cfg.method == Method::one_step ? 1.0 : 0.0;
            rec.cg_iters = 0.0;
            rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
            rec.seed = opt.seed;
            rec.config_hash = opt.config_hash;
            rec.data_hash = opt.data_hash;
            result.records.push_back(std::move(rec));
        }
    } catch (const std::exception& e) {
        throw TrainAbort(e.what(), std::move(result.records));
    }
    result.net = std::move(net);
    return result;
}

BaselineResult train_erm(models::ReprNet net, models::Head head, const data::GroupedDataset& ds, BaselineConfig cfg,
                         const bilevel::TrainOptions& opt) {
    cfg.method = Method::erm;
    cfg.reg_coeff = 0.0;
    return train_baseline(std::move(net), std::move(head), ds, cfg, opt);
}

BaselineResult train_one_step(models::ReprNet net, models::Head head, const data::GroupedDataset& ds, BaselineConfig cfg,
                              const bilevel::TrainOptions& opt) {
    cfg.method = Method::one_step;
    return train_baseline(std::move(net), std::move(head), ds, cfg, opt);
}

BaselineResult train_irm_v1(models::ReprNet net, models::Head head, const data::GroupedDataset& ds, BaselineConfig cfg,
                            const bilevel::TrainOptions& opt) {
    cfg.method = Method::irm_v1;
    return train_baseline(std::move(net), std::move(head), ds, cfg, opt);
}

}  // namespace fairpath::baselines
