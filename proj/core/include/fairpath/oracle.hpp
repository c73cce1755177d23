#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fairpath/bilevel.hpp"
#include "fairpath/metrics.hpp"
#include "fairpath/models.hpp"
#include "fairpath/param_vector.hpp"

// Independent verification machinery. Oracles use their own arithmetic
// (straight-line evaluation, private dense factorization, finite differences)
// and never call the engine code paths they check.
namespace fairpath::oracle {

struct OracleReport {
    std::string name;
    double oracle_value = 0.0;  // representative scalar (usually a norm)
    double engine_value = 0.0;
    double rel_error = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string note;

    std::string to_json() const;
    std::string to_line() const;
};

// Relative error with a floored denominator.
double rel_error(double diff_norm, double ref_norm, double floor = 1e-12);

using ScalarFn = std::function<double(const ParamVector&)>;

// Central finite differences, coordinate-wise.
ParamVector fd_gradient(const ScalarFn& f, const ParamVector& theta, double step);

// Plain-loop forward evaluation of a fully connected net (no tape).
Tensor straightline_forward(const std::vector<int>& arch, models::Activation hidden_act, models::Activation embed_act,
                            const ParamVector& params, const Tensor& x);
Tensor straightline_forward(const models::ReprNet& net, const Tensor& x);

// Plain-loop loss on an embedding with a linear head (w then bias in params).
double straightline_loss(const Tensor& z, const ParamVector& head_params, const Tensor& y, models::LossKind kind);

// Exact solve of a symmetric positive-definite system by a factorization
// private to this module. Rejects non-symmetric or non-SPD input.
std::vector<double> dense_spd_solve(const std::vector<double>& a, const std::vector<double>& b, int n);

// True outer objective at a representation: inner problems solved exactly by
// damped normal equations (square loss, linear heads only).
double true_bilevel_objective(const models::ReprNet& net, const bilevel::GroupBatch& b0, const bilevel::GroupBatch& b1,
                              double kappa, double ne_damping = 1e-12);

// Ground-truth outer gradient by central finite differences of the true
// objective, re-solving the inner problem exactly at every perturbed point.
ParamVector exact_bilevel_gradient(const models::ReprNet& net, const bilevel::GroupBatch& b0,
                                   const bilevel::GroupBatch& b1, double kappa, double fd_step = 1e-5,
                                   double ne_damping = 1e-12);

// Outer gradient by differentiating through T recorded inner gradient-descent
// steps (full unrolling). Memory grows with T; exceeding max_nodes reports an
// error, which is the cost this route is meant to exhibit.
ParamVector explicit_unrolled_step(const models::ReprNet& net, const models::Head& init0, const models::Head& init1,
                                   const bilevel::GroupBatch& b0, const bilevel::GroupBatch& b1, int t_steps,
                                   double kappa, double inner_lr, models::LossKind loss,
                                   std::size_t max_nodes = 80'000'000);

// Brute-force metric recounts (duplicated counting code, kept independent of
// the metrics module).
double brute_suf_gap_classification(const metrics::PredictionSet& preds);
double brute_suf_gap_regression(const metrics::PredictionSet& preds, int m);

// Median wall seconds over repetitions.
double time_median_seconds(const std::function<void()>& fn, int reps);

// Full verification battery. `filter` selects checks by substring; the
// mutation flag flips the sign of the implicit gradient inside the gradient
// fidelity check to prove the harness catches a broken engine.
std::vector<OracleReport> run_all_checks(const std::string& filter = "", bool mutate_implicit_sign = false);

}  // namespace fairpath::oracle
