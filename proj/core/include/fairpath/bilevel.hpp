#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fairpath/data_io.hpp"
#include "fairpath/models.hpp"
#include "fairpath/param_vector.hpp"
#include "fairpath/run_record.hpp"

namespace fairpath::bilevel {

enum class InnerSolver : std::uint8_t { gd, exact };

struct BilevelConfig {
    double kappa = 0.0;                // fair-constraint coefficient
    double inner_lr = 0.1;
    int inner_max_steps = 20;
    double inner_tol_eps = 1e-4;       // inner gradient-norm threshold (epsilon)
    int cg_max_iters = 10;
    double cg_tol_delta = 1e-6;        // CG residual-norm threshold (delta)
    double outer_lr = 1e-3;
    double adam_eps = 1e-3;
    double hessian_damping = 1e-5;
    int batch_size_per_group = 500;
    int max_epochs = 100;
    bool warm_start_heads = true;
    InnerSolver inner_solver = InnerSolver::gd;
    int suf_points = 33;

    void validate() const;
};

struct GroupBatch {
    Tensor x;
    Tensor y;  // (n x 1)
};

struct InnerSolution {
    models::Head head0;
    models::Head head1;
    double achieved_grad_norm0 = 0.0;
    double achieved_grad_norm1 = 0.0;
    int steps_used = 0;  // total over both heads
    bool converged0 = false;
    bool converged1 = false;
};

struct CgResult {
    ParamVector x;
    double residual_norm = 0.0;
    int iters = 0;
    bool converged = false;
};

struct PPair {
    ParamVector p0;
    ParamVector p1;
    double residual0 = 0.0;
    double residual1 = 0.0;
    int iters0 = 0;
    int iters1 = 0;
};

struct ImplicitGradient {
    ParamVector grad_lambda;
    ParamVector p0;
    ParamVector p1;
    double cg_residual0 = 0.0;
    double cg_residual1 = 0.0;
};

// Relaxed outer objective L0 + L1 + (kappa/2) ||h0 - h1||^2, the penalty over
// the concatenated head parameters (weights and bias).
double outer_objective(const models::ReprNet& net, const InnerSolution& sol, const GroupBatch& b0, const GroupBatch& b1,
                       double kappa, models::LossKind loss);

// Fits one head on a fixed embedding by gradient descent until the gradient
// norm reaches tol or the step budget runs out. Aborts when the loss grows
// 10x from its start.
struct HeadFit {
    models::Head head;
    double achieved_grad_norm = 0.0;
    int steps_used = 0;
    bool converged = false;
};
HeadFit fit_head_gd(const Tensor& z, const Tensor& y, models::Head head, models::LossKind loss, double lr, int max_steps,
                    double tol);

// Closed-form damped normal-equations fit (square loss only).
HeadFit fit_head_exact(const Tensor& z, const Tensor& y, models::Head head, double damping = 0.0);

// Solves both heads independently at a fixed representation.
InnerSolution solve_inner(const models::ReprNet& net, const GroupBatch& b0, const GroupBatch& b1,
                          const BilevelConfig& cfg, const models::Head& init0, const models::Head& init1,
                          models::LossKind loss);

// Conjugate gradient on a symmetric positive-definite operator, started from
// x0, stopping when ||b - A x|| <= tol.
using HvpFn = std::function<ParamVector(const ParamVector&)>;
CgResult cg_solve(const HvpFn& apply, const ParamVector& b, const ParamVector& x0, int max_iters, double tol);

// Solves the two quadratic programs for p0 and p1 via cg_solve with
// autodiff Hessian-vector products of the per-group head losses.
PPair compute_p(const models::ReprNet& net, const InnerSolution& sol, const GroupBatch& b0, const GroupBatch& b1,
                const BilevelConfig& cfg, models::LossKind loss);

// Assembles the implicit outer gradient
//   grad = dL0/dl - (dl dh0 L0)^T p0 + dL1/dl - (dl dh1 L1)^T p1
// with the mixed terms as vector-Jacobian products (no materialized Jacobian).
ImplicitGradient implicit_grad(const models::ReprNet& net, const InnerSolution& sol, const PPair& pp,
                               const GroupBatch& b0, const GroupBatch& b1, models::LossKind loss);

// One full outer step on a fixed batch pair: inner solve, p-systems, gradient.
struct OuterStep {
    InnerSolution sol;
    PPair pp;
    ImplicitGradient grad;
};
OuterStep outer_step(const models::ReprNet& net, const GroupBatch& b0, const GroupBatch& b1, const BilevelConfig& cfg,
                     const models::Head& init0, const models::Head& init1, models::LossKind loss);

struct TrainOptions {
    std::uint64_t seed = 0;
    std::string method_name = "implicit";
    std::string config_hash;
    std::string data_hash;
};

struct TrainResult {
    std::vector<RunRecord> records;
    models::ReprNet net;
    models::Head head0;
    models::Head head1;
};

// Implicit path alignment training loop: per mini-batch pair, solve the inner
// problem to eps, the p-systems to delta, assemble the implicit gradient and
// take an Adam step on the representation.
TrainResult train(models::ReprNet net, models::Head head0, models::Head head1, const data::GroupedDataset& ds,
                  const BilevelConfig& cfg, const TrainOptions& opt);

}  // namespace fairpath::bilevel
