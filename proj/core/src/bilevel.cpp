#include "fairpath/bilevel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "fairpath/autodiff.hpp"
#include "fairpath/eval.hpp"
#include "fairpath/linalg.hpp"
#include "fairpath/optim.hpp"

namespace fairpath::bilevel {

void BilevelConfig::validate() const {
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0)) throw std::invalid_argument(std::string("bilevel config: ") + name + " must be positive");
    };
    positive(inner_lr, "inner_lr");
    positive(inner_tol_eps, "inner_tol_eps");
    positive(cg_tol_delta, "cg_tol_delta");
    positive(outer_lr, "outer_lr");
    positive(adam_eps, "adam_eps");
    if (kappa < 0.0) throw std::invalid_argument("bilevel config: kappa must be >= 0");
    if (hessian_damping < 0.0) throw std::invalid_argument("bilevel config: hessian_damping must be >= 0");
    if (inner_max_steps < 1) throw std::invalid_argument("bilevel config: inner_max_steps must be >= 1");
    if (cg_max_iters < 1) throw std::invalid_argument("bilevel config: cg_max_iters must be >= 1");
    if (batch_size_per_group < 1) throw std::invalid_argument("bilevel config: batch_size_per_group must be >= 1");
    if (max_epochs < 1) throw std::invalid_argument("bilevel config: max_epochs must be >= 1");
    if (suf_points < 2) throw std::invalid_argument("bilevel config: suf_points must be >= 2");
}

double outer_objective(const models::ReprNet& net, const InnerSolution& sol, const GroupBatch& b0, const GroupBatch& b1,
                       double kappa, models::LossKind loss) {
    if (b0.x.numel() == 0 || b1.x.numel() == 0) {
        throw std::invalid_argument("outer_objective: one batch per group is required");
    }
    double l0 = models::group_loss(sol.head0, net, b0.x, b0.y, loss);
    double l1 = models::group_loss(sol.head1, net, b1.x, b1.y, loss);
    ParamVector diff = sol.head0.params - sol.head1.params;
    double d = diff.norm2();
    return l0 + l1 + 0.5 * kappa * d * d;
}

namespace {

ParamVector head_loss_grad(const Tensor& z, const Tensor& y, const models::Head& head, models::LossKind loss) {
    Tape tape;
    auto binding = bind_params(tape, head.params);
    int zc = tape.constant(z);
    int yc = tape.constant(y);
    int L = models::record_loss(tape, models::record_scores(tape, binding, zc), yc, loss);
    return grad(tape, binding, L);
}

}  // namespace

HeadFit fit_head_gd(const Tensor& z, const Tensor& y, models::Head head, models::LossKind loss, double lr, int max_steps,
                    double tol) {
    Tape tape;
    auto binding = bind_params(tape, head.params);
    int zc = tape.constant(z);
    int yc = tape.constant(y);
    int L = models::record_loss(tape, models::record_scores(tape, binding, zc), yc, loss);
    const std::size_t recorded = tape.size();
    const double loss0 = tape.value(L).scalar_value();

    HeadFit out;
    out.head = std::move(head);
    for (;;) {
        ParamVector g = grad(tape, binding, L);
        tape.truncate(recorded);
        out.achieved_grad_norm = g.norm2();
        if (out.achieved_grad_norm <= tol) {
            out.converged = true;
            break;
        }
        if (out.steps_used >= max_steps) break;
        out.head.params.axpy(-lr, g);
        if (out.head.norm_cap) out.head.params.project_norm(*out.head.norm_cap);
        ++out.steps_used;
        set_bound_params(tape, binding, out.head.params);
        tape.replay();
        const double cur = tape.value(L).scalar_value();
        if (!std::isfinite(cur) || (cur > 10.0 * loss0 && cur > 1e-12)) {
            throw std::runtime_error("solve_inner: head loss diverged (" + std::to_string(cur) + " from " +
                                     std::to_string(loss0) + " after " + std::to_string(out.steps_used) +
                                     " steps); reduce inner_lr");
        }
    }
    return out;
}

HeadFit fit_head_exact(const Tensor& z, const Tensor& y, models::Head head, double damping) {
    const int n = z.rows();
    const int e = z.cols();
    const int dim = e + 1;
    // A = (2/n) Zt^T Zt, rhs = (2/n) Zt^T y, with Zt = [Z 1]
    std::vector<double> a(static_cast<std::size_t>(dim) * dim, 0.0);
    std::vector<double> rhs(static_cast<std::size_t>(dim), 0.0);
    const double scale = 2.0 / static_cast<double>(n);
    for (int r = 0; r < n; ++r) {
        for (int i = 0; i < dim; ++i) {
            const double zi = i < e ? z.at(r, i) : 1.0;
            rhs[static_cast<std::size_t>(i)] += scale * zi * y.data[static_cast<std::size_t>(r)];
            for (int j = i; j < dim; ++j) {
                const double zj = j < e ? z.at(r, j) : 1.0;
                a[static_cast<std::size_t>(i) * dim + j] += scale * zi * zj;
            }
        }
    }
    for (int i = 0; i < dim; ++i) {
        for (int j = 0; j < i; ++j) a[static_cast<std::size_t>(i) * dim + j] = a[static_cast<std::size_t>(j) * dim + i];
    }
    std::vector<double> sol;
    double ridge = damping;
    for (int attempt = 0;; ++attempt) {
        std::vector<double> ar = a;
        for (int i = 0; i < dim; ++i) ar[static_cast<std::size_t>(i) * dim + i] += ridge;
        try {
            sol = cholesky_solve(std::move(ar), rhs, dim);
            break;
        } catch (const std::invalid_argument&) {
            if (attempt >= 3) throw;
            ridge = std::max(ridge * 100.0, 1e-10);
        }
    }
    HeadFit out;
    out.head = std::move(head);
    for (int i = 0; i < e; ++i) out.head.params.values[static_cast<std::size_t>(i)] = sol[static_cast<std::size_t>(i)];
    out.head.params.values[static_cast<std::size_t>(e)] = sol[static_cast<std::size_t>(e)];
    if (out.head.norm_cap) out.head.params.project_norm(*out.head.norm_cap);
    // report the undamped gradient norm at the solution
    double gn = 0.0;
    for (int i = 0; i < dim; ++i) {
        double gi = -rhs[static_cast<std::size_t>(i)];
        for (int j = 0; j < dim; ++j) gi += a[static_cast<std::size_t>(i) * dim + j] * sol[static_cast<std::size_t>(j)];
        gn += gi * gi;
    }
    out.achieved_grad_norm = std::sqrt(gn);
    out.steps_used = 1;
    out.converged = true;
    return out;
}

InnerSolution solve_inner(const models::ReprNet& net, const GroupBatch& b0, const GroupBatch& b1,
                          const BilevelConfig& cfg, const models::Head& init0, const models::Head& init1,
                          models::LossKind loss) {
    if (cfg.inner_solver == InnerSolver::exact && loss != models::LossKind::square) {
        throw std::invalid_argument("solve_inner: inner_solver=exact requires square loss");
    }
    Tensor z0 = models::embed(net, b0.x);
    Tensor z1 = models::embed(net, b1.x);
    models::require_labels(b0.y, z0.rows(), loss, "solve_inner");
    models::require_labels(b1.y, z1.rows(), loss, "solve_inner");

    InnerSolution sol;
    if (cfg.inner_solver == InnerSolver::exact) {
        HeadFit f0 = fit_head_exact(z0, b0.y, init0);
        HeadFit f1 = fit_head_exact(z1, b1.y, init1);
        sol.head0 = std::move(f0.head);
        sol.head1 = std::move(f1.head);
        sol.achieved_grad_norm0 = f0.achieved_grad_norm;
        sol.achieved_grad_norm1 = f1.achieved_grad_norm;
        sol.steps_used = f0.steps_used + f1.steps_used;
        sol.converged0 = f0.achieved_grad_norm <= cfg.inner_tol_eps;
        sol.converged1 = f1.achieved_grad_norm <= cfg.inner_tol_eps;
    } else {
        HeadFit f0 = fit_head_gd(z0, b0.y, init0, loss, cfg.inner_lr, cfg.inner_max_steps, cfg.inner_tol_eps);
        HeadFit f1 = fit_head_gd(z1, b1.y, init1, loss, cfg.inner_lr, cfg.inner_max_steps, cfg.inner_tol_eps);
        sol.head0 = std::move(f0.head);
        sol.head1 = std::move(f1.head);
        sol.achieved_grad_norm0 = f0.achieved_grad_norm;
        sol.achieved_grad_norm1 = f1.achieved_grad_norm;
        sol.steps_used = f0.steps_used + f1.steps_used;
        sol.converged0 = f0.converged;
        sol.converged1 = f1.converged;
    }
    return sol;
}

CgResult cg_solve(const HvpFn& apply, const ParamVector& b, const ParamVector& x0, int max_iters, double tol) {
    b.require_same_layout("cg_solve", x0);
    if (!b.all_finite()) throw std::invalid_argument("cg_solve: non-finite right-hand side");

    CgResult out;
    out.x = x0;
    ParamVector r = b;
    if (x0.norm2() > 0.0) {
        ParamVector ax = apply(x0);
        r.axpy(-1.0, ax);
    }
    double rr = r.dot(r);
    out.residual_norm = std::sqrt(rr);
    if (out.residual_norm <= tol) {
        out.converged = true;
        return out;
    }
    ParamVector p = r;
    for (int k = 0; k < max_iters; ++k) {
        ParamVector ap = apply(p);
        if (!ap.all_finite()) {
            throw std::runtime_error("cg_solve: non-finite operator output at iteration " + std::to_string(k) +
                                     "; raise hessian_damping");
        }
        const double pap = p.dot(ap);
        if (!(pap > 0.0) || !std::isfinite(pap)) {
            throw std::runtime_error("cg_solve: operator is not positive definite (p^T A p = " + std::to_string(pap) +
                                     "); raise hessian_damping");
        }
        const double alpha = rr / pap;
        out.x.axpy(alpha, p);
        r.axpy(-alpha, ap);
        const double rr_next = r.dot(r);
        out.iters = k + 1;
        out.residual_norm = std::sqrt(rr_next);
        if (out.residual_norm <= tol) {
            out.converged = true;
            return out;
        }
        const double beta = rr_next / rr;
        rr = rr_next;
        ParamVector p_next = r;
        p_next.axpy(beta, p);
        p = std::move(p_next);
    }
    return out;  // best iterate, not converged
}

PPair compute_p(const models::ReprNet& net, const InnerSolution& sol, const GroupBatch& b0, const GroupBatch& b1,
                const BilevelConfig& cfg, models::LossKind loss) {
    Tensor z0 = models::embed(net, b0.x);
    Tensor z1 = models::embed(net, b1.x);
    ParamVector head_diff = sol.head0.params - sol.head1.params;

    PPair out;
    for (int g = 0; g < 2; ++g) {
        const models::Head& head = g == 0 ? sol.head0 : sol.head1;
        const Tensor& z = g == 0 ? z0 : z1;
        const Tensor& y = g == 0 ? b0.y : b1.y;

        ParamVector rhs = head_loss_grad(z, y, head, loss);
        rhs.axpy(g == 0 ? cfg.kappa : -cfg.kappa, head_diff);

        HvpFn apply = [&](const ParamVector& v) {
            Tape tape;
            auto binding = bind_params(tape, head.params);
            int zc = tape.constant(z);
            int yc = tape.constant(y);
            int L = models::record_loss(tape, models::record_scores(tape, binding, zc), yc, loss);
            ParamVector hv = hvp(tape, binding, L, v);
            hv.axpy(cfg.hessian_damping, v);
            return hv;
        };
        CgResult r = cg_solve(apply, rhs, rhs.zeros_like(), cfg.cg_max_iters, cfg.cg_tol_delta);
        if (g == 0) {
            out.p0 = std::move(r.x);
            out.residual0 = r.residual_norm;
            out.iters0 = r.iters;
        } else {
            out.p1 = std::move(r.x);
            out.residual1 = r.residual_norm;
            out.iters1 = r.iters;
        }
    }
    return out;
}

ImplicitGradient implicit_grad(const models::ReprNet& net, const InnerSolution& sol, const PPair& pp,
                               const GroupBatch& b0, const GroupBatch& b1, models::LossKind loss) {
    Tape tape;
    auto lambda_binding = bind_params(tape, net.params);
    int x0 = tape.constant(b0.x);
    int x1 = tape.constant(b1.x);
    int z0 = models::record_embed(tape, lambda_binding, x0, net);
    int z1 = models::record_embed(tape, lambda_binding, x1, net);
    auto h0_binding = bind_params(tape, sol.head0.params);
    auto h1_binding = bind_params(tape, sol.head1.params);
    int y0 = tape.constant(b0.y);
    int y1 = tape.constant(b1.y);
    int loss0 = models::record_loss(tape, models::record_scores(tape, h0_binding, z0), y0, loss);
    int loss1 = models::record_loss(tape, models::record_scores(tape, h1_binding, z1), y1, loss);
    int loss_sum = tape.add(loss0, loss1);

    ImplicitGradient out;
    out.grad_lambda = grad(tape, lambda_binding, loss_sum);
    if (!out.grad_lambda.all_finite()) {
        throw std::runtime_error("implicit_grad: non-finite term grad_lambda(L0 + L1)");
    }
    ParamVector mixed0 = mixed_partial_vjp(tape, lambda_binding, h0_binding, loss0, pp.p0);
    if (!mixed0.all_finite()) throw std::runtime_error("implicit_grad: non-finite mixed-partial term for group 0");
    ParamVector mixed1 = mixed_partial_vjp(tape, lambda_binding, h1_binding, loss1, pp.p1);
    if (!mixed1.all_finite()) throw std::runtime_error("implicit_grad: non-finite mixed-partial term for group 1");
    out.grad_lambda.axpy(-1.0, mixed0);
    out.grad_lambda.axpy(-1.0, mixed1);
    out.p0 = pp.p0;
    out.p1 = pp.p1;
    out.cg_residual0 = pp.residual0;
    out.cg_residual1 = pp.residual1;
    return out;
}

OuterStep outer_step(const models::ReprNet& net, const GroupBatch& b0, const GroupBatch& b1, const BilevelConfig& cfg,
                     const models::Head& init0, const models::Head& init1, models::LossKind loss) {
    OuterStep out;
    out.sol = solve_inner(net, b0, b1, cfg, init0, init1, loss);
    out.pp = compute_p(net, out.sol, b0, b1, cfg, loss);
    out.grad = implicit_grad(net, out.sol, out.pp, b0, b1, loss);
    return out;
}

TrainResult train(models::ReprNet net, models::Head head0, models::Head head1, const data::GroupedDataset& ds,
                  const BilevelConfig& cfg, const TrainOptions& opt) {
    cfg.validate();
    const auto loss = models::loss_for_task(head0.task);
    const models::Head shared_init0 = head0;
    const models::Head shared_init1 = head1;

    const auto n_train0 = ds.indices_of(data::Split::train, 0).size();
    const auto n_train1 = ds.indices_of(data::Split::train, 1).size();
    const auto largest = std::max(n_train0, n_train1);
    const int steps_per_epoch =
        std::max(1, static_cast<int>((largest + cfg.batch_size_per_group - 1) / cfg.batch_size_per_group));

    data::BatchStream stream(ds, data::Split::train, cfg.batch_size_per_group, opt.seed);
    Adam adam;
    adam.eps = cfg.adam_eps;

    // reporting solves the inner problem on the full train split with the
    // run's own budget and tolerance: the returned heads are h^eps, not an
    // idealized refit
    const TrainBatches full = full_train_batches(ds);
    const GroupBatch full0{full.x0, full.y0};
    const GroupBatch full1{full.x1, full.y1};

    TrainResult result;
    result.head0 = head0;
    result.head1 = head1;
    models::Head cur0 = head0;
    models::Head cur1 = head1;
    try {
        for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
            const auto t_start = std::chrono::steady_clock::now();
            double grad_norm_sum = 0.0;
            double inner_sum = 0.0;
            double cg_sum = 0.0;
            for (int s = 0; s < steps_per_epoch; ++s) {
                auto batch = stream.next();
                GroupBatch b0{std::move(batch.x0), std::move(batch.y0)};
                GroupBatch b1{std::move(batch.x1), std::move(batch.y1)};
                const models::Head& init0 = cfg.warm_start_heads ? cur0 : shared_init0;
                const models::Head& init1 = cfg.warm_start_heads ? cur1 : shared_init1;
                OuterStep step = outer_step(net, b0, b1, cfg, init0, init1, loss);
                cur0 = step.sol.head0;
                cur1 = step.sol.head1;
                grad_norm_sum += step.grad.grad_lambda.norm2();
                inner_sum += step.sol.steps_used;
                cg_sum += step.pp.iters0 + step.pp.iters1;
                adam.step(net.params, step.grad.grad_lambda, cfg.outer_lr);
                if (net.norm_cap) net.params.project_norm(*net.norm_cap);
            }
            auto eval_sol = solve_inner(net, full0, full1, cfg, shared_init0, shared_init1, loss);
            result.head0 = eval_sol.head0;
            result.head1 = eval_sol.head1;

            RunRecord rec;
            rec.epoch = epoch;
            rec.method = opt.method_name;
            rec.param_value = cfg.kappa;
            rec.perf_train =
                evaluate_split(ds, net, eval_sol.head0, eval_sol.head1, data::Split::train, cfg.suf_points, false).perf;
            rec.perf_val =
                evaluate_split(ds, net, eval_sol.head0, eval_sol.head1, data::Split::val, cfg.suf_points, false).perf;
            auto test_eval =
                evaluate_split(ds, net, eval_sol.head0, eval_sol.head1, data::Split::test, cfg.suf_points, true);
            rec.perf_test = test_eval.perf;
            rec.suf_gap_test = test_eval.suf_gap;
            rec.head_distance = metrics::head_distance(eval_sol.head0, eval_sol.head1);
            rec.grad_norm = grad_norm_sum / steps_per_epoch;
            rec.inner_steps = inner_sum / steps_per_epoch;
            rec.cg_iters = cg_sum / (2.0 * steps_per_epoch);
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

}  // namespace fairpath::bilevel
