#include <cmath>
#include <functional>

#include "fairpath/autodiff.hpp"
#include "fairpath/bilevel.hpp"
#include "fairpath/oracle.hpp"
#include "fairpath/rng.hpp"

// The verification battery behind `verify`: every check compares an engine
// quantity against an independently computed one and reports a relative error
// with its pinned tolerance.
namespace fairpath::oracle {

namespace {

struct TinyInstance {
    models::ReprNet net;
    bilevel::GroupBatch b0, b1;
    models::Head init;
};

// Smooth configuration: linear representation, linear heads, square loss,
// 64 samples per group with group-dependent target coefficients.
TinyInstance make_tiny_smooth(std::uint64_t seed, int n_per_group = 64, int input = 5, int embed = 3) {
    TinyInstance t;
    t.net = models::ReprNet::init({input, embed}, models::Activation::linear, seed, models::Activation::linear);
    auto rng = make_rng(seed + 1);
    std::vector<double> c0(static_cast<std::size_t>(input)), c1(static_cast<std::size_t>(input));
    for (int j = 0; j < input; ++j) {
        c0[static_cast<std::size_t>(j)] = rand_normal(rng);
        c1[static_cast<std::size_t>(j)] = c0[static_cast<std::size_t>(j)] + 0.6 * rand_normal(rng);
    }
    auto make_batch = [&](const std::vector<double>& c) {
        bilevel::GroupBatch b;
        b.x = Tensor::zeros({n_per_group, input});
        b.y = Tensor::zeros({n_per_group, 1});
        for (int r = 0; r < n_per_group; ++r) {
            double yv = 0.0;
            for (int j = 0; j < input; ++j) {
                double x = rand_normal(rng);
                b.x.at(r, j) = x;
                yv += c[static_cast<std::size_t>(j)] * x;
            }
            b.y.data[static_cast<std::size_t>(r)] = yv + 0.05 * rand_normal(rng);
        }
        return b;
    };
    t.b0 = make_batch(c0);
    t.b1 = make_batch(c1);
    t.init = models::Head::zeros(embed, models::Task::regression);
    return t;
}

// Random ReLU net + linear head instance with all parameters in one flat
// vector; re-seeds until every hidden pre-activation clears the ReLU kink.
struct SmallNetInstance {
    std::vector<int> arch{4, 6, 3};
    models::Activation hidden = models::Activation::relu;
    models::Activation embed = models::Activation::linear;
    ParamVector all;            // net entries then head entries
    std::size_t net_entries = 0;
    Tensor x, y;
    models::LossKind loss = models::LossKind::square;
};

double min_preactivation_margin(const SmallNetInstance& inst) {
    // evaluate layer by layer, tracking |preactivation| minima on hidden layers
    ParamVector net_part;
    for (std::size_t i = 0; i < inst.net_entries; ++i) {
        net_part.add(inst.all.layout[i].name, inst.all.layout[i].shape, inst.all.entry_tensor(i).data);
    }
    const int n = inst.x.shape[0];
    std::vector<double> cur = inst.x.data;
    int cur_w = inst.arch[0];
    double margin = 1e300;
    for (std::size_t l = 0; l + 1 < inst.arch.size(); ++l) {
        const int in_w = inst.arch[l];
        const int out_w = inst.arch[l + 1];
        const auto& woff = net_part.layout[2 * l];
        const auto& boff = net_part.layout[2 * l + 1];
        std::vector<double> next(static_cast<std::size_t>(n) * out_w, 0.0);
        const bool is_hidden = l + 2 < inst.arch.size() || inst.hidden == models::Activation::relu;
        for (int r = 0; r < n; ++r) {
            for (int j = 0; j < out_w; ++j) {
                double s = net_part.values[static_cast<std::size_t>(boff.offset + j)];
                for (int k = 0; k < in_w; ++k) {
                    s += cur[static_cast<std::size_t>(r) * cur_w + k] *
                         net_part.values[static_cast<std::size_t>(woff.offset) + static_cast<std::size_t>(k) * out_w + j];
                }
                const bool relu_here = (l + 2 < inst.arch.size()) ? inst.hidden == models::Activation::relu
                                                                  : inst.embed == models::Activation::relu;
                if (relu_here) {
                    margin = std::min(margin, std::fabs(s));
                    if (s < 0.0) s = 0.0;
                } else if (is_hidden && l + 2 < inst.arch.size()) {
                    margin = std::min(margin, std::fabs(s));
                }
                next[static_cast<std::size_t>(r) * out_w + j] = s;
            }
        }
        cur = std::move(next);
        cur_w = out_w;
    }
    return margin;
}

SmallNetInstance make_small_net(std::uint64_t seed, models::LossKind loss) {
    for (int attempt = 0; attempt < 20; ++attempt) {
        SmallNetInstance inst;
        inst.loss = loss;
        auto net = models::ReprNet::init(inst.arch, inst.hidden, seed + static_cast<std::uint64_t>(attempt) * 1000,
                                         inst.embed);
        inst.all = net.params;
        inst.net_entries = net.params.layout.size();
        auto rng = make_rng(seed + static_cast<std::uint64_t>(attempt) * 1000 + 7);
        const int e = inst.arch.back();
        std::vector<double> hw(static_cast<std::size_t>(e));
        for (auto& v : hw) v = rand_normal(rng, 0.0, 0.7);
        inst.all.add("hw", {e, 1}, hw);
        inst.all.add("hb", {1}, {0.1 * rand_normal(rng)});
        const int n = 8;
        inst.x = Tensor::zeros({n, inst.arch[0]});
        inst.y = Tensor::zeros({n, 1});
        for (int r = 0; r < n; ++r) {
            for (int j = 0; j < inst.arch[0]; ++j) inst.x.at(r, j) = rand_normal(rng);
            inst.y.data[static_cast<std::size_t>(r)] =
                loss == models::LossKind::square ? rand_normal(rng) : (rand_uniform(rng) < 0.5 ? -1.0 : 1.0);
        }
        if (min_preactivation_margin(inst) > 1e-3) return inst;
    }
    throw std::runtime_error("make_small_net: no kink-free instance found");
}

// Records the instance loss on a fresh tape; returns loss node and bindings.
struct RecordedNet {
    Tape tape;
    TapeBinding all_binding;
    TapeBinding net_binding;
    TapeBinding head_binding;
    int loss_id = -1;
};

void record_small_net(RecordedNet& rec, const SmallNetInstance& inst) {
    rec.all_binding = bind_params(rec.tape, inst.all);
    rec.net_binding.leaf_ids.assign(rec.all_binding.leaf_ids.begin(),
                                    rec.all_binding.leaf_ids.begin() + static_cast<std::ptrdiff_t>(inst.net_entries));
    rec.net_binding.layout.assign(inst.all.layout.begin(),
                                  inst.all.layout.begin() + static_cast<std::ptrdiff_t>(inst.net_entries));
    rec.head_binding.leaf_ids.assign(rec.all_binding.leaf_ids.begin() + static_cast<std::ptrdiff_t>(inst.net_entries),
                                     rec.all_binding.leaf_ids.end());
    rec.head_binding.layout.assign(inst.all.layout.begin() + static_cast<std::ptrdiff_t>(inst.net_entries),
                                   inst.all.layout.end());

    models::ReprNet shell;
    shell.arch = inst.arch;
    shell.activation = inst.hidden;
    shell.embed_activation = inst.embed;
    int x = rec.tape.constant(inst.x);
    int z = models::record_embed(rec.tape, rec.net_binding, x, shell);
    int y = rec.tape.constant(inst.y);
    rec.loss_id = models::record_loss(rec.tape, models::record_scores(rec.tape, rec.head_binding, z), y, inst.loss);
}

double straightline_instance_loss(const SmallNetInstance& inst, const ParamVector& all) {
    ParamVector net_part, head_part;
    for (std::size_t i = 0; i < all.layout.size(); ++i) {
        if (i < inst.net_entries) net_part.add(all.layout[i].name, all.layout[i].shape, all.entry_tensor(i).data);
        else head_part.add(all.layout[i].name, all.layout[i].shape, all.entry_tensor(i).data);
    }
    Tensor z = straightline_forward(inst.arch, inst.hidden, inst.embed, net_part, inst.x);
    return straightline_loss(z, head_part, inst.y, inst.loss);
}

ParamVector engine_grad_all(const SmallNetInstance& inst, const ParamVector& at) {
    SmallNetInstance probe = inst;
    probe.all = at;
    RecordedNet rec;
    record_small_net(rec, probe);
    return grad(rec.tape, rec.all_binding, rec.loss_id);
}

OracleReport vector_report(const std::string& name, const ParamVector& engine, const ParamVector& reference, double tol) {
    OracleReport rep;
    rep.name = name;
    rep.engine_value = engine.norm2();
    rep.oracle_value = reference.norm2();
    rep.rel_error = rel_error((engine - reference).norm2(), reference.norm2());
    rep.tolerance = tol;
    rep.pass = rep.rel_error <= tol;
    return rep;
}

OracleReport scalar_report(const std::string& name, double engine, double reference, double tol) {
    OracleReport rep;
    rep.name = name;
    rep.engine_value = engine;
    rep.oracle_value = reference;
    rep.rel_error = rel_error(std::fabs(engine - reference), std::fabs(reference));
    rep.tolerance = tol;
    rep.pass = rep.rel_error <= tol;
    return rep;
}

bilevel::BilevelConfig tight_config(double eps, double delta, double kappa) {
    bilevel::BilevelConfig cfg;
    cfg.kappa = kappa;
    cfg.inner_solver = bilevel::InnerSolver::exact;
    cfg.inner_tol_eps = eps;
    cfg.cg_tol_delta = delta;
    cfg.cg_max_iters = 200;
    cfg.hessian_damping = 0.0;
    cfg.inner_lr = 0.25;
    cfg.inner_max_steps = 200000;
    return cfg;
}

ParamVector engine_implicit_grad(const TinyInstance& t, const bilevel::BilevelConfig& cfg) {
    auto step = bilevel::outer_step(t.net, t.b0, t.b1, cfg, t.init, t.init, models::LossKind::square);
    return step.grad.grad_lambda;
}

}  // namespace

std::vector<OracleReport> run_all_checks(const std::string& filter, bool mutate_implicit_sign) {
    std::vector<OracleReport> reports;
    auto wanted = [&](const std::string& name) { return filter.empty() || name.find(filter) != std::string::npos; };
    auto add = [&](OracleReport rep) { reports.push_back(std::move(rep)); };

    // --- first-order gradient vs central finite differences ---
    for (auto [name, loss] : {std::pair{"autodiff_grad_fd_square", models::LossKind::square},
                              std::pair{"autodiff_grad_fd_logistic", models::LossKind::logistic}}) {
        if (!wanted(name)) continue;
        double worst = 0.0;
        for (std::uint64_t seed : {11ull, 12ull, 13ull, 14ull, 15ull, 16ull, 17ull, 18ull, 19ull, 20ull,
                                   21ull, 22ull, 23ull, 24ull, 25ull, 26ull, 27ull, 28ull, 29ull, 30ull}) {
            auto inst = make_small_net(seed, loss);
            ParamVector eng = engine_grad_all(inst, inst.all);
            ParamVector ref = fd_gradient([&](const ParamVector& p) { return straightline_instance_loss(inst, p); },
                                          inst.all, 1e-6);
            worst = std::max(worst, rel_error((eng - ref).norm2(), ref.norm2()));
        }
        OracleReport rep;
        rep.name = name;
        rep.rel_error = worst;
        rep.tolerance = 1e-5;
        rep.pass = worst <= rep.tolerance;
        rep.note = "worst of 20 seeds";
        add(rep);
    }

    // --- hvp vs finite difference of gradients ---
    if (wanted("autodiff_hvp_fd")) {
        double worst = 0.0;
        for (std::uint64_t seed = 41; seed < 61; ++seed) {
            auto inst = make_small_net(seed, models::LossKind::square);
            auto rng = make_rng(seed * 3 + 1);
            ParamVector v = inst.all.zeros_like();
            for (auto& val : v.values) val = rand_normal(rng);
            RecordedNet rec;
            record_small_net(rec, inst);
            ParamVector eng = hvp(rec.tape, rec.all_binding, rec.loss_id, v);
            const double h = 1e-4;
            ParamVector plus = inst.all;
            plus.axpy(h, v);
            ParamVector minus = inst.all;
            minus.axpy(-h, v);
            ParamVector ref = engine_grad_all(inst, plus) - engine_grad_all(inst, minus);
            ref.scale(1.0 / (2.0 * h));
            worst = std::max(worst, rel_error((eng - ref).norm2(), ref.norm2()));
        }
        OracleReport rep;
        rep.name = "autodiff_hvp_fd";
        rep.rel_error = worst;
        rep.tolerance = 1e-4;
        rep.pass = worst <= rep.tolerance;
        rep.note = "worst of 20 seeds";
        add(rep);
    }

    // --- hvp symmetry and linearity ---
    if (wanted("autodiff_hvp_symmetry")) {
        double worst = 0.0;
        for (std::uint64_t seed = 71; seed < 91; ++seed) {
            auto inst = make_small_net(seed, models::LossKind::logistic);
            auto rng = make_rng(seed * 5 + 3);
            ParamVector u = inst.all.zeros_like(), v = inst.all.zeros_like();
            for (auto& val : u.values) val = rand_normal(rng);
            for (auto& val : v.values) val = rand_normal(rng);
            RecordedNet rec;
            record_small_net(rec, inst);
            ParamVector hu = hvp(rec.tape, rec.all_binding, rec.loss_id, u);
            RecordedNet rec2;
            record_small_net(rec2, inst);
            ParamVector hv = hvp(rec2.tape, rec2.all_binding, rec2.loss_id, v);
            const double lhs = u.dot(hv);
            const double rhs = v.dot(hu);
            worst = std::max(worst, rel_error(std::fabs(lhs - rhs), std::max(std::fabs(lhs), std::fabs(rhs))));
        }
        OracleReport rep;
        rep.name = "autodiff_hvp_symmetry";
        rep.rel_error = worst;
        rep.tolerance = 1e-8;
        rep.pass = worst <= rep.tolerance;
        add(rep);
    }
    if (wanted("autodiff_hvp_linearity")) {
        double worst = 0.0;
        for (std::uint64_t seed = 101; seed < 111; ++seed) {
            auto inst = make_small_net(seed, models::LossKind::square);
            auto rng = make_rng(seed * 7 + 5);
            ParamVector v1 = inst.all.zeros_like(), v2 = inst.all.zeros_like();
            for (auto& val : v1.values) val = rand_normal(rng);
            for (auto& val : v2.values) val = rand_normal(rng);
            const double alpha = rand_normal(rng);
            ParamVector combo = v2;
            combo.axpy(alpha, v1);
            RecordedNet r1, r2, r3;
            record_small_net(r1, inst);
            record_small_net(r2, inst);
            record_small_net(r3, inst);
            ParamVector lhs = hvp(r1.tape, r1.all_binding, r1.loss_id, combo);
            ParamVector rhs = hvp(r2.tape, r2.all_binding, r2.loss_id, v2);
            rhs.axpy(alpha, hvp(r3.tape, r3.all_binding, r3.loss_id, v1));
            worst = std::max(worst, rel_error((lhs - rhs).norm2(), rhs.norm2()));
        }
        OracleReport rep;
        rep.name = "autodiff_hvp_linearity";
        rep.rel_error = worst;
        rep.tolerance = 1e-10;
        rep.pass = worst <= rep.tolerance;
        add(rep);
    }

    // --- mixed partial vs finite difference of the head gradient ---
    if (wanted("autodiff_mixed_fd")) {
        double worst = 0.0;
        for (std::uint64_t seed = 121; seed < 131; ++seed) {
            auto inst = make_small_net(seed, models::LossKind::square);
            auto rng = make_rng(seed * 11 + 7);
            const int e = inst.arch.back();
            ParamVector v;
            {
                std::vector<double> vw(static_cast<std::size_t>(e));
                for (auto& val : vw) val = rand_normal(rng);
                v.add("hw", {e, 1}, vw);
                v.add("hb", {1}, {rand_normal(rng)});
            }
            RecordedNet rec;
            record_small_net(rec, inst);
            ParamVector eng = mixed_partial_vjp(rec.tape, rec.net_binding, rec.head_binding, rec.loss_id, v);

            // phi(net params) = <grad_h L, v>, differentiated by central FD
            ParamVector net_at;
            for (std::size_t i = 0; i < inst.net_entries; ++i) {
                net_at.add(inst.all.layout[i].name, inst.all.layout[i].shape, inst.all.entry_tensor(i).data);
            }
            ScalarFn phi = [&](const ParamVector& np) {
                ParamVector all = np;
                for (std::size_t i = inst.net_entries; i < inst.all.layout.size(); ++i) {
                    all.add(inst.all.layout[i].name, inst.all.layout[i].shape, inst.all.entry_tensor(i).data);
                }
                SmallNetInstance probe = inst;
                probe.all = all;
                RecordedNet r2;
                record_small_net(r2, probe);
                ParamVector gh = grad(r2.tape, r2.head_binding, r2.loss_id);
                return gh.dot(v);
            };
            ParamVector ref = fd_gradient(phi, net_at, 1e-5);
            worst = std::max(worst, rel_error((eng - ref).norm2(), ref.norm2()));
        }
        OracleReport rep;
        rep.name = "autodiff_mixed_fd";
        rep.rel_error = worst;
        rep.tolerance = 1e-4;
        rep.pass = worst <= rep.tolerance;
        add(rep);
    }

    // --- conjugate gradient vs the dense direct solve ---
    if (wanted("cg_vs_dense")) {
        double worst = 0.0;
        int worst_iters = 0;
        auto rng = make_rng(2024);
        for (int trial = 0; trial < 50; ++trial) {
            const int dim = 2 + static_cast<int>(rand_index(rng, 31));
            std::vector<double> m(static_cast<std::size_t>(dim) * dim);
            for (auto& val : m) val = rand_normal(rng);
            // Wishart scaled by 1/dim plus identity keeps the condition number
            // modest, so n-step CG reaches direct-solve accuracy in doubles.
            std::vector<double> a(static_cast<std::size_t>(dim) * dim, 0.0);
            for (int i = 0; i < dim; ++i) {
                for (int j = 0; j < dim; ++j) {
                    double s = 0.0;
                    for (int k = 0; k < dim; ++k) {
                        s += m[static_cast<std::size_t>(k) * dim + i] * m[static_cast<std::size_t>(k) * dim + j];
                    }
                    a[static_cast<std::size_t>(i) * dim + j] = s / dim + (i == j ? 1.0 : 0.0);
                }
            }
            ParamVector b;
            {
                std::vector<double> bv(static_cast<std::size_t>(dim));
                for (auto& val : bv) val = rand_normal(rng);
                b.add("x", {dim}, bv);
            }
            bilevel::HvpFn apply = [&](const ParamVector& p) {
                ParamVector out = p.zeros_like();
                for (int i = 0; i < dim; ++i) {
                    double s = 0.0;
                    for (int j = 0; j < dim; ++j) s += a[static_cast<std::size_t>(i) * dim + j] * p.values[static_cast<std::size_t>(j)];
                    out.values[static_cast<std::size_t>(i)] = s;
                }
                return out;
            };
            auto res = bilevel::cg_solve(apply, b, b.zeros_like(), dim, 1e-14);
            auto ref = dense_spd_solve(a, b.values, dim);
            double dn = 0.0, rn = 0.0;
            for (int i = 0; i < dim; ++i) {
                const double d = res.x.values[static_cast<std::size_t>(i)] - ref[static_cast<std::size_t>(i)];
                dn += d * d;
                rn += ref[static_cast<std::size_t>(i)] * ref[static_cast<std::size_t>(i)];
            }
            worst = std::max(worst, rel_error(std::sqrt(dn), std::sqrt(rn)));
            worst_iters = std::max(worst_iters, res.iters - dim);
        }
        OracleReport rep;
        rep.name = "cg_vs_dense";
        rep.rel_error = worst;
        rep.tolerance = 1e-8;
        rep.pass = worst <= rep.tolerance && worst_iters <= 0;
        rep.note = "50 random SPD systems, dim <= 32, within dim iterations";
        add(rep);
    }

    // --- implicit gradient vs finite differences of the true objective ---
    for (double kappa : {0.0, 1.0}) {
        std::string name = kappa == 0.0 ? "implicit_grad_fidelity_k0" : "implicit_grad_fidelity_k1";
        if (!wanted(name)) continue;
        auto t = make_tiny_smooth(7);
        auto cfg = tight_config(1e-10, 1e-10, kappa);
        ParamVector eng = engine_implicit_grad(t, cfg);
        if (mutate_implicit_sign) eng.scale(-1.0);
        ParamVector ref = exact_bilevel_gradient(t.net, t.b0, t.b1, kappa, 1e-5, 0.0);
        auto rep = vector_report(name, eng, ref, 1e-3);
        rep.note = "eps = delta = 1e-10";
        add(rep);
    }

    // --- error scaling in the inner tolerance ---
    if (wanted("theorem41_eps_scaling")) {
        auto t = make_tiny_smooth(7);
        ParamVector ref = exact_bilevel_gradient(t.net, t.b0, t.b1, 1.0, 1e-5, 0.0);
        std::vector<double> errs;
        for (double eps : {1e-2, 1e-4, 1e-6}) {
            auto cfg = tight_config(eps, 1e-10, 1.0);
            cfg.inner_solver = bilevel::InnerSolver::gd;
            errs.push_back((engine_implicit_grad(t, cfg) - ref).norm2());
        }
        OracleReport rep;
        rep.name = "theorem41_eps_scaling";
        rep.oracle_value = errs[0];
        rep.engine_value = errs[2];
        rep.tolerance = 3.0;
        rep.pass = errs[1] <= 3.0 * errs[0] && errs[2] <= 3.0 * errs[1];
        rep.rel_error = errs[0] > 0 ? errs[2] / errs[0] : 0.0;
        rep.note = "errors at eps 1e-2/1e-4/1e-6: " + format_double(errs[0]) + " / " + format_double(errs[1]) + " / " +
                   format_double(errs[2]);
        add(rep);
    }

    // --- linear-in-kappa error envelope ---
    if (wanted("theorem41_kappa_envelope")) {
        auto t = make_tiny_smooth(7);
        double errs[2];
        int i = 0;
        for (double kappa : {1.0, 10.0}) {
            ParamVector ref = exact_bilevel_gradient(t.net, t.b0, t.b1, kappa, 1e-5, 0.0);
            auto cfg = tight_config(1e-3, 1e-10, kappa);
            cfg.inner_solver = bilevel::InnerSolver::gd;
            errs[i++] = (engine_implicit_grad(t, cfg) - ref).norm2();
        }
        OracleReport rep;
        rep.name = "theorem41_kappa_envelope";
        rep.oracle_value = errs[0];
        rep.engine_value = errs[1];
        rep.rel_error = errs[0] > 0.0 ? errs[1] / errs[0] : 0.0;
        rep.tolerance = 20.0;
        rep.pass = errs[1] <= 20.0 * errs[0] + 1e-8;
        rep.note = "err(kappa=10) vs err(kappa=1) at eps=1e-3";
        add(rep);
    }

    // --- p-terms vanish at the exact optimum with kappa = 0 ---
    if (wanted("stationarity_kappa0")) {
        auto t = make_tiny_smooth(7);
        auto cfg = tight_config(1e-10, 1e-12, 0.0);
        auto step = bilevel::outer_step(t.net, t.b0, t.b1, cfg, t.init, t.init, models::LossKind::square);
        bilevel::PPair zero_pp;
        zero_pp.p0 = step.pp.p0.zeros_like();
        zero_pp.p1 = step.pp.p1.zeros_like();
        auto direct = bilevel::implicit_grad(t.net, step.sol, zero_pp, t.b0, t.b1, models::LossKind::square);
        auto rep = vector_report("stationarity_kappa0", step.grad.grad_lambda, direct.grad_lambda, 1e-9);
        add(rep);
    }

    // --- group-swap symmetry of the assembled gradient ---
    if (wanted("penalty_swap_symmetry")) {
        auto t = make_tiny_smooth(7);
        auto cfg = tight_config(1e-10, 1e-12, 1.0);
        auto fwd = bilevel::outer_step(t.net, t.b0, t.b1, cfg, t.init, t.init, models::LossKind::square);
        auto swp = bilevel::outer_step(t.net, t.b1, t.b0, cfg, t.init, t.init, models::LossKind::square);
        auto rep = vector_report("penalty_swap_symmetry", swp.grad.grad_lambda, fwd.grad.grad_lambda, 1e-10);
        add(rep);
    }

    // --- unrolled explicit route agrees once the inner loop has converged ---
    if (wanted("explicit_vs_implicit")) {
        auto t = make_tiny_smooth(7);
        auto cfg = tight_config(1e-12, 1e-12, 1.0);
        ParamVector eng = engine_implicit_grad(t, cfg);
        ParamVector unrolled = explicit_unrolled_step(t.net, t.init, t.init, t.b0, t.b1, 400, 1.0, 0.2,
                                                      models::LossKind::square);
        auto rep = vector_report("explicit_vs_implicit", unrolled, eng, 5e-3);
        rep.note = "T = 400 unrolled steps";
        add(rep);
    }

    // --- metric recounts ---
    if (wanted("metrics_bruteforce_classification")) {
        auto rng = make_rng(555);
        double worst = 0.0;
        bool ok = true;
        for (int trial = 0; trial < 100; ++trial) {
            metrics::PredictionSet preds;
            preds.task = models::Task::binary_classification;
            const int n = 40 + static_cast<int>(rand_index(rng, 160));
            for (int i = 0; i < n; ++i) {
                preds.push(static_cast<int>(rand_index(rng, 2)), rand_uniform(rng) < 0.5 ? -1.0 : 1.0, rand_normal(rng));
            }
            bool has0 = false, has1 = false;
            for (int g : preds.group) (g == 0 ? has0 : has1) = true;
            if (!has0 || !has1) continue;
            auto rep = metrics::suf_gap_classification(preds);
            const double brute = brute_suf_gap_classification(preds);
            worst = std::max(worst, std::fabs(rep.value - brute));
            ok = ok && rep.value >= 0.0 && rep.value <= 1.0;
            metrics::PredictionSet swapped = preds;
            for (auto& g : swapped.group) g = 1 - g;
            ok = ok && metrics::suf_gap_classification(swapped).value == rep.value;
        }
        OracleReport rep;
        rep.name = "metrics_bruteforce_classification";
        rep.rel_error = worst;
        rep.tolerance = 0.0;
        rep.pass = ok && worst == 0.0;
        rep.note = "100 random sets, exact match + swap symmetry + range";
        add(rep);
    }
    if (wanted("metrics_bruteforce_regression")) {
        auto rng = make_rng(777);
        double worst = 0.0;
        bool ok = true;
        for (int trial = 0; trial < 100; ++trial) {
            metrics::PredictionSet preds;
            preds.task = models::Task::regression;
            const int n = 40 + static_cast<int>(rand_index(rng, 160));
            for (int i = 0; i < n; ++i) {
                preds.push(static_cast<int>(rand_index(rng, 2)), rand_normal(rng), rand_normal(rng));
            }
            bool has0 = false, has1 = false;
            for (int g : preds.group) (g == 0 ? has0 : has1) = true;
            if (!has0 || !has1) continue;
            auto rep = metrics::suf_gap_regression(preds, 17);
            const double brute = brute_suf_gap_regression(preds, 17);
            worst = std::max(worst, std::fabs(rep.value - brute));
            ok = ok && rep.value >= 0.0 && rep.value <= 1.0;
            metrics::PredictionSet swapped = preds;
            for (auto& g : swapped.group) g = 1 - g;
            ok = ok && metrics::suf_gap_regression(swapped, 17).value == rep.value;
        }
        OracleReport rep;
        rep.name = "metrics_bruteforce_regression";
        rep.rel_error = worst;
        rep.tolerance = 0.0;
        rep.pass = ok && worst == 0.0;
        rep.note = "100 random sets, exact match + swap symmetry + range";
        add(rep);
    }

    // --- finite-difference step robustness ---
    if (wanted("fd_step_robustness")) {
        ParamVector theta;
        theta.add("t", {6}, {0.3, -0.7, 1.1, 0.2, -0.4, 0.9});
        ScalarFn f = [](const ParamVector& p) {
            double s = 0.0;
            for (double v : p.values) s += std::exp(0.3 * v) + v * v;
            return s;
        };
        ParamVector g5 = fd_gradient(f, theta, 1e-5);
        ParamVector g6 = fd_gradient(f, theta, 1e-6);
        // error model for central differences: |f'''| h^2 / 6 truncation plus
        // eps |f| / h roundoff; the third derivative from a coarse stencil
        const double f0 = f(theta);
        const double big_h = 1e-2;
        double est2 = 0.0;
        ParamVector probe = theta;
        for (std::size_t i = 0; i < theta.values.size(); ++i) {
            const double orig = theta.values[i];
            auto at = [&](double d) {
                probe.values[i] = orig + d;
                const double v = f(probe);
                probe.values[i] = orig;
                return v;
            };
            const double fppp =
                (at(2 * big_h) - 2.0 * at(big_h) + 2.0 * at(-big_h) - at(-2 * big_h)) / (2.0 * big_h * big_h * big_h);
            const double eps = 2.220446049250313e-16;
            const double e_i = std::fabs(fppp) * 1e-10 / 6.0 + eps * std::fabs(f0) * (1e5 + 1e6);
            est2 += e_i * e_i;
        }
        const double est = std::sqrt(est2);
        const double cross = (g5 - g6).norm2();
        OracleReport rep;
        rep.name = "fd_step_robustness";
        rep.oracle_value = est;
        rep.engine_value = cross;
        rep.rel_error = cross / std::max(est, 1e-15);
        rep.tolerance = 10.0;
        rep.pass = cross <= 10.0 * est;
        add(rep);
    }

    return reports;
}

}  // namespace fairpath::oracle
