#include "fairpath/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "fairpath/autodiff.hpp"
#include "fairpath/rng.hpp"
#include "fairpath/run_record.hpp"

namespace fairpath::oracle {

std::string OracleReport::to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["oracle_value"] = oracle_value;
    j["engine_value"] = engine_value;
    j["rel_error"] = rel_error;
    j["tolerance"] = tolerance;
    j["pass"] = pass;
    if (!note.empty()) j["note"] = note;
    return j.dump();
}

std::string OracleReport::to_line() const {
    std::string line = pass ? "PASS " : "FAIL ";
    line += name;
    line += "  rel_err=" + format_double(rel_error) + " tol=" + format_double(tolerance);
    if (!note.empty()) line += "  (" + note + ")";
    return line;
}

double rel_error(double diff_norm, double ref_norm, double floor) {
    return diff_norm / std::max(ref_norm, floor);
}

ParamVector fd_gradient(const ScalarFn& f, const ParamVector& theta, double step) {
    ParamVector g = theta.zeros_like();
    ParamVector probe = theta;
    for (std::size_t i = 0; i < theta.values.size(); ++i) {
        const double orig = theta.values[i];
        probe.values[i] = orig + step;
        const double fp = f(probe);
        probe.values[i] = orig - step;
        const double fm = f(probe);
        probe.values[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw std::runtime_error("fd_gradient: non-finite evaluation at coordinate " + std::to_string(i));
        }
        g.values[i] = (fp - fm) / (2.0 * step);
    }
    return g;
}

Tensor straightline_forward(const std::vector<int>& arch, models::Activation hidden_act, models::Activation embed_act,
                            const ParamVector& params, const Tensor& x) {
    const std::size_t n_layers = arch.size() - 1;
    const int n = x.shape[0];
    std::vector<double> cur = x.data;
    int cur_w = arch[0];
    for (std::size_t l = 0; l < n_layers; ++l) {
        const int in_w = arch[l];
        const int out_w = arch[l + 1];
        const auto& woff = params.layout[2 * l];
        const auto& boff = params.layout[2 * l + 1];
        std::vector<double> next(static_cast<std::size_t>(n) * out_w, 0.0);
        for (int r = 0; r < n; ++r) {
            for (int j = 0; j < out_w; ++j) {
                double s = params.values[static_cast<std::size_t>(boff.offset + j)];
                for (int k = 0; k < in_w; ++k) {
                    s += cur[static_cast<std::size_t>(r) * cur_w + k] *
                         params.values[static_cast<std::size_t>(woff.offset) + static_cast<std::size_t>(k) * out_w + j];
                }
                const models::Activation act = (l + 1 == n_layers) ? embed_act : hidden_act;
                if (act == models::Activation::relu && s < 0.0) s = 0.0;
                next[static_cast<std::size_t>(r) * out_w + j] = s;
            }
        }
        cur = std::move(next);
        cur_w = out_w;
    }
    return Tensor({n, cur_w}, std::move(cur));
}

Tensor straightline_forward(const models::ReprNet& net, const Tensor& x) {
    return straightline_forward(net.arch, net.activation, net.embed_activation, net.params, x);
}

double straightline_loss(const Tensor& z, const ParamVector& head_params, const Tensor& y, models::LossKind kind) {
    const int n = z.shape[0];
    const int e = z.shape[1];
    double acc = 0.0;
    for (int r = 0; r < n; ++r) {
        double s = head_params.values[static_cast<std::size_t>(e)];
        for (int k = 0; k < e; ++k) s += z.at(r, k) * head_params.values[static_cast<std::size_t>(k)];
        const double yr = y.data[static_cast<std::size_t>(r)];
        if (kind == models::LossKind::square) {
            acc += (s - yr) * (s - yr);
        } else {
            const double m = -yr * s;
            acc += m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
        }
    }
    return acc / static_cast<double>(n);
}

std::vector<double> dense_spd_solve(const std::vector<double>& a, const std::vector<double>& b, int n) {
    if (static_cast<std::size_t>(n) * n != a.size() || static_cast<std::size_t>(n) != b.size()) {
        throw std::invalid_argument("dense_spd_solve: dimension mismatch");
    }
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double d = std::fabs(a[static_cast<std::size_t>(i) * n + j] - a[static_cast<std::size_t>(j) * n + i]);
            const double s = std::fabs(a[static_cast<std::size_t>(i) * n + j]) + 1.0;
            if (d > 1e-10 * s) throw std::invalid_argument("dense_spd_solve: matrix is not symmetric");
        }
    }
    // factorization kept local, independent of the engine's solver
    std::vector<double> l(a);
    for (int j = 0; j < n; ++j) {
        double d = l[static_cast<std::size_t>(j) * n + j];
        for (int k = 0; k < j; ++k) d -= l[static_cast<std::size_t>(j) * n + k] * l[static_cast<std::size_t>(j) * n + k];
        if (!(d > 0.0)) throw std::invalid_argument("dense_spd_solve: matrix is not positive definite");
        const double ljj = std::sqrt(d);
        l[static_cast<std::size_t>(j) * n + j] = ljj;
        for (int i = j + 1; i < n; ++i) {
            double s = l[static_cast<std::size_t>(i) * n + j];
            for (int k = 0; k < j; ++k) s -= l[static_cast<std::size_t>(i) * n + k] * l[static_cast<std::size_t>(j) * n + k];
            l[static_cast<std::size_t>(i) * n + j] = s / ljj;
        }
    }
    std::vector<double> x(b);
    for (int i = 0; i < n; ++i) {
        double s = x[static_cast<std::size_t>(i)];
        for (int k = 0; k < i; ++k) s -= l[static_cast<std::size_t>(i) * n + k] * x[static_cast<std::size_t>(k)];
        x[static_cast<std::size_t>(i)] = s / l[static_cast<std::size_t>(i) * n + i];
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = x[static_cast<std::size_t>(i)];
        for (int k = i + 1; k < n; ++k) s -= l[static_cast<std::size_t>(k) * n + i] * x[static_cast<std::size_t>(k)];
        x[static_cast<std::size_t>(i)] = s / l[static_cast<std::size_t>(i) * n + i];
    }
    return x;
}

namespace {

// Exact least-squares head on an embedding via the module's own dense solve.
std::vector<double> ne_head(const Tensor& z, const Tensor& y, double damping) {
    const int n = z.shape[0];
    const int e = z.shape[1];
    const int dim = e + 1;
    std::vector<double> a(static_cast<std::size_t>(dim) * dim, 0.0);
    std::vector<double> rhs(static_cast<std::size_t>(dim), 0.0);
    const double scale = 2.0 / static_cast<double>(n);
    for (int r = 0; r < n; ++r) {
        for (int i = 0; i < dim; ++i) {
            const double zi = i < e ? z.at(r, i) : 1.0;
            rhs[static_cast<std::size_t>(i)] += scale * zi * y.data[static_cast<std::size_t>(r)];
            for (int j = 0; j < dim; ++j) {
                const double zj = j < e ? z.at(r, j) : 1.0;
                a[static_cast<std::size_t>(i) * dim + j] += scale * zi * zj;
            }
        }
    }
    double ridge = damping;
    for (int attempt = 0;; ++attempt) {
        std::vector<double> ar = a;
        for (int i = 0; i < dim; ++i) ar[static_cast<std::size_t>(i) * dim + i] += ridge;
        try {
            return dense_spd_solve(ar, rhs, dim);
        } catch (const std::invalid_argument&) {
            if (attempt >= 3) throw;
            ridge = std::max(ridge * 100.0, 1e-10);
        }
    }
}

}  // namespace

double true_bilevel_objective(const models::ReprNet& net, const bilevel::GroupBatch& b0, const bilevel::GroupBatch& b1,
                              double kappa, double ne_damping) {
    Tensor z0 = straightline_forward(net, b0.x);
    Tensor z1 = straightline_forward(net, b1.x);
    std::vector<double> h0 = ne_head(z0, b0.y, ne_damping);
    std::vector<double> h1 = ne_head(z1, b1.y, ne_damping);
    ParamVector hp0, hp1;
    const int e = z0.shape[1];
    hp0.add("w", {e, 1}, std::vector<double>(h0.begin(), h0.begin() + e));
    hp0.add("b", {1}, {h0[static_cast<std::size_t>(e)]});
    hp1.add("w", {e, 1}, std::vector<double>(h1.begin(), h1.begin() + e));
    hp1.add("b", {1}, {h1[static_cast<std::size_t>(e)]});
    double obj = straightline_loss(z0, hp0, b0.y, models::LossKind::square) +
                 straightline_loss(z1, hp1, b1.y, models::LossKind::square);
    double d2 = 0.0;
    for (int i = 0; i <= e; ++i) {
        const double d = h0[static_cast<std::size_t>(i)] - h1[static_cast<std::size_t>(i)];
        d2 += d * d;
    }
    return obj + 0.5 * kappa * d2;
}

ParamVector exact_bilevel_gradient(const models::ReprNet& net, const bilevel::GroupBatch& b0,
                                   const bilevel::GroupBatch& b1, double kappa, double fd_step, double ne_damping) {
    ScalarFn f = [&](const ParamVector& p) {
        models::ReprNet probe = net;
        probe.params = p;
        return true_bilevel_objective(probe, b0, b1, kappa, ne_damping);
    };
    return fd_gradient(f, net.params, fd_step);
}

ParamVector explicit_unrolled_step(const models::ReprNet& net, const models::Head& init0, const models::Head& init1,
                                   const bilevel::GroupBatch& b0, const bilevel::GroupBatch& b1, int t_steps,
                                   double kappa, double inner_lr, models::LossKind loss, std::size_t max_nodes) {
    Tape tape;
    auto lambda_b = bind_params(tape, net.params);
    int x0 = tape.constant(b0.x);
    int x1 = tape.constant(b1.x);
    int z0 = models::record_embed(tape, lambda_b, x0, net);
    int z1 = models::record_embed(tape, lambda_b, x1, net);
    int y0 = tape.constant(b0.y);
    int y1 = tape.constant(b1.y);

    struct UnrolledHead {
        int w;
        int b;
    };
    UnrolledHead h0{tape.leaf(init0.params.entry_tensor(0), true), tape.leaf(init0.params.entry_tensor(1), true)};
    UnrolledHead h1{tape.leaf(init1.params.entry_tensor(0), true), tape.leaf(init1.params.entry_tensor(1), true)};

    auto head_binding = [&](const UnrolledHead& h) {
        TapeBinding b2;
        b2.leaf_ids = {h.w, h.b};
        b2.layout = init0.params.layout;
        return b2;
    };
    auto unroll = [&](UnrolledHead h, int z, int y) {
        for (int t = 0; t < t_steps; ++t) {
            if (tape.size() > max_nodes) {
                throw std::runtime_error("explicit_unrolled_step: node budget exceeded after " + std::to_string(t) +
                                         " of " + std::to_string(t_steps) + " unrolled steps");
            }
            int l = models::record_loss(tape, models::record_scores(tape, head_binding(h), z), y, loss);
            std::vector<int> wrt{h.w, h.b};
            auto g = tape.backward(l, wrt);
            h.w = tape.sub(h.w, tape.affine(g[0], inner_lr, 0.0));
            h.b = tape.sub(h.b, tape.affine(g[1], inner_lr, 0.0));
        }
        return h;
    };
    UnrolledHead f0 = unroll(h0, z0, y0);
    UnrolledHead f1 = unroll(h1, z1, y1);

    int l0 = models::record_loss(tape, models::record_scores(tape, head_binding(f0), z0), y0, loss);
    int l1 = models::record_loss(tape, models::record_scores(tape, head_binding(f1), z1), y1, loss);
    int outer = tape.add(l0, l1);
    if (kappa != 0.0) {
        int dw = tape.sub(f0.w, f1.w);
        int db = tape.sub(f0.b, f1.b);
        int pen = tape.add(tape.sum(tape.square(dw)), tape.sum(tape.square(db)));
        outer = tape.add(outer, tape.affine(pen, 0.5 * kappa, 0.0));
    }
    return grad(tape, lambda_b, outer);
}

double brute_suf_gap_classification(const metrics::PredictionSet& preds) {
    double total = 0.0;
    int used = 0;
    for (double cls : {1.0, -1.0}) {
        long pred[2] = {0, 0}, match[2] = {0, 0};
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const double yhat = preds.y_score[i] > 0.0 ? 1.0 : -1.0;
            if (yhat != cls) continue;
            const int g = preds.group[i];
            ++pred[g];
            if (preds.y_true[i] == cls) ++match[g];
        }
        if (pred[0] == 0 || pred[1] == 0) continue;
        total += std::fabs(static_cast<double>(match[0]) / static_cast<double>(pred[0]) -
                           static_cast<double>(match[1]) / static_cast<double>(pred[1]));
        ++used;
    }
    if (used == 0) throw std::runtime_error("brute_suf_gap_classification: undefined");
    return 0.5 * total;
}

double brute_suf_gap_regression(const metrics::PredictionSet& preds, int m) {
    std::vector<double> sorted = preds.y_score;
    std::sort(sorted.begin(), sorted.end());
    const double n1 = static_cast<double>(sorted.size() - 1);
    double acc = 0.0;
    int used = 0;
    for (int i = 1; i <= m; ++i) {
        const double q = static_cast<double>(i) / static_cast<double>(m + 1);
        const double t = sorted[static_cast<std::size_t>(std::llround(q * n1))];
        long cond[2] = {0, 0}, joint[2] = {0, 0};
        for (std::size_t r = 0; r < preds.size(); ++r) {
            if (preds.y_score[r] > t) continue;
            const int g = preds.group[r];
            ++cond[g];
            if (preds.y_true[r] <= t) ++joint[g];
        }
        if (cond[0] == 0 || cond[1] == 0) continue;
        acc += std::fabs(static_cast<double>(joint[0]) / static_cast<double>(cond[0]) -
                         static_cast<double>(joint[1]) / static_cast<double>(cond[1]));
        ++used;
    }
    if (used == 0) throw std::runtime_error("brute_suf_gap_regression: undefined");
    return acc / static_cast<double>(used);
}

double time_median_seconds(const std::function<void()>& fn, int reps) {
    std::vector<double> times;
    times.reserve(static_cast<std::size_t>(reps));
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

}  // namespace fairpath::oracle
