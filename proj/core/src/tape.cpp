#include "fairpath/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fairpath {

const char* op_name(OpKind op) {
    switch (op) {
        case OpKind::leaf: return "leaf";
        case OpKind::matmul: return "matmul";
        case OpKind::add: return "add";
        case OpKind::sub: return "sub";
        case OpKind::mul: return "mul";
        case OpKind::relu: return "relu";
        case OpKind::relu_mask: return "relu_mask";
        case OpKind::square: return "square";
        case OpKind::affine: return "affine";
        case OpKind::log_op: return "log";
        case OpKind::exp_op: return "exp";
        case OpKind::recip: return "recip";
        case OpKind::sigmoid: return "sigmoid";
        case OpKind::softplus: return "softplus";
        case OpKind::sum_all: return "sum";
        case OpKind::bfill: return "bfill";
        case OpKind::col_sum: return "col_sum";
        case OpKind::row_bcast: return "row_bcast";
        case OpKind::concat: return "concat";
        case OpKind::slice: return "slice";
        case OpKind::pad: return "pad";
    }
    return "?";
}

namespace {

[[noreturn]] void fail(const std::string& what, int id, const std::string& detail) {
    throw std::invalid_argument("tape: " + what + " at node " + std::to_string(id) + ": " + detail);
}

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

double stable_softplus(double x) {
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

}  // namespace

int Tape::push(TapeNode n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

void Tape::check_id(int id, const char* what) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) {
        throw std::invalid_argument(std::string("tape: ") + what + ": invalid node id " + std::to_string(id));
    }
}

const Tensor& Tape::in_val(const TapeNode& n, int which) const {
    int id = which == 0 ? n.a : n.b;
    return nodes_[static_cast<std::size_t>(id)].value;
}

int Tape::leaf(Tensor v, bool requires_grad) {
    TapeNode n;
    n.op = OpKind::leaf;
    n.requires_grad = requires_grad;
    n.value = std::move(v);
    return push(std::move(n));
}

void Tape::set_leaf(int id, const Tensor& v) {
    check_id(id, "set_leaf");
    TapeNode& n = nodes_[static_cast<std::size_t>(id)];
    if (n.op != OpKind::leaf) fail("set_leaf", id, "node is not a leaf");
    if (n.value.shape != v.shape) {
        fail("set_leaf", id, "shape " + v.shape_str() + " does not match recorded " + n.value.shape_str());
    }
    n.value = v;
}

void Tape::truncate(std::size_t n) {
    if (n > nodes_.size()) throw std::invalid_argument("tape: truncate beyond end");
    nodes_.resize(n);
}

void Tape::replay() {
    for (auto& n : nodes_) {
        if (n.op != OpKind::leaf) eval(n);
    }
}

// Computes n.value.data from the inputs; n.value.shape is set at emission
// and never changes afterwards.
void Tape::eval(TapeNode& n) const {
    switch (n.op) {
        case OpKind::leaf:
            break;
        case OpKind::matmul: {
            const Tensor& A = in_val(n, 0);
            const Tensor& B = in_val(n, 1);
            const int m = n.value.shape[0];
            const int p = n.value.shape[1];
            const int kk = n.trans_a ? A.shape[0] : A.shape[1];
            const int a_cols = A.shape[1];
            const int b_cols = B.shape[1];
            const double* a = A.data.data();
            const double* b = B.data.data();
            double* o = n.value.data.data();
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < p; ++j) {
                    double s = 0.0;
                    for (int k = 0; k < kk; ++k) {
                        double av = n.trans_a ? a[k * a_cols + i] : a[i * a_cols + k];
                        double bv = n.trans_b ? b[j * b_cols + k] : b[k * b_cols + j];
                        s += av * bv;
                    }
                    o[i * p + j] = s;
                }
            }
            break;
        }
        case OpKind::add: {
            const auto& a = in_val(n, 0).data;
            const auto& b = in_val(n, 1).data;
            for (std::size_t i = 0; i < a.size(); ++i) n.value.data[i] = a[i] + b[i];
            break;
        }
        case OpKind::sub: {
            const auto& a = in_val(n, 0).data;
            const auto& b = in_val(n, 1).data;
            for (std::size_t i = 0; i < a.size(); ++i) n.value.data[i] = a[i] - b[i];
            break;
        }
        case OpKind::mul: {
            const auto& a = in_val(n, 0).data;
            const auto& b = in_val(n, 1).data;
            for (std::size_t i = 0; i < a.size(); ++i) n.value.data[i] = a[i] * b[i];
            break;
        }
        case OpKind::relu: {
            const auto& a = in_val(n, 0).data;
            for (std::size_t i = 0; i < a.size(); ++i) n.value.data[i] = a[i] > 0.0 ? a[i] : 0.0;
            break;
        }
        case OpKind::relu_mask: {
            const auto& a = in_val(n, 0).data;
            for (std::size_t i = 0; i < a.size(); ++i) n.value.data[i] = a[i] > 0.0 ? 1.0 : 0.0;
            break;
        }
        case OpKind::square: {
            const auto& a = in_val(n, 0).data;
            for (std::size_t i = 0; i < a.size(); ++i) n.value.data[i] = a[i] * a[i];
            break;
        }
        case OpKind::affine: {
            const auto& a = in_val(n, 0).data;
            for (std::size_t i = 0; i < a.size(); ++i) n.value.data[i] = n.alpha * a[i] + n.beta;
            break;
        }
        case OpKind::log_op: {
            const auto& a = in_val(n, 0).data;
            for (std::size_t i = 0; i < a.size(); ++i) n.value.data[i] = std::log(a[i]);
            break;
        }
        case OpKind::exp_op: {
            const auto& a = in_val(n, 0).data;
            for (std::size_t i = 0; i < a.size(); ++i) n.value.data[i] = std::exp(a[i]);
            break;
        }
        case OpKind::recip: {
            const auto& a = in_val(n, 0).data;
            for (std::size_t i = 0; i < a.size(); ++i) n.value.data[i] = 1.0 / a[i];
            break;
        }
        case OpKind::sigmoid: {
            const auto& a = in_val(n, 0).data;
            for (std::size_t i = 0; i < a.size(); ++i) n.value.data[i] = stable_sigmoid(a[i]);
            break;
        }
        case OpKind::softplus: {
            const auto& a = in_val(n, 0).data;
            for (std::size_t i = 0; i < a.size(); ++i) n.value.data[i] = stable_softplus(a[i]);
            break;
        }
        case OpKind::sum_all: {
            const auto& a = in_val(n, 0).data;
            double s = 0.0;
            for (double v : a) s += v;
            n.value.data[0] = s;
            break;
        }
        case OpKind::bfill: {
            double s = in_val(n, 0).data[0];
            for (auto& v : n.value.data) v = s;
            break;
        }
        case OpKind::col_sum: {
            const Tensor& A = in_val(n, 0);
            const int r = A.shape[0];
            const int c = A.shape[1];
            for (int j = 0; j < c; ++j) n.value.data[static_cast<std::size_t>(j)] = 0.0;
            for (int i = 0; i < r; ++i) {
                for (int j = 0; j < c; ++j) n.value.data[static_cast<std::size_t>(j)] += A.data[static_cast<std::size_t>(i) * c + j];
            }
            break;
        }
        case OpKind::row_bcast: {
            const auto& a = in_val(n, 0).data;
            const int r = n.value.shape[0];
            const int c = n.value.shape[1];
            for (int i = 0; i < r; ++i) {
                for (int j = 0; j < c; ++j) n.value.data[static_cast<std::size_t>(i) * c + j] = a[static_cast<std::size_t>(j)];
            }
            break;
        }
        case OpKind::concat: {
            const auto& a = in_val(n, 0).data;
            const auto& b = in_val(n, 1).data;
            std::copy(a.begin(), a.end(), n.value.data.begin());
            std::copy(b.begin(), b.end(), n.value.data.begin() + static_cast<std::ptrdiff_t>(a.size()));
            break;
        }
        case OpKind::slice: {
            const auto& a = in_val(n, 0).data;
            const std::size_t len = n.value.data.size();
            for (std::size_t i = 0; i < len; ++i) n.value.data[i] = a[static_cast<std::size_t>(n.offset) + i];
            break;
        }
        case OpKind::pad: {
            const auto& a = in_val(n, 0).data;
            std::fill(n.value.data.begin(), n.value.data.end(), 0.0);
            for (std::size_t i = 0; i < a.size(); ++i) n.value.data[static_cast<std::size_t>(n.offset) + i] = a[i];
            break;
        }
    }
}

int Tape::matmul(int a, int b, bool trans_a, bool trans_b) {
    check_id(a, "matmul");
    check_id(b, "matmul");
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.shape.size() != 2 || B.shape.size() != 2) {
        fail("matmul", static_cast<int>(size()), "expects rank-2 inputs, got " + A.shape_str() + " and " + B.shape_str());
    }
    const int m = trans_a ? A.shape[1] : A.shape[0];
    const int k = trans_a ? A.shape[0] : A.shape[1];
    const int k2 = trans_b ? B.shape[1] : B.shape[0];
    const int p = trans_b ? B.shape[0] : B.shape[1];
    if (k != k2) {
        fail("matmul", static_cast<int>(size()),
             "inner dimensions disagree: " + A.shape_str() + (trans_a ? "^T" : "") + " vs " + B.shape_str() +
                 (trans_b ? "^T" : ""));
    }
    TapeNode n;
    n.op = OpKind::matmul;
    n.a = a;
    n.b = b;
    n.trans_a = trans_a;
    n.trans_b = trans_b;
    n.requires_grad = node(a).requires_grad || node(b).requires_grad;
    n.value = Tensor::zeros({m, p});
    eval(n);
    return push(std::move(n));
}

namespace {
void require_same_shape(const Tensor& a, const Tensor& b, const char* what, int id) {
    if (a.shape != b.shape) {
        throw std::invalid_argument(std::string("tape: ") + what + " at node " + std::to_string(id) +
                                    ": shapes differ, " + a.shape_str() + " vs " + b.shape_str());
    }
}
}  // namespace

int Tape::add(int a, int b) {
    check_id(a, "add");
    check_id(b, "add");
    require_same_shape(value(a), value(b), "add", static_cast<int>(size()));
    TapeNode n;
    n.op = OpKind::add;
    n.a = a;
    n.b = b;
    n.requires_grad = node(a).requires_grad || node(b).requires_grad;
    n.value = Tensor::zeros(value(a).shape);
    eval(n);
    return push(std::move(n));
}

int Tape::sub(int a, int b) {
    check_id(a, "sub");
    check_id(b, "sub");
    require_same_shape(value(a), value(b), "sub", static_cast<int>(size()));
    TapeNode n;
    n.op = OpKind::sub;
    n.a = a;
    n.b = b;
    n.requires_grad = node(a).requires_grad || node(b).requires_grad;
    n.value = Tensor::zeros(value(a).shape);
    eval(n);
    return push(std::move(n));
}

int Tape::mul(int a, int b) {
    check_id(a, "mul");
    check_id(b, "mul");
    require_same_shape(value(a), value(b), "mul", static_cast<int>(size()));
    TapeNode n;
    n.op = OpKind::mul;
    n.a = a;
    n.b = b;
    n.requires_grad = node(a).requires_grad || node(b).requires_grad;
    n.value = Tensor::zeros(value(a).shape);
    eval(n);
    return push(std::move(n));
}

namespace {
TapeNode unary_node(OpKind op, int a, bool requires_grad, std::vector<int> out_shape) {
    TapeNode n;
    n.op = op;
    n.a = a;
    n.requires_grad = requires_grad;
    n.value = Tensor::zeros(std::move(out_shape));
    return n;
}
}  // namespace

int Tape::relu(int a) {
    check_id(a, "relu");
    TapeNode n = unary_node(OpKind::relu, a, node(a).requires_grad, value(a).shape);
    eval(n);
    return push(std::move(n));
}

int Tape::relu_mask(int a) {
    check_id(a, "relu_mask");
    // piecewise constant: gradient defined as zero, so never requires grad
    TapeNode n = unary_node(OpKind::relu_mask, a, false, value(a).shape);
    eval(n);
    return push(std::move(n));
}

int Tape::square(int a) {
    check_id(a, "square");
    TapeNode n = unary_node(OpKind::square, a, node(a).requires_grad, value(a).shape);
    eval(n);
    return push(std::move(n));
}

int Tape::affine(int a, double alpha, double beta) {
    check_id(a, "affine");
    TapeNode n = unary_node(OpKind::affine, a, node(a).requires_grad, value(a).shape);
    n.alpha = alpha;
    n.beta = beta;
    eval(n);
    return push(std::move(n));
}

int Tape::log(int a) {
    check_id(a, "log");
    TapeNode n = unary_node(OpKind::log_op, a, node(a).requires_grad, value(a).shape);
    eval(n);
    return push(std::move(n));
}

int Tape::exp(int a) {
    check_id(a, "exp");
    TapeNode n = unary_node(OpKind::exp_op, a, node(a).requires_grad, value(a).shape);
    eval(n);
    return push(std::move(n));
}

int Tape::recip(int a) {
    check_id(a, "recip");
    TapeNode n = unary_node(OpKind::recip, a, node(a).requires_grad, value(a).shape);
    eval(n);
    return push(std::move(n));
}

int Tape::sigmoid(int a) {
    check_id(a, "sigmoid");
    TapeNode n = unary_node(OpKind::sigmoid, a, node(a).requires_grad, value(a).shape);
    eval(n);
    return push(std::move(n));
}

int Tape::softplus(int a) {
    check_id(a, "softplus");
    TapeNode n = unary_node(OpKind::softplus, a, node(a).requires_grad, value(a).shape);
    eval(n);
    return push(std::move(n));
}

int Tape::sum(int a) {
    check_id(a, "sum");
    TapeNode n = unary_node(OpKind::sum_all, a, node(a).requires_grad, {});
    eval(n);
    return push(std::move(n));
}

int Tape::mean(int a) {
    check_id(a, "mean");
    const auto n = value(a).numel();
    if (n == 0) fail("mean", static_cast<int>(size()), "empty input");
    return affine(sum(a), 1.0 / static_cast<double>(n), 0.0);
}

int Tape::bfill(int scalar_id, std::vector<int> shape) {
    check_id(scalar_id, "bfill");
    if (!value(scalar_id).is_scalar()) fail("bfill", static_cast<int>(size()), "input is not scalar");
    TapeNode n = unary_node(OpKind::bfill, scalar_id, node(scalar_id).requires_grad, std::move(shape));
    eval(n);
    return push(std::move(n));
}

int Tape::col_sum(int a) {
    check_id(a, "col_sum");
    const Tensor& A = value(a);
    if (A.shape.size() != 2) fail("col_sum", static_cast<int>(size()), "expects rank-2 input, got " + A.shape_str());
    TapeNode n = unary_node(OpKind::col_sum, a, node(a).requires_grad, {A.shape[1]});
    eval(n);
    return push(std::move(n));
}

int Tape::row_bcast(int a, int rows) {
    check_id(a, "row_bcast");
    const Tensor& A = value(a);
    if (A.shape.size() != 1) fail("row_bcast", static_cast<int>(size()), "expects rank-1 input, got " + A.shape_str());
    if (rows <= 0) fail("row_bcast", static_cast<int>(size()), "rows must be positive");
    TapeNode n = unary_node(OpKind::row_bcast, a, node(a).requires_grad, {rows, A.shape[0]});
    eval(n);
    return push(std::move(n));
}

int Tape::concat(int a, int b) {
    check_id(a, "concat");
    check_id(b, "concat");
    const Tensor& A = value(a);
    const Tensor& B = value(b);
    if (A.shape.size() != 1 || B.shape.size() != 1) {
        fail("concat", static_cast<int>(size()), "expects rank-1 inputs, got " + A.shape_str() + " and " + B.shape_str());
    }
    TapeNode n;
    n.op = OpKind::concat;
    n.a = a;
    n.b = b;
    n.requires_grad = node(a).requires_grad || node(b).requires_grad;
    n.value = Tensor::zeros({A.shape[0] + B.shape[0]});
    eval(n);
    return push(std::move(n));
}

int Tape::slice(int a, int offset, int len) {
    check_id(a, "slice");
    const Tensor& A = value(a);
    if (A.shape.size() != 1) fail("slice", static_cast<int>(size()), "expects rank-1 input, got " + A.shape_str());
    if (offset < 0 || len < 0 || offset + len > A.shape[0]) {
        fail("slice", static_cast<int>(size()), "range [" + std::to_string(offset) + "," + std::to_string(offset + len) +
                                                    ") out of bounds for length " + std::to_string(A.shape[0]));
    }
    TapeNode n = unary_node(OpKind::slice, a, node(a).requires_grad, {len});
    n.offset = offset;
    eval(n);
    return push(std::move(n));
}

int Tape::dot(int a, int b) { return sum(mul(a, b)); }

int Tape::bias_add(int x, int b) {
    check_id(x, "bias_add");
    check_id(b, "bias_add");
    const Tensor& X = value(x);
    const Tensor& B = value(b);
    if (X.shape.size() != 2 || B.shape.size() != 1 || B.shape[0] != X.shape[1]) {
        fail("bias_add", static_cast<int>(size()),
             "expects (n x d) and (d), got " + X.shape_str() + " and " + B.shape_str());
    }
    return add(x, row_bcast(b, X.shape[0]));
}

std::vector<int> Tape::backward(int output_id, std::span<const int> wrt) {
    check_id(output_id, "backward");
    if (!value(output_id).is_scalar()) {
        fail("backward", output_id, "output is not scalar (shape " + value(output_id).shape_str() + ")");
    }
    for (int w : wrt) check_id(w, "backward wrt");

    const int n0 = static_cast<int>(nodes_.size());
    std::vector<int> adj(static_cast<std::size_t>(n0), -1);

    // restrict the walk to nodes that lie on a path from the output down to a
    // requested node; without this, differentiating mid-tape (unrolled inner
    // steps) drags the whole recorded prefix along
    std::vector<bool> depends(static_cast<std::size_t>(n0), false);
    for (int w : wrt) depends[static_cast<std::size_t>(w)] = true;
    for (int u = 0; u < n0; ++u) {
        if (depends[static_cast<std::size_t>(u)]) continue;
        const TapeNode& nu = nodes_[static_cast<std::size_t>(u)];
        if ((nu.a >= 0 && depends[static_cast<std::size_t>(nu.a)]) ||
            (nu.b >= 0 && depends[static_cast<std::size_t>(nu.b)])) {
            depends[static_cast<std::size_t>(u)] = true;
        }
    }

    if (nodes_[static_cast<std::size_t>(output_id)].requires_grad && depends[static_cast<std::size_t>(output_id)]) {
        adj[static_cast<std::size_t>(output_id)] = constant(Tensor::full(value(output_id).shape, 1.0));

        auto accum = [&](int target, int contrib) {
            auto& slot = adj[static_cast<std::size_t>(target)];
            slot = slot < 0 ? contrib : add(slot, contrib);
        };
        auto needs = [&](int target) {
            return target >= 0 && nodes_[static_cast<std::size_t>(target)].requires_grad &&
                   depends[static_cast<std::size_t>(target)];
        };

        for (int u = output_id; u >= 0; --u) {
            const int g = adj[static_cast<std::size_t>(u)];
            if (g < 0) continue;
            // copy meta before emitting; emission may reallocate nodes_
            const OpKind op = nodes_[static_cast<std::size_t>(u)].op;
            const int a = nodes_[static_cast<std::size_t>(u)].a;
            const int b = nodes_[static_cast<std::size_t>(u)].b;
            const bool ta = nodes_[static_cast<std::size_t>(u)].trans_a;
            const bool tb = nodes_[static_cast<std::size_t>(u)].trans_b;
            const double alpha = nodes_[static_cast<std::size_t>(u)].alpha;
            const int off = nodes_[static_cast<std::size_t>(u)].offset;

            switch (op) {
                case OpKind::leaf:
                    break;
                case OpKind::matmul: {
                    if (needs(a)) {
                        if (!ta && !tb) accum(a, matmul(g, b, false, true));
                        else if (ta && !tb) accum(a, matmul(b, g, false, true));
                        else if (!ta && tb) accum(a, matmul(g, b, false, false));
                        else accum(a, matmul(b, g, true, true));
                    }
                    if (needs(b)) {
                        if (!ta && !tb) accum(b, matmul(a, g, true, false));
                        else if (ta && !tb) accum(b, matmul(a, g, false, false));
                        else if (!ta && tb) accum(b, matmul(g, a, true, false));
                        else accum(b, matmul(g, a, true, true));
                    }
                    break;
                }
                case OpKind::add:
                    if (needs(a)) accum(a, g);
                    if (needs(b)) accum(b, g);
                    break;
                case OpKind::sub:
                    if (needs(a)) accum(a, g);
                    if (needs(b)) accum(b, affine(g, -1.0, 0.0));
                    break;
                case OpKind::mul:
                    if (needs(a)) accum(a, mul(g, b));
                    if (needs(b)) accum(b, mul(g, a));
                    break;
                case OpKind::relu:
                    if (needs(a)) accum(a, mul(g, relu_mask(a)));
                    break;
                case OpKind::relu_mask:
                    break;  // derivative defined as zero
                case OpKind::square:
                    if (needs(a)) accum(a, mul(g, affine(a, 2.0, 0.0)));
                    break;
                case OpKind::affine:
                    if (needs(a)) accum(a, affine(g, alpha, 0.0));
                    break;
                case OpKind::log_op:
                    if (needs(a)) accum(a, mul(g, recip(a)));
                    break;
                case OpKind::exp_op:
                    if (needs(a)) accum(a, mul(g, u));
                    break;
                case OpKind::recip:
                    if (needs(a)) accum(a, mul(g, affine(mul(u, u), -1.0, 0.0)));
                    break;
                case OpKind::sigmoid:
                    if (needs(a)) accum(a, mul(g, mul(u, affine(u, -1.0, 1.0))));
                    break;
                case OpKind::softplus:
                    if (needs(a)) accum(a, mul(g, sigmoid(a)));
                    break;
                case OpKind::sum_all:
                    if (needs(a)) accum(a, bfill(g, nodes_[static_cast<std::size_t>(a)].value.shape));
                    break;
                case OpKind::bfill:
                    if (needs(a)) accum(a, sum(g));
                    break;
                case OpKind::col_sum:
                    if (needs(a)) accum(a, row_bcast(g, nodes_[static_cast<std::size_t>(a)].value.shape[0]));
                    break;
                case OpKind::row_bcast:
                    if (needs(a)) accum(a, col_sum(g));
                    break;
                case OpKind::concat: {
                    const int la = nodes_[static_cast<std::size_t>(a)].value.shape[0];
                    const int lb = nodes_[static_cast<std::size_t>(b)].value.shape[0];
                    if (needs(a)) accum(a, slice(g, 0, la));
                    if (needs(b)) accum(b, slice(g, la, lb));
                    break;
                }
                case OpKind::slice: {
                    if (needs(a)) {
                        const int total = nodes_[static_cast<std::size_t>(a)].value.shape[0];
                        TapeNode pn = unary_node(OpKind::pad, g, nodes_[static_cast<std::size_t>(g)].requires_grad, {total});
                        pn.offset = off;
                        eval(pn);
                        accum(a, push(std::move(pn)));
                    }
                    break;
                }
                case OpKind::pad:
                    if (needs(a)) {
                        const int len = nodes_[static_cast<std::size_t>(a)].value.shape[0];
                        accum(a, slice(g, off, len));
                    }
                    break;
            }
        }
    }

    std::vector<int> out;
    out.reserve(wrt.size());
    for (int w : wrt) {
        if (w >= n0) fail("backward", w, "wrt node was created during this backward pass");
        out.push_back(adj[static_cast<std::size_t>(w)]);
    }
    return out;
}

}  // namespace fairpath
