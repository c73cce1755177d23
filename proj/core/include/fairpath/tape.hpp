#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "fairpath/tensor.hpp"

namespace fairpath {

enum class OpKind : std::uint8_t {
    leaf,
    matmul,       // op(A) * op(B) with optional transposes
    add,          // elementwise, same shape
    sub,          // elementwise, same shape
    mul,          // elementwise, same shape
    relu,
    relu_mask,    // 1 where x > 0, else 0; derivative defined as zero
    square,
    affine,       // alpha * x + beta, scalar constants
    log_op,
    exp_op,
    recip,
    sigmoid,
    softplus,     // numerically stable log(1 + exp(x))
    sum_all,      // full reduction to a scalar
    bfill,        // scalar broadcast to a fixed shape
    col_sum,      // (n x d) -> (d), sum over rows
    row_bcast,    // (d) -> (n x d), replicate a row
    concat,       // 1-D concatenation
    slice,        // 1-D contiguous slice
    pad           // 1-D zero-padding, adjoint of slice
};

const char* op_name(OpKind op);

struct TapeNode {
    OpKind op = OpKind::leaf;
    int a = -1;
    int b = -1;
    bool trans_a = false;
    bool trans_b = false;
    double alpha = 1.0;
    double beta = 0.0;
    int offset = 0;  // slice/pad start
    bool requires_grad = false;
    Tensor value;
};

// Recording tape for reverse-mode differentiation. Operations evaluate
// eagerly and append a node; node order is a topological order by
// construction. backward() emits the adjoint computation as ordinary tape
// nodes, so a backward pass is itself differentiable (double backward).
class Tape {
public:
    int leaf(Tensor v, bool requires_grad);
    int constant(Tensor v) { return leaf(std::move(v), false); }
    int constant_scalar(double v) { return constant(Tensor::scalar(v)); }

    int matmul(int a, int b, bool trans_a = false, bool trans_b = false);
    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int relu(int a);
    int relu_mask(int a);
    int square(int a);
    int affine(int a, double alpha, double beta);
    int log(int a);
    int exp(int a);
    int recip(int a);
    int sigmoid(int a);
    int softplus(int a);
    int sum(int a);
    int mean(int a);  // sum then scale by 1/numel
    int bfill(int scalar_id, std::vector<int> shape);
    int col_sum(int a);
    int row_bcast(int a, int rows);
    int concat(int a, int b);
    int slice(int a, int offset, int len);
    int dot(int a, int b);       // sum(mul(a, b))
    int bias_add(int x, int b);  // x + row_bcast(b)

    std::size_t size() const { return nodes_.size(); }
    const TapeNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
    const Tensor& value(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }

    // Drops all nodes with id >= n. Callers must not retain ids >= n.
    void truncate(std::size_t n);

    // Replaces a leaf's value (shape-checked) for a subsequent replay().
    void set_leaf(int id, const Tensor& v);

    // Recomputes every non-leaf value in recording order. Replaying with
    // identical leaf values reproduces all values bit-for-bit.
    void replay();

    // Reverse pass from a scalar output. Emits adjoint nodes onto this tape
    // and returns the adjoint node id per requested id (-1 when the output
    // does not depend on it).
    std::vector<int> backward(int output_id, std::span<const int> wrt);

private:
    std::vector<TapeNode> nodes_;

    int push(TapeNode n);
    void eval(TapeNode& n) const;
    const Tensor& in_val(const TapeNode& n, int which) const;
    void check_id(int id, const char* what) const;
};

}  // namespace fairpath
