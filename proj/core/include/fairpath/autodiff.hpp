#pragma once

#include "fairpath/param_vector.hpp"
#include "fairpath/tape.hpp"

namespace fairpath {

// A parameter group materialized as tape leaves, one per layout entry.
struct TapeBinding {
    std::vector<int> leaf_ids;
    std::vector<LayoutEntry> layout;
};

TapeBinding bind_params(Tape& tape, const ParamVector& params);

// Writes new parameter values into the bound leaves (no recompute).
void set_bound_params(Tape& tape, const TapeBinding& binding, const ParamVector& params);

// Collects adjoint node values into a ParamVector; -1 entries become zeros.
ParamVector gather_adjoints(const Tape& tape, const TapeBinding& binding, const std::vector<int>& adj_ids);

// Re-executes the recorded program with new parameters and input, returning
// the value at output_id. Replaying with identical values is bit-exact.
Tensor forward(Tape& tape, const TapeBinding& binding, const ParamVector& params, int input_id, const Tensor& input,
               int output_id);

// dL/dtheta for a scalar output, in the binding's layout.
ParamVector grad(Tape& tape, const TapeBinding& binding, int scalar_output_id);

// Hessian-vector product (d^2 L/dtheta^2) v, computed as the gradient of
// <dL/dtheta, v> without materializing the Hessian.
ParamVector hvp(Tape& tape, const TapeBinding& binding, int scalar_output_id, const ParamVector& v);

// Mixed second partial: (d_a d_b L)^T v, the a-side gradient of <d_b L, v>.
// Returns zeros when the loss does not couple the two groups.
ParamVector mixed_partial_vjp(Tape& tape, const TapeBinding& binding_a, const TapeBinding& binding_b,
                              int scalar_output_id, const ParamVector& v);

}  // namespace fairpath
