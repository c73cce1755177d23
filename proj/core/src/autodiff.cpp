#include "fairpath/autodiff.hpp"

#include <stdexcept>

namespace fairpath {

TapeBinding bind_params(Tape& tape, const ParamVector& params) {
    TapeBinding b;
    b.layout = params.layout;
    b.leaf_ids.reserve(params.layout.size());
    for (std::size_t i = 0; i < params.layout.size(); ++i) {
        b.leaf_ids.push_back(tape.leaf(params.entry_tensor(i), /*requires_grad=*/true));
    }
    return b;
}

void set_bound_params(Tape& tape, const TapeBinding& binding, const ParamVector& params) {
    if (params.layout.size() != binding.layout.size()) {
        throw std::invalid_argument("set_bound_params: layout mismatch");
    }
    for (std::size_t i = 0; i < binding.leaf_ids.size(); ++i) {
        tape.set_leaf(binding.leaf_ids[i], params.entry_tensor(i));
    }
}

ParamVector gather_adjoints(const Tape& tape, const TapeBinding& binding, const std::vector<int>& adj_ids) {
    if (adj_ids.size() != binding.leaf_ids.size()) {
        throw std::invalid_argument("gather_adjoints: adjoint count does not match binding");
    }
    ParamVector out;
    for (std::size_t i = 0; i < binding.layout.size(); ++i) {
        const auto& e = binding.layout[i];
        if (adj_ids[i] < 0) {
            out.add_zeros(e.name, e.shape);
        } else {
            const Tensor& t = tape.value(adj_ids[i]);
            out.add(e.name, e.shape, t.data);
        }
    }
    return out;
}

Tensor forward(Tape& tape, const TapeBinding& binding, const ParamVector& params, int input_id, const Tensor& input,
               int output_id) {
    set_bound_params(tape, binding, params);
    tape.set_leaf(input_id, input);
    tape.replay();
    return tape.value(output_id);
}

ParamVector grad(Tape& tape, const TapeBinding& binding, int scalar_output_id) {
    auto adj = tape.backward(scalar_output_id, binding.leaf_ids);
    return gather_adjoints(tape, binding, adj);
}

ParamVector hvp(Tape& tape, const TapeBinding& binding, int scalar_output_id, const ParamVector& v) {
    if (v.layout.size() != binding.layout.size()) {
        throw std::invalid_argument("hvp: vector layout does not match parameter layout");
    }
    for (std::size_t i = 0; i < binding.layout.size(); ++i) {
        if (v.layout[i].shape != binding.layout[i].shape) {
            throw std::invalid_argument("hvp: vector layout does not match parameter layout at entry '" +
                                        binding.layout[i].name + "'");
        }
    }
    auto g = tape.backward(scalar_output_id, binding.leaf_ids);
    int inner = -1;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g[i] < 0) continue;
        int vi = tape.constant(v.entry_tensor(i));
        int term = tape.dot(g[i], vi);
        inner = inner < 0 ? term : tape.add(inner, term);
    }
    if (inner < 0) {
        // loss independent of the parameters: Hessian is zero
        ParamVector out;
        for (const auto& e : binding.layout) out.add_zeros(e.name, e.shape);
        return out;
    }
    auto h = tape.backward(inner, binding.leaf_ids);
    return gather_adjoints(tape, binding, h);
}

ParamVector mixed_partial_vjp(Tape& tape, const TapeBinding& binding_a, const TapeBinding& binding_b,
                              int scalar_output_id, const ParamVector& v) {
    if (v.layout.size() != binding_b.layout.size()) {
        throw std::invalid_argument("mixed_partial_vjp: vector layout does not match b-side layout");
    }
    auto gb = tape.backward(scalar_output_id, binding_b.leaf_ids);
    int inner = -1;
    for (std::size_t i = 0; i < gb.size(); ++i) {
        if (gb[i] < 0) continue;
        int vi = tape.constant(v.entry_tensor(i));
        int term = tape.dot(gb[i], vi);
        inner = inner < 0 ? term : tape.add(inner, term);
    }
    if (inner < 0) {
        ParamVector out;
        for (const auto& e : binding_a.layout) out.add_zeros(e.name, e.shape);
        return out;
    }
    auto ga = tape.backward(inner, binding_a.leaf_ids);
    return gather_adjoints(tape, binding_a, ga);
}

}  // namespace fairpath
