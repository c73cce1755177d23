#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "fairpath/param_vector.hpp"

namespace fairpath {

// Adam with bias correction. eps defaults to 1e-3, the setting used for the
// tabular experiments.
struct Adam {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-3;

    void step(ParamVector& params, const ParamVector& grad, double lr) {
        if (m_.empty()) {
            m_.assign(params.values.size(), 0.0);
            v_.assign(params.values.size(), 0.0);
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
        for (std::size_t i = 0; i < params.values.size(); ++i) {
            const double g = grad.values[i];
            m_[i] = beta1 * m_[i] + (1.0 - beta1) * g;
            v_[i] = beta2 * v_[i] + (1.0 - beta2) * g * g;
            const double mhat = m_[i] / bc1;
            const double vhat = v_[i] / bc2;
            params.values[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }

private:
    std::vector<double> m_, v_;
    long t_ = 0;
};

}  // namespace fairpath
