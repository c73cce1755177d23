#include "fairpath/linalg.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fairpath {

std::vector<double> cholesky_solve(std::vector<double> a, std::vector<double> b, int n) {
    if (static_cast<std::size_t>(n) * n != a.size() || static_cast<std::size_t>(n) != b.size()) {
        throw std::invalid_argument("cholesky_solve: dimension mismatch");
    }
    // in-place lower factor
    for (int j = 0; j < n; ++j) {
        double d = a[static_cast<std::size_t>(j) * n + j];
        for (int k = 0; k < j; ++k) {
            double ljk = a[static_cast<std::size_t>(j) * n + k];
            d -= ljk * ljk;
        }
        if (!(d > 0.0)) {
            throw std::invalid_argument("cholesky_solve: non-positive pivot at column " + std::to_string(j) +
                                        " (matrix not positive definite)");
        }
        double ljj = std::sqrt(d);
        a[static_cast<std::size_t>(j) * n + j] = ljj;
        for (int i = j + 1; i < n; ++i) {
            double s = a[static_cast<std::size_t>(i) * n + j];
            for (int k = 0; k < j; ++k) {
                s -= a[static_cast<std::size_t>(i) * n + k] * a[static_cast<std::size_t>(j) * n + k];
            }
            a[static_cast<std::size_t>(i) * n + j] = s / ljj;
        }
    }
    // forward substitution L y = b
    for (int i = 0; i < n; ++i) {
        double s = b[static_cast<std::size_t>(i)];
        for (int k = 0; k < i; ++k) s -= a[static_cast<std::size_t>(i) * n + k] * b[static_cast<std::size_t>(k)];
        b[static_cast<std::size_t>(i)] = s / a[static_cast<std::size_t>(i) * n + i];
    }
    // back substitution L^T x = y
    for (int i = n - 1; i >= 0; --i) {
        double s = b[static_cast<std::size_t>(i)];
        for (int k = i + 1; k < n; ++k) s -= a[static_cast<std::size_t>(k) * n + i] * b[static_cast<std::size_t>(k)];
        b[static_cast<std::size_t>(i)] = s / a[static_cast<std::size_t>(i) * n + i];
    }
    return b;
}

}  // namespace fairpath
