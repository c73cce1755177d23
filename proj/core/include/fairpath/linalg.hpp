#pragma once

#include <vector>

namespace fairpath {

// Solves A x = b for symmetric positive-definite A (row-major n x n) by
// Cholesky factorization. Throws std::invalid_argument when a non-positive
// pivot is met.
std::vector<double> cholesky_solve(std::vector<double> a, std::vector<double> b, int n);

}  // namespace fairpath
