#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace fairpath {

// Dense row-major tensor of doubles. Rank 0 (shape {}) is a scalar with one
// element; product of an empty shape is 1.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<int> shp, std::vector<double> d);

    static Tensor zeros(std::vector<int> shp);
    static Tensor full(std::vector<int> shp, double v);
    static Tensor scalar(double v);
    static Tensor matrix(int rows, int cols, std::vector<double> d);
    static Tensor vec(std::vector<double> d);

    std::int64_t numel() const;
    bool is_scalar() const { return numel() == 1; }
    double scalar_value() const;

    // Rank-2 accessors; throw on rank mismatch.
    int rows() const;
    int cols() const;
    double& at(int i, int j);
    double at(int i, int j) const;

    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape == other.shape; }
    std::string shape_str() const;
};

std::int64_t shape_numel(const std::vector<int>& shape);

}  // namespace fairpath
