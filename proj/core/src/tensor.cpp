#include "fairpath/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace fairpath {

std::int64_t shape_numel(const std::vector<int>& shape) {
    std::int64_t n = 1;
    for (int d : shape) {
        if (d < 0) throw std::invalid_argument("tensor: negative dimension " + std::to_string(d));
        n *= d;
    }
    return n;
}

Tensor::Tensor(std::vector<int> shp, std::vector<double> d) : shape(std::move(shp)), data(std::move(d)) {
    if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
        throw std::invalid_argument("tensor: shape " + shape_str() + " does not match data length " +
                                    std::to_string(data.size()));
    }
}

Tensor Tensor::zeros(std::vector<int> shp) {
    auto n = shape_numel(shp);
    return Tensor(std::move(shp), std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

Tensor Tensor::full(std::vector<int> shp, double v) {
    auto n = shape_numel(shp);
    return Tensor(std::move(shp), std::vector<double>(static_cast<std::size_t>(n), v));
}

Tensor Tensor::scalar(double v) { return Tensor({}, {v}); }

Tensor Tensor::matrix(int rows, int cols, std::vector<double> d) { return Tensor({rows, cols}, std::move(d)); }

Tensor Tensor::vec(std::vector<double> d) {
    int n = static_cast<int>(d.size());
    return Tensor({n}, std::move(d));
}

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(data.size()); }

double Tensor::scalar_value() const {
    if (!is_scalar()) throw std::invalid_argument("tensor: expected scalar, got shape " + shape_str());
    return data[0];
}

int Tensor::rows() const {
    if (shape.size() != 2) throw std::invalid_argument("tensor: rows() on shape " + shape_str());
    return shape[0];
}

int Tensor::cols() const {
    if (shape.size() != 2) throw std::invalid_argument("tensor: cols() on shape " + shape_str());
    return shape[1];
}

double& Tensor::at(int i, int j) { return data[static_cast<std::size_t>(i) * cols() + j]; }

double Tensor::at(int i, int j) const { return data[static_cast<std::size_t>(i) * cols() + j]; }

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

}  // namespace fairpath
