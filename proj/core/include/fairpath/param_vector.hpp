#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairpath/tensor.hpp"

namespace fairpath {

struct LayoutEntry {
    std::string name;
    std::vector<int> shape;
    std::int64_t offset = 0;

    std::int64_t extent() const { return shape_numel(shape); }
};

// Flat 64-bit parameter storage with named, contiguous layout entries. All
// derivatives w.r.t. a parameter group are expressed in this coordinate
// system.
struct ParamVector {
    std::vector<double> values;
    std::vector<LayoutEntry> layout;

    // Appends a named block; offset is assigned contiguously.
    void add(const std::string& name, std::vector<int> shape, std::vector<double> vals);
    void add_zeros(const std::string& name, std::vector<int> shape);

    std::int64_t size() const { return static_cast<std::int64_t>(values.size()); }
    bool same_layout(const ParamVector& other) const;
    void require_same_layout(const char* what, const ParamVector& other) const;

    Tensor entry_tensor(std::size_t idx) const;
    void set_entry(std::size_t idx, const Tensor& t);

    ParamVector zeros_like() const;
    double dot(const ParamVector& other) const;
    double norm2() const;
    // this += a * x
    void axpy(double a, const ParamVector& x);
    void scale(double a);
    // Projects onto the Euclidean ball of the given radius (no-op if inside).
    void project_norm(double cap);
    bool all_finite() const;
};

ParamVector operator+(const ParamVector& a, const ParamVector& b);
ParamVector operator-(const ParamVector& a, const ParamVector& b);
ParamVector scaled(const ParamVector& a, double s);

// Checkpoint format: one text header line listing layout entries, then the
// raw values as little-endian 64-bit floats.
void save_params(const std::string& path, const ParamVector& pv);
ParamVector load_params(const std::string& path);

}  // namespace fairpath
