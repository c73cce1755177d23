#include "fairpath/param_vector.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fairpath {

void ParamVector::add(const std::string& name, std::vector<int> shape, std::vector<double> vals) {
    if (shape_numel(shape) != static_cast<std::int64_t>(vals.size())) {
        throw std::invalid_argument("param_vector: entry '" + name + "' shape/value length mismatch");
    }
    LayoutEntry e;
    e.name = name;
    e.shape = std::move(shape);
    e.offset = size();
    layout.push_back(std::move(e));
    values.insert(values.end(), vals.begin(), vals.end());
}

void ParamVector::add_zeros(const std::string& name, std::vector<int> shape) {
    auto n = shape_numel(shape);
    add(name, std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0));
}

bool ParamVector::same_layout(const ParamVector& other) const {
    if (layout.size() != other.layout.size()) return false;
    for (std::size_t i = 0; i < layout.size(); ++i) {
        if (layout[i].shape != other.layout[i].shape || layout[i].offset != other.layout[i].offset) return false;
    }
    return true;
}

void ParamVector::require_same_layout(const char* what, const ParamVector& other) const {
    if (!same_layout(other)) throw std::invalid_argument(std::string(what) + ": parameter layouts differ");
}

Tensor ParamVector::entry_tensor(std::size_t idx) const {
    const auto& e = layout.at(idx);
    std::vector<double> d(values.begin() + e.offset, values.begin() + e.offset + e.extent());
    return Tensor(e.shape, std::move(d));
}

void ParamVector::set_entry(std::size_t idx, const Tensor& t) {
    const auto& e = layout.at(idx);
    if (t.shape != e.shape) {
        throw std::invalid_argument("param_vector: entry '" + e.name + "' expects shape mismatch " + t.shape_str());
    }
    std::copy(t.data.begin(), t.data.end(), values.begin() + e.offset);
}

ParamVector ParamVector::zeros_like() const {
    ParamVector out = *this;
    std::fill(out.values.begin(), out.values.end(), 0.0);
    return out;
}

double ParamVector::dot(const ParamVector& other) const {
    require_same_layout("dot", other);
    double s = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) s += values[i] * other.values[i];
    return s;
}

double ParamVector::norm2() const {
    double s = 0.0;
    for (double v : values) s += v * v;
    return std::sqrt(s);
}

void ParamVector::axpy(double a, const ParamVector& x) {
    require_same_layout("axpy", x);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += a * x.values[i];
}

void ParamVector::scale(double a) {
    for (double& v : values) v *= a;
}

void ParamVector::project_norm(double cap) {
    double n = norm2();
    if (n > cap && n > 0.0) scale(cap / n);
}

bool ParamVector::all_finite() const {
    for (double v : values) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

ParamVector operator+(const ParamVector& a, const ParamVector& b) {
    ParamVector out = a;
    out.axpy(1.0, b);
    return out;
}

ParamVector operator-(const ParamVector& a, const ParamVector& b) {
    ParamVector out = a;
    out.axpy(-1.0, b);
    return out;
}

ParamVector scaled(const ParamVector& a, double s) {
    ParamVector out = a;
    out.scale(s);
    return out;
}

namespace {

std::string shape_to_str(const std::vector<int>& shape) {
    std::ostringstream os;
    if (shape.empty()) {
        os << "scalar";
        return os.str();
    }
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    return os.str();
}

std::vector<int> shape_from_str(const std::string& s) {
    if (s == "scalar") return {};
    std::vector<int> shape;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, 'x')) shape.push_back(std::stoi(tok));
    return shape;
}

static_assert(std::endian::native == std::endian::little, "checkpoint io assumes little-endian host");

}  // namespace

void save_params(const std::string& path, const ParamVector& pv) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_params: cannot open " + path);
    f << "fairpath-params v1";
    for (const auto& e : pv.layout) {
        f << " " << e.name << ":" << shape_to_str(e.shape) << "@" << e.offset;
    }
    f << "\n";
    f.write(reinterpret_cast<const char*>(pv.values.data()),
            static_cast<std::streamsize>(pv.values.size() * sizeof(double)));
    if (!f) throw std::runtime_error("save_params: write failed for " + path);
}

ParamVector load_params(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_params: cannot open " + path);
    std::string header;
    std::getline(f, header);
    std::stringstream hs(header);
    std::string magic, version;
    hs >> magic >> version;
    if (magic != "fairpath-params" || version != "v1") {
        throw std::runtime_error("load_params: bad header in " + path);
    }
    ParamVector pv;
    std::string entry;
    std::int64_t expected_offset = 0;
    while (hs >> entry) {
        auto colon = entry.find(':');
        auto at = entry.find('@');
        if (colon == std::string::npos || at == std::string::npos || at < colon) {
            throw std::runtime_error("load_params: malformed layout entry '" + entry + "'");
        }
        LayoutEntry e;
        e.name = entry.substr(0, colon);
        e.shape = shape_from_str(entry.substr(colon + 1, at - colon - 1));
        e.offset = std::stoll(entry.substr(at + 1));
        if (e.offset != expected_offset) {
            throw std::runtime_error("load_params: non-contiguous offsets in " + path);
        }
        expected_offset += e.extent();
        pv.layout.push_back(e);
    }
    std::int64_t total = 0;
    for (const auto& e : pv.layout) total += e.extent();
    pv.values.resize(static_cast<std::size_t>(total));
    f.read(reinterpret_cast<char*>(pv.values.data()), static_cast<std::streamsize>(total * sizeof(double)));
    if (f.gcount() != static_cast<std::streamsize>(total * sizeof(double))) {
        throw std::runtime_error("load_params: truncated value block in " + path);
    }
    return pv;
}

}  // namespace fairpath
