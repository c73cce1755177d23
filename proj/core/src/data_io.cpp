#include "fairpath/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fairpath::data {

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

std::uint64_t fnv1a64_str(const std::string& s) { return fnv1a64(s.data(), s.size()); }

std::vector<int> GroupedDataset::indices_of(Split s, int g) const {
    std::vector<int> out;
    for (int i = 0; i < n(); ++i) {
        if (split[static_cast<std::size_t>(i)] == s && group[static_cast<std::size_t>(i)] == g) out.push_back(i);
    }
    return out;
}

std::vector<int> GroupedDataset::indices_of(Split s) const {
    std::vector<int> out;
    for (int i = 0; i < n(); ++i) {
        if (split[static_cast<std::size_t>(i)] == s) out.push_back(i);
    }
    return out;
}

Tensor GroupedDataset::gather_features(const std::vector<int>& idx) const {
    const int d = dim();
    Tensor out = Tensor::zeros({static_cast<int>(idx.size()), d});
    for (std::size_t r = 0; r < idx.size(); ++r) {
        const double* src = features.data.data() + static_cast<std::size_t>(idx[r]) * d;
        std::copy(src, src + d, out.data.begin() + static_cast<std::ptrdiff_t>(r * static_cast<std::size_t>(d)));
    }
    return out;
}

Tensor GroupedDataset::gather_labels(const std::vector<int>& idx) const {
    Tensor out = Tensor::zeros({static_cast<int>(idx.size()), 1});
    for (std::size_t r = 0; r < idx.size(); ++r) out.data[r] = labels[static_cast<std::size_t>(idx[r])];
    return out;
}

namespace {

static_assert(std::endian::native == std::endian::little, "dataset io assumes little-endian host");

std::string canonical_header(const GroupedDataset& ds) {
    std::ostringstream os;
    os << "fairpath-dataset v1 n=" << ds.n() << " d=" << ds.dim()
       << " task=" << (ds.task == models::Task::regression ? "regression" : "classification") << " names=";
    for (std::size_t i = 0; i < ds.feature_names.size(); ++i) {
        if (i) os << ",";
        os << ds.feature_names[i];
    }
    os << "\n";
    return os.str();
}

void append_doubles(std::string& buf, const std::vector<double>& v) {
    const auto* p = reinterpret_cast<const char*>(v.data());
    buf.append(p, v.size() * sizeof(double));
}

std::string canonical_bytes(const GroupedDataset& ds) {
    std::string buf = canonical_header(ds);
    append_doubles(buf, ds.features.data);
    append_doubles(buf, ds.labels);
    std::vector<double> g(ds.group.begin(), ds.group.end());
    append_doubles(buf, g);
    std::vector<double> s;
    s.reserve(ds.split.size());
    for (Split sp : ds.split) s.push_back(static_cast<double>(static_cast<int>(sp)));
    append_doubles(buf, s);
    return buf;
}

}  // namespace

std::uint64_t GroupedDataset::canonical_hash() const {
    std::string bytes = canonical_bytes(*this);
    return fnv1a64(bytes.data(), bytes.size());
}

void save_canonical(const std::string& path, const GroupedDataset& ds) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("save_canonical: cannot open " + path);
    std::string bytes = canonical_bytes(ds);
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("save_canonical: write failed for " + path);
}

GroupedDataset load_canonical(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_canonical: cannot open " + path);
    std::string header;
    std::getline(f, header);
    std::stringstream hs(header);
    std::string magic, version, tok;
    hs >> magic >> version;
    if (magic != "fairpath-dataset" || version != "v1") throw std::runtime_error("load_canonical: bad header in " + path);
    int n = -1, d = -1;
    std::string task_str, names_str;
    while (hs >> tok) {
        auto eq = tok.find('=');
        if (eq == std::string::npos) throw std::runtime_error("load_canonical: malformed header field '" + tok + "'");
        std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
        if (key == "n") n = std::stoi(val);
        else if (key == "d") d = std::stoi(val);
        else if (key == "task") task_str = val;
        else if (key == "names") names_str = val;
    }
    if (n < 0 || d < 0) throw std::runtime_error("load_canonical: missing n/d in header");
    GroupedDataset ds;
    ds.task = task_str == "classification" ? models::Task::binary_classification : models::Task::regression;
    {
        std::stringstream ns(names_str);
        std::string name;
        while (std::getline(ns, name, ',')) {
            if (!name.empty()) ds.feature_names.push_back(name);
        }
    }
    auto read_block = [&](std::vector<double>& out, std::size_t count) {
        out.resize(count);
        f.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(count * sizeof(double)));
        if (f.gcount() != static_cast<std::streamsize>(count * sizeof(double))) {
            throw std::runtime_error("load_canonical: truncated block in " + path);
        }
    };
    std::vector<double> feat, lab, grp, spl;
    read_block(feat, static_cast<std::size_t>(n) * static_cast<std::size_t>(d));
    read_block(lab, static_cast<std::size_t>(n));
    read_block(grp, static_cast<std::size_t>(n));
    read_block(spl, static_cast<std::size_t>(n));
    ds.features = Tensor({n, d}, std::move(feat));
    ds.labels = std::move(lab);
    ds.group.reserve(static_cast<std::size_t>(n));
    ds.split.reserve(static_cast<std::size_t>(n));
    for (double g : grp) ds.group.push_back(static_cast<int>(g));
    for (double s : spl) ds.split.push_back(static_cast<Split>(static_cast<int>(s)));
    ds.provenance.source = path;
    ds.provenance.content_hash = ds.canonical_hash();
    return ds;
}

CsvSchema CsvSchema::from_json_text(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    CsvSchema s;
    std::string task = j.value("task", "regression");
    if (task == "regression") s.task = models::Task::regression;
    else if (task == "classification") s.task = models::Task::binary_classification;
    else throw std::invalid_argument("schema: unknown task '" + task + "'");
    if (!j.contains("label") || !j.contains("group")) {
        throw std::invalid_argument("schema: 'label' and 'group' columns are required");
    }
    s.label_column = j.at("label").get<std::string>();
    s.group_column = j.at("group").get<std::string>();
    s.group_one_value = j.value("group_one_value", "1");
    if (j.contains("features")) s.feature_columns = j.at("features").get<std::vector<std::string>>();
    s.label_scale = j.value("label_scale", 1.0);
    return s;
}

CsvSchema CsvSchema::from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("schema: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json_text(ss.str());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    out.push_back(cur);
    for (auto& s : out) {
        std::size_t b = s.find_first_not_of(" \t");
        std::size_t e = s.find_last_not_of(" \t");
        s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
    }
    return out;
}

double parse_cell(const std::string& cell, int row, const std::string& col) {
    if (cell.empty()) {
        throw std::invalid_argument("load_csv: empty cell at row " + std::to_string(row) + ", column '" + col + "'");
    }
    char* end = nullptr;
    double v = std::strtod(cell.c_str(), &end);
    if (end != cell.c_str() + cell.size()) {
        throw std::invalid_argument("load_csv: non-numeric cell '" + cell + "' at row " + std::to_string(row) +
                                    ", column '" + col + "'");
    }
    return v;
}

}  // namespace

GroupedDataset load_csv(const std::string& path, const CsvSchema& schema) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_csv: cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("load_csv: empty file " + path);
    auto header = split_csv_line(line);

    auto col_index = [&](const std::string& name) -> int {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return static_cast<int>(i);
        }
        return -1;
    };
    int label_idx = col_index(schema.label_column);
    if (label_idx < 0) throw std::invalid_argument("load_csv: missing label column '" + schema.label_column + "'");
    int group_idx = col_index(schema.group_column);
    if (group_idx < 0) throw std::invalid_argument("load_csv: missing group column '" + schema.group_column + "'");

    std::vector<int> feat_idx;
    std::vector<std::string> feat_names;
    if (!schema.feature_columns.empty()) {
        for (const auto& name : schema.feature_columns) {
            int idx = col_index(name);
            if (idx < 0) throw std::invalid_argument("load_csv: missing feature column '" + name + "'");
            feat_idx.push_back(idx);
            feat_names.push_back(name);
        }
    } else {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (static_cast<int>(i) == label_idx || static_cast<int>(i) == group_idx) continue;
            feat_idx.push_back(static_cast<int>(i));
            feat_names.push_back(header[i]);
        }
    }
    if (feat_idx.empty()) throw std::invalid_argument("load_csv: no feature columns");

    GroupedDataset ds;
    ds.task = schema.task;
    ds.feature_names = feat_names;
    std::vector<double> feat;
    int row = 0;
    while (std::getline(f, line)) {
        ++row;
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw std::invalid_argument("load_csv: row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                                        " cells, header has " + std::to_string(header.size()));
        }
        for (std::size_t k = 0; k < feat_idx.size(); ++k) {
            feat.push_back(parse_cell(cells[static_cast<std::size_t>(feat_idx[k])], row, feat_names[k]));
        }
        ds.labels.push_back(parse_cell(cells[static_cast<std::size_t>(label_idx)], row, schema.label_column) *
                            schema.label_scale);
        const std::string& gcell = cells[static_cast<std::size_t>(group_idx)];
        if (gcell.empty()) {
            throw std::invalid_argument("load_csv: empty group value at row " + std::to_string(row) + ", column '" +
                                        schema.group_column + "'");
        }
        ds.group.push_back(gcell == schema.group_one_value ? 1 : 0);
        ds.split.push_back(Split::train);
    }
    if (row == 0) throw std::runtime_error("load_csv: no data rows in " + path);
    ds.features = Tensor({row, static_cast<int>(feat_idx.size())}, std::move(feat));
    bool has0 = false, has1 = false;
    for (int g : ds.group) (g == 0 ? has0 : has1) = true;
    if (!has1) {
        throw std::invalid_argument("load_csv: group value '" + schema.group_one_value + "' never appears in column '" +
                                    schema.group_column + "'");
    }
    if (!has0) {
        throw std::invalid_argument("load_csv: every row matches group value '" + schema.group_one_value +
                                    "', second group is empty");
    }
    if (schema.task == models::Task::binary_classification) {
        for (std::size_t i = 0; i < ds.labels.size(); ++i) {
            if (ds.labels[i] != 1.0 && ds.labels[i] != -1.0) {
                throw std::invalid_argument("load_csv: classification label at row " + std::to_string(i + 1) +
                                            " is not in {-1,+1}");
            }
        }
    }
    ds.provenance.source = path;
    ds.provenance.content_hash = ds.canonical_hash();
    return ds;
}

GroupedDataset split(GroupedDataset ds, std::array<double, 3> fractions, std::uint64_t seed) {
    double total = fractions[0] + fractions[1] + fractions[2];
    if (std::fabs(total - 1.0) > 1e-9) throw std::invalid_argument("split: fractions must sum to 1");
    auto rng = make_rng(seed);
    for (int g = 0; g < 2; ++g) {
        std::vector<int> idx;
        for (int i = 0; i < ds.n(); ++i) {
            if (ds.group[static_cast<std::size_t>(i)] == g) idx.push_back(i);
        }
        const auto ng = static_cast<long>(idx.size());
        long n_train = std::lround(fractions[0] * static_cast<double>(ng));
        long n_val = std::lround(fractions[1] * static_cast<double>(ng));
        if (n_train < 1 || n_val < 1 || ng - n_train - n_val < 1) {
            throw std::invalid_argument("split: group " + std::to_string(g) + " has " + std::to_string(ng) +
                                        " rows, too small to stratify");
        }
        std::shuffle(idx.begin(), idx.end(), rng);
        for (long k = 0; k < ng; ++k) {
            Split s = k < n_train ? Split::train : (k < n_train + n_val ? Split::val : Split::test);
            ds.split[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])] = s;
        }
    }
    ds.provenance.content_hash = ds.canonical_hash();
    return ds;
}

GroupedDataset standardize(GroupedDataset ds) {
    const int d = ds.dim();
    auto train_idx = ds.indices_of(Split::train);
    if (train_idx.empty()) throw std::invalid_argument("standardize: empty train split");
    std::vector<double> mean(static_cast<std::size_t>(d), 0.0), var(static_cast<std::size_t>(d), 0.0);
    for (int i : train_idx) {
        for (int j = 0; j < d; ++j) mean[static_cast<std::size_t>(j)] += ds.features.at(i, j);
    }
    for (auto& m : mean) m /= static_cast<double>(train_idx.size());
    for (int i : train_idx) {
        for (int j = 0; j < d; ++j) {
            double dv = ds.features.at(i, j) - mean[static_cast<std::size_t>(j)];
            var[static_cast<std::size_t>(j)] += dv * dv;
        }
    }
    for (auto& v : var) v /= static_cast<double>(train_idx.size());
    for (int i = 0; i < ds.n(); ++i) {
        for (int j = 0; j < d; ++j) {
            double sd = std::sqrt(var[static_cast<std::size_t>(j)]);
            if (sd < 1e-12) sd = 1.0;  // constant column: center only
            ds.features.at(i, j) = (ds.features.at(i, j) - mean[static_cast<std::size_t>(j)]) / sd;
        }
    }
    ds.provenance.content_hash = ds.canonical_hash();
    return ds;
}

SyntheticSpec SyntheticSpec::fair_realizable(std::uint64_t seed) {
    SyntheticSpec s;
    s.seed = seed;
    s.input_dim = 10;
    s.signal_coeffs = {0.6, 0.6, 0.6, 0.6, 0.6};
    s.group_bias_coeffs = {};  // no group term: both groups share one model
    s.group1_signal_shift = 0.0;
    s.noise_scale = 0.05;
    return s;
}

SyntheticSpec SyntheticSpec::biased(std::uint64_t seed) {
    // Group 1 carries an extra slope on the spurious block, so a predictor
    // shared across groups is miscalibrated in opposite directions per group
    // (a large sufficiency gap), while per-group optimal heads differ by
    // roughly |b| = 2. The signal-block shift keeps the group/label Pearson
    // correlation around 0.2.
    SyntheticSpec s;
    s.seed = seed;
    s.input_dim = 10;
    s.signal_coeffs = {0.6, 0.6, 0.6, 0.6, 0.6};
    s.group_bias_coeffs = {0.9, 0.9, 0.9, 0.9, 0.9};
    s.group1_signal_shift = 0.3;
    s.noise_scale = 0.8;
    return s;
}

std::string SyntheticSpec::to_json() const {
    nlohmann::json j;
    j["seed"] = seed;
    j["n_per_group"] = n_per_group;
    j["input_dim"] = input_dim;
    j["signal_coeffs"] = signal_coeffs;
    j["spurious_coeffs"] = spurious_coeffs;
    j["group_bias_coeffs"] = group_bias_coeffs;
    j["group1_signal_shift"] = group1_signal_shift;
    j["group1_spurious_shift"] = group1_spurious_shift;
    j["group0_spurious_scale"] = group0_spurious_scale;
    j["noise_scale"] = noise_scale;
    j["group1_noise_scale"] = group1_noise_scale;
    j["task"] = task == models::Task::regression ? "regression" : "classification";
    return j.dump();
}

SyntheticSpec SyntheticSpec::from_json_text(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    SyntheticSpec s;
    if (j.contains("regime")) {
        std::string regime = j.at("regime").get<std::string>();
        std::uint64_t seed = j.value("seed", 0ull);
        if (regime == "fair") s = fair_realizable(seed);
        else if (regime == "biased") s = biased(seed);
        else throw std::invalid_argument("synthetic spec: unknown regime '" + regime + "'");
    }
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("n_per_group")) s.n_per_group = j.at("n_per_group").get<int>();
    if (j.contains("input_dim")) s.input_dim = j.at("input_dim").get<int>();
    if (j.contains("signal_coeffs")) s.signal_coeffs = j.at("signal_coeffs").get<std::vector<double>>();
    if (j.contains("spurious_coeffs")) s.spurious_coeffs = j.at("spurious_coeffs").get<std::vector<double>>();
    if (j.contains("group_bias_coeffs")) s.group_bias_coeffs = j.at("group_bias_coeffs").get<std::vector<double>>();
    if (j.contains("group1_signal_shift")) s.group1_signal_shift = j.at("group1_signal_shift").get<double>();
    if (j.contains("group1_spurious_shift")) s.group1_spurious_shift = j.at("group1_spurious_shift").get<double>();
    if (j.contains("group0_spurious_scale")) s.group0_spurious_scale = j.at("group0_spurious_scale").get<double>();
    if (j.contains("noise_scale")) s.noise_scale = j.at("noise_scale").get<double>();
    if (j.contains("group1_noise_scale")) s.group1_noise_scale = j.at("group1_noise_scale").get<double>();
    if (j.contains("task")) {
        std::string t = j.at("task").get<std::string>();
        s.task = t == "classification" ? models::Task::binary_classification : models::Task::regression;
    }
    return s;
}

GroupedDataset gen_synthetic(const SyntheticSpec& spec) {
    if (spec.n_per_group < 2) {
        throw std::invalid_argument("gen_synthetic: n_per_group must be >= 2 (cannot split otherwise)");
    }
    if (spec.input_dim < 1) throw std::invalid_argument("gen_synthetic: input_dim must be >= 1");
    const std::size_t n_sig = spec.signal_coeffs.size();
    const std::size_t n_spur = std::max(spec.spurious_coeffs.size(), spec.group_bias_coeffs.size());
    if (n_sig + n_spur > static_cast<std::size_t>(spec.input_dim)) {
        throw std::invalid_argument("gen_synthetic: coefficient blocks exceed input_dim");
    }
    auto coeff = [](const std::vector<double>& v, std::size_t j) { return j < v.size() ? v[j] : 0.0; };
    auto rng = make_rng(spec.seed);
    const int n = 2 * spec.n_per_group;
    const int d = spec.input_dim;
    GroupedDataset ds;
    ds.task = spec.task;
    ds.features = Tensor::zeros({n, d});
    ds.labels.resize(static_cast<std::size_t>(n));
    ds.group.resize(static_cast<std::size_t>(n));
    ds.split.assign(static_cast<std::size_t>(n), Split::train);
    for (int j = 0; j < d; ++j) ds.feature_names.push_back("x" + std::to_string(j));

    for (int i = 0; i < n; ++i) {
        const int g = i < spec.n_per_group ? 0 : 1;
        ds.group[static_cast<std::size_t>(i)] = g;
        double raw = 0.0;
        for (int j = 0; j < d; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            double x = rand_normal(rng);
            if (ju < n_sig) {
                if (g == 1) x += spec.group1_signal_shift;
                raw += spec.signal_coeffs[ju] * x;
            } else if (ju < n_sig + n_spur) {
                const std::size_t k = ju - n_sig;
                x = g == 1 ? x + spec.group1_spurious_shift : x * spec.group0_spurious_scale;
                raw += (coeff(spec.spurious_coeffs, k) + (g == 1 ? coeff(spec.group_bias_coeffs, k) : 0.0)) * x;
            }
            ds.features.at(i, j) = x;
        }
        raw += spec.noise_for_group(g) * rand_normal(rng);
        ds.labels[static_cast<std::size_t>(i)] = spec.task == models::Task::regression ? raw : (raw > 0.0 ? 1.0 : -1.0);
    }
    ds.provenance.source = "synthetic:" + std::to_string(fnv1a64_str(spec.to_json()));
    ds.provenance.content_hash = ds.canonical_hash();
    return ds;
}

BatchStream::BatchStream(const GroupedDataset& ds, Split split, int size_per_group, std::uint64_t seed)
    : ds_(ds), size_(size_per_group), rng_(make_rng(seed)) {
    if (size_per_group < 1) throw std::invalid_argument("batches: size_per_group must be >= 1");
    idx0_ = ds.indices_of(split, 0);
    idx1_ = ds.indices_of(split, 1);
    if (idx0_.empty() || idx1_.empty()) {
        throw std::invalid_argument("batches: both groups must be present in the requested split");
    }
}

BatchStream::Pair BatchStream::next() {
    std::vector<int> pick0(static_cast<std::size_t>(size_));
    std::vector<int> pick1(static_cast<std::size_t>(size_));
    for (auto& p : pick0) p = idx0_[rand_index(rng_, idx0_.size())];
    for (auto& p : pick1) p = idx1_[rand_index(rng_, idx1_.size())];
    Pair out;
    out.x0 = ds_.gather_features(pick0);
    out.y0 = ds_.gather_labels(pick0);
    out.x1 = ds_.gather_features(pick1);
    out.y1 = ds_.gather_labels(pick1);
    return out;
}

}  // namespace fairpath::data
