#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "fairpath/models.hpp"
#include "fairpath/rng.hpp"
#include "fairpath/tensor.hpp"

namespace fairpath::data {

enum class Split : std::uint8_t { train = 0, val = 1, test = 2 };

struct Provenance {
    std::string source;
    std::uint64_t content_hash = 0;
};

struct GroupedDataset {
    Tensor features;  // n x d
    std::vector<double> labels;
    std::vector<int> group;  // 0/1
    std::vector<Split> split;
    std::vector<std::string> feature_names;
    models::Task task = models::Task::regression;
    Provenance provenance;

    int n() const { return features.shape.empty() ? 0 : features.shape[0]; }
    int dim() const { return features.shape.size() == 2 ? features.shape[1] : 0; }

    std::vector<int> indices_of(Split s, int g) const;
    std::vector<int> indices_of(Split s) const;
    // Row-gathered feature matrix and label column for the given indices.
    Tensor gather_features(const std::vector<int>& idx) const;
    Tensor gather_labels(const std::vector<int>& idx) const;
    // Recomputes the content hash from the canonical byte encoding.
    std::uint64_t canonical_hash() const;
};

// Column schema for CSV ingestion.
struct CsvSchema {
    models::Task task = models::Task::regression;
    std::string label_column;
    std::string group_column;
    std::string group_one_value;              // group-column value mapped to 1
    std::vector<std::string> feature_columns; // empty: every other column
    double label_scale = 1.0;

    static CsvSchema from_json_file(const std::string& path);
    static CsvSchema from_json_text(const std::string& text);
};

// Raw ingestion; every row lands in the train split until split() is called.
GroupedDataset load_csv(const std::string& path, const CsvSchema& schema);

// Deterministic stratified split; fractions are (train, val, test).
GroupedDataset split(GroupedDataset ds, std::array<double, 3> fractions, std::uint64_t seed);

// Standardizes features to zero mean / unit variance using train-split
// statistics only; labels are untouched.
GroupedDataset standardize(GroupedDataset ds);

// Synthetic generator over two feature blocks: a signal block shared by both
// groups and a spurious block whose distribution is group-dependent.
//
//   x_sig ~ N(0, 1)                      (both groups)
//   x_spur | g=0 ~ N(0, group0_spurious_scale^2)
//   x_spur | g=1 ~ N(group1_spurious_shift, 1)
//   y = c.x_sig + gamma.x_spur + g * b.x_spur + noise
//
// In the BIASED preset the spurious block is nearly constant in group 0 and
// shifted in group 1, so group 1's label mean and a large share of its label
// variance ride on features the signal block cannot explain: an embedding
// that drops the block leaves the per-group predictors far apart (intercept
// offset plus residual asymmetry, a large sufficiency gap), while rotating it
// in aligns them genuinely. All-zero spurious terms give the FAIR regime.
struct SyntheticSpec {
    std::uint64_t seed = 0;
    int n_per_group = 2000;
    int input_dim = 10;
    std::vector<double> signal_coeffs;         // c, leading block
    std::vector<double> spurious_coeffs;       // gamma, shared slope on the trailing block
    std::vector<double> group_bias_coeffs;     // b, group-1-only slope on the trailing block
    double group1_signal_shift = 0.0;          // mean shift of the signal block in group 1
    double group1_spurious_shift = 0.0;        // mean shift of the spurious block in group 1
    double group0_spurious_scale = 1.0;        // spurious-feature scale in group 0
    double noise_scale = 0.05;
    double group1_noise_scale = -1.0;          // < 0: same as noise_scale
    models::Task task = models::Task::regression;

    double noise_for_group(int g) const {
        return g == 1 && group1_noise_scale >= 0.0 ? group1_noise_scale : noise_scale;
    }

    static SyntheticSpec fair_realizable(std::uint64_t seed);
    static SyntheticSpec biased(std::uint64_t seed);
    static SyntheticSpec from_json_text(const std::string& text);
    std::string to_json() const;
};

GroupedDataset gen_synthetic(const SyntheticSpec& spec);

// Paired group batches sampled with replacement from one split; deterministic
// under the seed. Successive next() calls advance one shared RNG stream.
class BatchStream {
public:
    BatchStream(const GroupedDataset& ds, Split split, int size_per_group, std::uint64_t seed);

    struct Pair {
        Tensor x0, y0, x1, y1;
    };
    Pair next();

private:
    const GroupedDataset& ds_;
    std::vector<int> idx0_, idx1_;
    int size_;
    Rng rng_;
};

// Canonical serialized dataset: one text header line, then features, labels,
// group and split blocks as little-endian doubles.
void save_canonical(const std::string& path, const GroupedDataset& ds);
GroupedDataset load_canonical(const std::string& path);

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 14695981039346656037ull);
std::uint64_t fnv1a64_str(const std::string& s);

}  // namespace fairpath::data
