#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fairpath/baselines.hpp"
#include "fairpath/bilevel.hpp"
#include "fairpath/data_io.hpp"
#include "fairpath/models.hpp"
#include "fairpath/run_record.hpp"

namespace fairpath::cli {

// Exit-code contract: 0 ok, 1 verification failure, 2 config error,
// 3 runtime abort.
inline constexpr int kExitOk = 0;
inline constexpr int kExitVerifyFailed = 1;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitRuntimeAbort = 3;

inline constexpr const char* kOutRootEnv = "FAIRPATH_OUT_ROOT";

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DatasetConfig {
    enum class Kind : std::uint8_t { synthetic, csv, canonical };
    Kind kind = Kind::synthetic;
    data::SyntheticSpec synthetic;
    std::string csv_path;
    std::string schema_path;
    std::string canonical_path;
};

struct ModelConfig {
    std::vector<int> hidden;
    int embed = 8;
    models::Activation activation = models::Activation::relu;
    models::Activation embed_activation = models::Activation::linear;
    std::optional<double> norm_cap;
    std::optional<double> head_norm_cap;
    double init_scale = 1.0;
};

struct RunConfig {
    std::string method = "implicit";
    std::uint64_t seed = 0;
    DatasetConfig dataset;
    std::array<double, 3> fractions{0.7, 0.1, 0.2};
    std::uint64_t split_seed = 7;
    bool standardize = true;
    ModelConfig model;
    bilevel::BilevelConfig bilevel;
    baselines::BaselineConfig baseline;
    std::string out_dir;
    std::string echo_json;  // canonical config echo, hashed for provenance
};

RunConfig parse_run_config_text(const std::string& json_text);
RunConfig parse_run_config_file(const std::string& path);

std::string config_hash_hex(const RunConfig& cfg);

// Builds the dataset described by the config (generate/load, split,
// standardize).
data::GroupedDataset build_dataset(const RunConfig& cfg);

struct RunOutcome {
    std::string dir;
    std::vector<RunRecord> records;
    double pearson = 0.0;
};

// Executes one training run and writes records.csv, timings.csv, checkpoint
// files and manifest.json into the resolved output directory.
RunOutcome execute_run(const RunConfig& cfg);

// Subcommand entry points; return process exit codes.
int run_command(const std::string& config_path, const std::string& out_override);
int sweep_command(const std::string& spec_path, int jobs);
int report_command(const std::vector<std::string>& run_dirs, const std::string& out_path);
int verify_command(const std::string& filter, bool mutate_implicit_grad);
int gen_synthetic_command(const std::string& spec_path, const std::string& out_path);

int cli_main(int argc, const char* const* argv);
int cli_main(const std::vector<std::string>& args);

}  // namespace fairpath::cli
