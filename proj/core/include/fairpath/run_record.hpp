#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace fairpath {

// One row per training epoch. wall_seconds is written to a separate timings
// file so the records CSV stays byte-identical across reruns of the same
// config and seed.
struct RunRecord {
    int epoch = 0;
    std::string method;
    double param_value = 0.0;  // kappa or reg_coeff
    double perf_train = 0.0;   // MSE (regression) or accuracy (classification)
    double perf_val = 0.0;
    double perf_test = 0.0;
    double suf_gap_test = 0.0;
    double head_distance = 0.0;
    double grad_norm = 0.0;          // mean ||outer gradient|| over the epoch
    double inner_steps = 0.0;        // mean inner steps per outer step
    double cg_iters = 0.0;           // mean CG iterations per outer step
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string data_hash;
};

std::string run_records_csv_header();
std::string run_record_csv_row(const RunRecord& r);
void write_run_records(const std::string& path, const std::vector<RunRecord>& records);
void write_timings(const std::string& path, const std::vector<RunRecord>& records);
std::vector<RunRecord> read_run_records(const std::string& path);

// Shortest round-trippable decimal form of a double.
std::string format_double(double v);

// Thrown when a trainer aborts mid-run; carries the records completed so far
// so callers can flush partial output.
struct TrainAbort : std::runtime_error {
    std::vector<RunRecord> partial_records;
    TrainAbort(const std::string& msg, std::vector<RunRecord> records)
        : std::runtime_error(msg), partial_records(std::move(records)) {}
};

}  // namespace fairpath
