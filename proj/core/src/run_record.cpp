#include "fairpath/run_record.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace fairpath {

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, ptr);
}

std::string run_records_csv_header() {
    return "epoch,method,param_value,perf_train,perf_val,perf_test,suf_gap_test,head_distance,grad_norm,"
           "inner_steps,cg_iters,seed,config_hash,data_hash";
}

std::string run_record_csv_row(const RunRecord& r) {
    std::ostringstream os;
    os << r.epoch << "," << r.method << "," << format_double(r.param_value) << "," << format_double(r.perf_train) << ","
       << format_double(r.perf_val) << "," << format_double(r.perf_test) << "," << format_double(r.suf_gap_test) << ","
       << format_double(r.head_distance) << "," << format_double(r.grad_norm) << "," << format_double(r.inner_steps)
       << "," << format_double(r.cg_iters) << "," << r.seed << "," << r.config_hash << "," << r.data_hash;
    return os.str();
}

void write_run_records(const std::string& path, const std::vector<RunRecord>& records) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_run_records: cannot open " + path);
    f << run_records_csv_header() << "\n";
    for (const auto& r : records) f << run_record_csv_row(r) << "\n";
}

void write_timings(const std::string& path, const std::vector<RunRecord>& records) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("write_timings: cannot open " + path);
    f << "epoch,wall_seconds\n";
    for (const auto& r : records) f << r.epoch << "," << format_double(r.wall_seconds) << "\n";
}

std::vector<RunRecord> read_run_records(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("read_run_records: cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error("read_run_records: empty file " + path);
    if (line != run_records_csv_header()) throw std::runtime_error("read_run_records: unexpected header in " + path);
    std::vector<RunRecord> out;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() != 14) throw std::runtime_error("read_run_records: malformed row in " + path);
        RunRecord r;
        r.epoch = std::stoi(cells[0]);
        r.method = cells[1];
        r.param_value = std::stod(cells[2]);
        r.perf_train = std::stod(cells[3]);
        r.perf_val = std::stod(cells[4]);
        r.perf_test = std::stod(cells[5]);
        r.suf_gap_test = std::stod(cells[6]);
        r.head_distance = std::stod(cells[7]);
        r.grad_norm = std::stod(cells[8]);
        r.inner_steps = std::stod(cells[9]);
        r.cg_iters = std::stod(cells[10]);
        r.seed = std::stoull(cells[11]);
        r.config_hash = cells[12];
        r.data_hash = cells[13];
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace fairpath
