#include "fairpath/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairpath/eval.hpp"
#include "fairpath/metrics.hpp"
#include "fairpath/oracle.hpp"
#include "fairpath/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace fairpath::cli {

namespace {

std::string to_hex(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

std::string read_file(const std::string& path, const char* what) {
    std::ifstream f(path);
    if (!f) throw ConfigError(std::string(what) + ": cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

models::Activation activation_from(const std::string& s, const char* field) {
    if (s == "relu") return models::Activation::relu;
    if (s == "linear") return models::Activation::linear;
    throw ConfigError(std::string("config field '") + field + "': unknown activation '" + s + "'");
}

}  // namespace

RunConfig parse_run_config_text(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    RunConfig cfg;
    try {
        cfg.method = j.value("method", "implicit");
        const bool is_baseline = cfg.method != "implicit";
        if (is_baseline) cfg.baseline.method = baselines::method_from_name(cfg.method);
        cfg.seed = j.value("seed", 0ull);

        if (!j.contains("dataset")) throw ConfigError("config field 'dataset' is required");
        const json& d = j.at("dataset");
        if (d.contains("synthetic")) {
            cfg.dataset.kind = DatasetConfig::Kind::synthetic;
            cfg.dataset.synthetic = data::SyntheticSpec::from_json_text(d.at("synthetic").dump());
        } else if (d.contains("csv")) {
            cfg.dataset.kind = DatasetConfig::Kind::csv;
            cfg.dataset.csv_path = d.at("csv").get<std::string>();
            if (!d.contains("schema")) throw ConfigError("config field 'dataset.schema' is required with 'dataset.csv'");
            cfg.dataset.schema_path = d.at("schema").get<std::string>();
        } else if (d.contains("canonical")) {
            cfg.dataset.kind = DatasetConfig::Kind::canonical;
            cfg.dataset.canonical_path = d.at("canonical").get<std::string>();
        } else {
            throw ConfigError("config field 'dataset' needs one of 'synthetic', 'csv', 'canonical'");
        }

        if (j.contains("split")) {
            const json& s = j.at("split");
            if (s.contains("fractions")) {
                auto f = s.at("fractions").get<std::vector<double>>();
                if (f.size() != 3) throw ConfigError("config field 'split.fractions' needs 3 values");
                cfg.fractions = {f[0], f[1], f[2]};
            }
            cfg.split_seed = s.value("seed", 7ull);
        }
        cfg.standardize = j.value("standardize", true);

        if (j.contains("model")) {
            const json& m = j.at("model");
            if (m.contains("hidden")) cfg.model.hidden = m.at("hidden").get<std::vector<int>>();
            cfg.model.embed = m.value("embed", 8);
            cfg.model.init_scale = m.value("init_scale", 1.0);
            cfg.model.activation = activation_from(m.value("activation", "relu"), "model.activation");
            cfg.model.embed_activation = activation_from(m.value("embed_activation", "linear"), "model.embed_activation");
            if (m.contains("norm_cap") && !m.at("norm_cap").is_null()) cfg.model.norm_cap = m.at("norm_cap").get<double>();
            if (m.contains("head_norm_cap") && !m.at("head_norm_cap").is_null()) {
                cfg.model.head_norm_cap = m.at("head_norm_cap").get<double>();
            }
        }

        if (j.contains("bilevel")) {
            const json& b = j.at("bilevel");
            auto& bl = cfg.bilevel;
            bl.kappa = b.value("kappa", bl.kappa);
            bl.inner_lr = b.value("inner_lr", bl.inner_lr);
            bl.inner_max_steps = b.value("inner_max_steps", bl.inner_max_steps);
            bl.inner_tol_eps = b.value("inner_tol_eps", bl.inner_tol_eps);
            bl.cg_max_iters = b.value("cg_max_iters", bl.cg_max_iters);
            bl.cg_tol_delta = b.value("cg_tol_delta", bl.cg_tol_delta);
            bl.outer_lr = b.value("outer_lr", bl.outer_lr);
            bl.adam_eps = b.value("adam_eps", bl.adam_eps);
            bl.hessian_damping = b.value("hessian_damping", bl.hessian_damping);
            bl.batch_size_per_group = b.value("batch_size_per_group", bl.batch_size_per_group);
            bl.max_epochs = b.value("max_epochs", bl.max_epochs);
            bl.warm_start_heads = b.value("warm_start_heads", bl.warm_start_heads);
            bl.suf_points = b.value("suf_points", bl.suf_points);
            if (b.contains("inner_solver")) {
                std::string s = b.at("inner_solver").get<std::string>();
                if (s == "gd") bl.inner_solver = bilevel::InnerSolver::gd;
                else if (s == "exact") bl.inner_solver = bilevel::InnerSolver::exact;
                else throw ConfigError("config field 'bilevel.inner_solver' must be 'gd' or 'exact'");
            }
        }

        if (j.contains("baseline")) {
            const json& b = j.at("baseline");
            auto& bc = cfg.baseline;
            bc.reg_coeff = b.value("reg_coeff", bc.reg_coeff);
            bc.outer_lr = b.value("outer_lr", bc.outer_lr);
            bc.adam_eps = b.value("adam_eps", bc.adam_eps);
            bc.batch_size_per_group = b.value("batch_size_per_group", bc.batch_size_per_group);
            bc.max_epochs = b.value("max_epochs", bc.max_epochs);
            bc.suf_points = b.value("suf_points", bc.suf_points);
            bc.head_refit_tol = b.value("head_refit_tol", bc.head_refit_tol);
            bc.persist_one_step_heads = b.value("persist_one_step_heads", bc.persist_one_step_heads);
            bc.one_step_head_lr = b.value("one_step_head_lr", bc.one_step_head_lr);
        }

        cfg.out_dir = j.value("out_dir", "");

        if (cfg.method == "implicit") {
            cfg.bilevel.validate();
        } else {
            cfg.baseline.validate();
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    cfg.echo_json = j.dump(2);
    return cfg;
}

RunConfig parse_run_config_file(const std::string& path) {
    return parse_run_config_text(read_file(path, "config"));
}

std::string config_hash_hex(const RunConfig& cfg) {
    json j = json::parse(cfg.echo_json);
    j.erase("out_dir");  // output location does not change the experiment
    return to_hex(data::fnv1a64_str(j.dump()));
}

data::GroupedDataset build_dataset(const RunConfig& cfg) {
    data::GroupedDataset ds;
    switch (cfg.dataset.kind) {
        case DatasetConfig::Kind::synthetic:
            ds = data::gen_synthetic(cfg.dataset.synthetic);
            break;
        case DatasetConfig::Kind::csv:
            ds = data::load_csv(cfg.dataset.csv_path, data::CsvSchema::from_json_file(cfg.dataset.schema_path));
            break;
        case DatasetConfig::Kind::canonical:
            return data::load_canonical(cfg.dataset.canonical_path);  // split already assigned
    }
    ds = data::split(std::move(ds), cfg.fractions, cfg.split_seed);
    if (cfg.standardize) ds = data::standardize(std::move(ds));
    return ds;
}

namespace {

std::string resolve_out_dir(const RunConfig& cfg, const std::string& hash) {
    if (!cfg.out_dir.empty()) return cfg.out_dir;
    const char* root = std::getenv(kOutRootEnv);
    std::string base = root ? root : "runs";
    return base + "/" + cfg.method + "_" + hash.substr(0, 12) + "_seed" + std::to_string(cfg.seed);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path);
    f << text;
}

struct RunArtifacts {
    std::vector<RunRecord> records;
    models::ReprNet net;
    models::Head head0;
    models::Head head1;
};

RunArtifacts dispatch_training(const RunConfig& cfg, const data::GroupedDataset& ds, const std::string& config_hash,
                               const std::string& data_hash) {
    const int input_dim = ds.dim();
    std::vector<int> arch{input_dim};
    for (int h : cfg.model.hidden) arch.push_back(h);
    arch.push_back(cfg.model.embed);
    models::ReprNet net = models::ReprNet::init(arch, cfg.model.activation, cfg.seed, cfg.model.embed_activation,
                                                cfg.model.init_scale);
    net.norm_cap = cfg.model.norm_cap;
    models::Head head = models::Head::zeros(cfg.model.embed, ds.task);
    head.norm_cap = cfg.model.head_norm_cap;

    bilevel::TrainOptions opt;
    opt.seed = cfg.seed;
    opt.method_name = cfg.method;
    opt.config_hash = config_hash;
    opt.data_hash = data_hash;

    RunArtifacts art;
    if (cfg.method == "implicit") {
        auto res = bilevel::train(std::move(net), head, head, ds, cfg.bilevel, opt);
        art.records = std::move(res.records);
        art.net = std::move(res.net);
        art.head0 = std::move(res.head0);
        art.head1 = std::move(res.head1);
    } else {
        auto res = baselines::train_baseline(std::move(net), head, ds, cfg.baseline, opt);
        art.records = std::move(res.records);
        art.net = std::move(res.net);
        art.head0 = std::move(res.head0);
        art.head1 = std::move(res.head1);
    }
    return art;
}

void write_outputs(const std::string& dir, const RunConfig& cfg, const data::GroupedDataset& ds,
                   const RunArtifacts& art, const std::string& config_hash, const std::string& data_hash,
                   double pearson_value, double wall_seconds, const std::string& status) {
    fs::create_directories(dir);
    write_run_records(dir + "/records.csv", art.records);
    write_timings(dir + "/timings.csv", art.records);
    std::vector<std::string> outputs{"records.csv", "timings.csv"};
    if (!art.net.params.layout.empty()) {
        save_params(dir + "/lambda.ckpt", art.net.params);
        save_params(dir + "/head0.ckpt", art.head0.params);
        save_params(dir + "/head1.ckpt", art.head1.params);
        outputs.insert(outputs.end(), {"lambda.ckpt", "head0.ckpt", "head1.ckpt"});
    }

    json manifest;
    manifest["version"] = kVersion;
    manifest["status"] = status;
    manifest["method"] = cfg.method;
    manifest["config"] = json::parse(cfg.echo_json);
    manifest["config_hash"] = config_hash;
    manifest["data_hash"] = data_hash;
    manifest["dataset_source"] = ds.provenance.source;
    manifest["dataset_task"] = ds.task == models::Task::regression ? "regression" : "classification";
    manifest["group_label_pearson"] = pearson_value;
    manifest["seed"] = cfg.seed;
    manifest["epochs_completed"] = art.records.size();
    manifest["wall_seconds_total"] = wall_seconds;
    if (!art.records.empty()) {
        const RunRecord& last = art.records.back();
        manifest["final"] = {{"perf_train", last.perf_train},   {"perf_val", last.perf_val},
                             {"perf_test", last.perf_test},     {"suf_gap_test", last.suf_gap_test},
                             {"head_distance", last.head_distance}, {"grad_norm", last.grad_norm}};
    }
    manifest["outputs"] = outputs;
    manifest["outputs"].push_back("manifest.json");
    write_text(dir + "/manifest.json", manifest.dump(2) + "\n");
}

}  // namespace

RunOutcome execute_run(const RunConfig& cfg) {
    const std::string config_hash = config_hash_hex(cfg);
    data::GroupedDataset ds = build_dataset(cfg);
    const std::string data_hash = to_hex(ds.provenance.content_hash);
    const std::string dir = resolve_out_dir(cfg, config_hash);
    const double pearson_value = metrics::pearson(ds.group, ds.labels);

    const auto t0 = std::chrono::steady_clock::now();
    try {
        RunArtifacts art = dispatch_training(cfg, ds, config_hash, data_hash);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_outputs(dir, cfg, ds, art, config_hash, data_hash, pearson_value, wall, "ok");
        RunOutcome out;
        out.dir = dir;
        out.records = std::move(art.records);
        out.pearson = pearson_value;
        return out;
    } catch (TrainAbort& abort) {
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        RunArtifacts partial;
        partial.records = std::move(abort.partial_records);
        write_outputs(dir, cfg, ds, partial, config_hash, data_hash, pearson_value, wall,
                      std::string("aborted: ") + abort.what());
        throw;
    }
}

int run_command(const std::string& config_path, const std::string& out_override) {
    RunConfig cfg;
    try {
        cfg = parse_run_config_file(config_path);
        if (!out_override.empty()) cfg.out_dir = out_override;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    }
    try {
        RunOutcome out = execute_run(cfg);
        std::cout << "run complete: " << out.dir << "\n";
        if (!out.records.empty()) {
            const auto& last = out.records.back();
            std::cout << "final perf_test=" << format_double(last.perf_test)
                      << " suf_gap_test=" << format_double(last.suf_gap_test)
                      << " head_distance=" << format_double(last.head_distance) << "\n";
        }
        return kExitOk;
    } catch (const TrainAbort& e) {
        std::cerr << "training aborted: " << e.what() << " (partial records flushed)\n";
        return kExitRuntimeAbort;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntimeAbort;
    }
}

namespace {

struct SweepPoint {
    double value = 0.0;
    int rep = 0;
    bool ok = false;
    std::string error;
    RunRecord final;
    std::string dir;
};

}  // namespace

int sweep_command(const std::string& spec_path, int jobs) {
    json spec;
    std::string method;
    std::vector<double> values;
    int repetitions = 1;
    json base;
    std::string out_dir;
    try {
        spec = json::parse(read_file(spec_path, "sweep spec"));
        method = spec.value("method", "implicit");
        if (!spec.contains("values")) throw ConfigError("sweep spec field 'values' is required");
        values = spec.at("values").get<std::vector<double>>();
        if (values.empty()) throw ConfigError("sweep spec field 'values' must be non-empty");
        repetitions = spec.value("repetitions", 1);
        if (repetitions < 1) throw ConfigError("sweep spec field 'repetitions' must be >= 1");
        if (!spec.contains("base")) throw ConfigError("sweep spec field 'base' (a run config) is required");
        base = spec.at("base");
        out_dir = spec.value("out_dir", "");
        if (out_dir.empty()) {
            const char* root = std::getenv(kOutRootEnv);
            out_dir = std::string(root ? root : "runs") + "/sweep_" + method;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfigError;
    } catch (const json::exception& e) {
        std::cerr << "config error: sweep spec: " << e.what() << "\n";
        return kExitConfigError;
    }

    std::vector<SweepPoint> points;
    for (std::size_t vi = 0; vi < values.size(); ++vi) {
        for (int rep = 0; rep < repetitions; ++rep) {
            SweepPoint p;
            p.value = values[vi];
            p.rep = rep;
            points.push_back(p);
        }
    }

    auto run_point = [&](SweepPoint& p) {
        try {
            json run_cfg = base;
            run_cfg["method"] = method;
            if (method == "implicit") {
                run_cfg["bilevel"]["kappa"] = p.value;
            } else {
                run_cfg["baseline"]["reg_coeff"] = p.value;
            }
            const std::uint64_t base_seed = run_cfg.value("seed", 0ull);
            run_cfg["seed"] = base_seed + static_cast<std::uint64_t>(p.rep);
            std::ostringstream dir;
            dir << out_dir << "/point_v" << format_double(p.value) << "_rep" << p.rep;
            run_cfg["out_dir"] = dir.str();
            RunConfig cfg = parse_run_config_text(run_cfg.dump());
            RunOutcome out = execute_run(cfg);
            if (out.records.empty()) throw std::runtime_error("run produced no records");
            p.final = out.records.back();
            p.dir = out.dir;
            p.ok = true;
        } catch (const std::exception& e) {
            p.ok = false;
            p.error = e.what();
        }
    };

    if (jobs <= 1) {
        for (auto& p : points) run_point(p);
    } else {
        std::size_t next = 0;
        while (next < points.size()) {
            std::vector<std::thread> pool;
            for (int k = 0; k < jobs && next < points.size(); ++k, ++next) {
                pool.emplace_back(run_point, std::ref(points[next]));
            }
            for (auto& t : pool) t.join();
        }
    }

    fs::create_directories(out_dir);
    bool any_failed = false;
    {
        std::ofstream f(out_dir + "/sweep_summary.csv", std::ios::binary);
        f << "value,n,perf_mean,perf_std,suf_mean,suf_std,head_distance_mean\n";
        for (double v : values) {
            std::vector<const SweepPoint*> ok_points;
            for (const auto& p : points) {
                if (p.value == v && p.ok) ok_points.push_back(&p);
                if (p.value == v && !p.ok) any_failed = true;
            }
            if (ok_points.empty()) continue;
            auto stat = [&](auto getter) {
                double mean = 0.0;
                for (auto* p : ok_points) mean += getter(*p);
                mean /= static_cast<double>(ok_points.size());
                double var = 0.0;
                for (auto* p : ok_points) {
                    const double d = getter(*p) - mean;
                    var += d * d;
                }
                var = ok_points.size() > 1 ? var / static_cast<double>(ok_points.size() - 1) : 0.0;
                return std::pair{mean, std::sqrt(var)};
            };
            auto [pm, ps] = stat([](const SweepPoint& p) { return p.final.perf_test; });
            auto [sm, ss] = stat([](const SweepPoint& p) { return p.final.suf_gap_test; });
            auto [hm, _] = stat([](const SweepPoint& p) { return p.final.head_distance; });
            f << format_double(v) << "," << ok_points.size() << "," << format_double(pm) << "," << format_double(ps)
              << "," << format_double(sm) << "," << format_double(ss) << "," << format_double(hm) << "\n";
        }
    }
    {
        // Pareto front over (performance cost, sufficiency gap) means
        json pareto = json::array();
        struct MeanPoint {
            double value, cost, suf;
        };
        std::vector<MeanPoint> means;
        for (double v : values) {
            double pm = 0.0, sm = 0.0;
            int n = 0;
            for (const auto& p : points) {
                if (p.value == v && p.ok) {
                    pm += p.final.perf_test;
                    sm += p.final.suf_gap_test;
                    ++n;
                }
            }
            if (n == 0) continue;
            pm /= n;
            sm /= n;
            means.push_back({v, pm, sm});
        }
        // regression minimizes MSE; classification maximizes accuracy
        const bool maximize_perf = !base.contains("dataset") ? false
                                   : base.at("dataset").contains("synthetic")
                                       ? base.at("dataset").at("synthetic").value("task", "regression") == "classification"
                                       : false;
        for (auto& mp : means) {
            bool dominated = false;
            for (auto& other : means) {
                const double a = maximize_perf ? -other.cost : other.cost;
                const double b = maximize_perf ? -mp.cost : mp.cost;
                if (a <= b && other.suf <= mp.suf && (a < b || other.suf < mp.suf)) {
                    dominated = true;
                    break;
                }
            }
            pareto.push_back({{"value", mp.value}, {"perf_mean", mp.cost}, {"suf_mean", mp.suf}, {"on_front", !dominated}});
        }
        write_text(out_dir + "/pareto.json", pareto.dump(2) + "\n");
    }
    for (const auto& p : points) {
        if (!p.ok) std::cerr << "sweep point value=" << p.value << " rep=" << p.rep << " failed: " << p.error << "\n";
    }
    std::cout << "sweep complete: " << out_dir << "/sweep_summary.csv\n";
    return any_failed ? kExitRuntimeAbort : kExitOk;
}

int report_command(const std::vector<std::string>& run_dirs, const std::string& out_path) {
    if (run_dirs.empty()) {
        std::cerr << "config error: report needs at least one run directory\n";
        return kExitConfigError;
    }
    struct Row {
        std::string dir, method, data_hash, source;
        double perf = 0.0, suf = 0.0, head_dist = 0.0, pearson = 0.0;
    };
    std::vector<Row> rows;
    std::ostringstream text;
    try {
        for (const auto& dir : run_dirs) {
            json manifest = json::parse(read_file(dir + "/manifest.json", "report"));
            Row r;
            r.dir = dir;
            r.method = manifest.value("method", "?");
            r.data_hash = manifest.value("data_hash", "?");
            r.source = manifest.value("dataset_source", "?");
            r.pearson = manifest.value("group_label_pearson", 0.0);
            if (manifest.contains("final")) {
                r.perf = manifest["final"].value("perf_test", 0.0);
                r.suf = manifest["final"].value("suf_gap_test", 0.0);
                r.head_dist = manifest["final"].value("head_distance", 0.0);
            }
            rows.push_back(std::move(r));
        }
    } catch (const std::exception& e) {
        std::cerr << "report error: " << e.what() << "\n";
        return kExitConfigError;
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t k = i + 1; k < rows.size(); ++k) {
            if (rows[i].source == rows[k].source && rows[i].data_hash != rows[k].data_hash) {
                text << "warning: runs " << rows[i].dir << " and " << rows[k].dir
                     << " claim dataset '" << rows[i].source << "' but their data hashes differ\n";
            }
        }
    }
    text << "method,perf_test,suf_gap_test,head_distance,pearson,data_hash,dir\n";
    for (const auto& r : rows) {
        text << r.method << "," << format_double(r.perf) << "," << format_double(r.suf) << ","
             << format_double(r.head_dist) << "," << format_double(r.pearson) << "," << r.data_hash << "," << r.dir
             << "\n";
    }
    std::cout << text.str();
    if (!out_path.empty()) write_text(out_path, text.str());
    return kExitOk;
}

int verify_command(const std::string& filter, bool mutate_implicit_grad) {
    auto reports = oracle::run_all_checks(filter, mutate_implicit_grad);
    bool all_pass = true;
    std::vector<std::string> failing;
    for (const auto& r : reports) {
        std::cout << r.to_line() << "\n";
        if (!r.pass) {
            all_pass = false;
            failing.push_back(r.name);
        }
    }
    if (reports.empty()) {
        std::cerr << "verify: no checks match filter '" << filter << "'\n";
        return kExitConfigError;
    }
    std::cout << (all_pass ? "verify: all checks passed" : "verify: FAILURES:");
    for (const auto& name : failing) std::cout << " " << name;
    std::cout << "\n";
    return all_pass ? kExitOk : kExitVerifyFailed;
}

int gen_synthetic_command(const std::string& spec_path, const std::string& out_path) {
    try {
        auto spec = data::SyntheticSpec::from_json_text(read_file(spec_path, "synthetic spec"));
        auto ds = data::gen_synthetic(spec);
        ds = data::split(std::move(ds), {0.7, 0.1, 0.2}, spec.seed + 1);
        data::save_canonical(out_path, ds);
        std::cout << "wrote " << out_path << " n=" << ds.n() << " d=" << ds.dim()
                  << " hash=" << to_hex(ds.provenance.content_hash) << "\n";
        return kExitOk;
    } catch (const std::exception& e) {
        std::cerr << "gen-synthetic error: " << e.what() << "\n";
        return kExitConfigError;
    }
}

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"fairpath: fair representation learning by implicit path alignment"};
    app.require_subcommand(1);

    std::string config_path, out_override;
    auto* run = app.add_subcommand("run", "execute one training run from a JSON config");
    run->add_option("--config", config_path, "path to run config JSON")->required();
    run->add_option("--out", out_override, "override the output directory");

    std::string sweep_path;
    int jobs = 1;
    auto* sweep = app.add_subcommand("sweep", "run a kappa / reg_coeff sweep and emit a trade-off table");
    sweep->add_option("--spec", sweep_path, "path to sweep spec JSON")->required();
    sweep->add_option("--jobs", jobs, "parallel worker count");

    std::vector<std::string> report_dirs;
    std::string report_out;
    auto* report = app.add_subcommand("report", "merge run directories into a comparison table");
    report->add_option("dirs", report_dirs, "run directories")->required();
    report->add_option("--out", report_out, "also write the table to this file");

    std::string filter;
    bool mutate = false;
    auto* verify = app.add_subcommand("verify", "run the oracle verification suite");
    verify->add_option("--filter", filter, "only run checks whose name contains this substring");
    verify->add_flag("--mutate-implicit-grad", mutate,
                     "fault-injection fixture: flip the implicit gradient sign (must fail)");

    std::string gen_spec, gen_out;
    auto* gen = app.add_subcommand("gen-synthetic", "generate a synthetic dataset file");
    gen->add_option("--spec", gen_spec, "path to synthetic spec JSON")->required();
    gen->add_option("--out", gen_out, "output dataset path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfigError;
    }

    if (run->parsed()) return run_command(config_path, out_override);
    if (sweep->parsed()) return sweep_command(sweep_path, jobs);
    if (report->parsed()) return report_command(report_dirs, report_out);
    if (verify->parsed()) return verify_command(filter, mutate);
    if (gen->parsed()) return gen_synthetic_command(gen_spec, gen_out);
    return kExitConfigError;
}

int cli_main(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.push_back("fairpath");
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli_main(static_cast<int>(argv.size()), argv.data());
}

}  // namespace fairpath::cli
