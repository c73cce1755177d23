#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fairpath/cli.hpp"
#include "fairpath/data_io.hpp"
#include "fairpath/oracle.hpp"

using namespace fairpath;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::path("tmp_cli") / name) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
    return path;
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

json fair_erm_config(const std::string& out_dir) {
    json j;
    j["method"] = "erm";
    j["seed"] = 3;
    j["dataset"]["synthetic"] = {{"regime", "fair"}, {"seed", 5}, {"n_per_group", 400}, {"noise_scale", 0.05}};
    j["split"] = {{"fractions", {0.7, 0.1, 0.2}}, {"seed", 11}};
    j["model"] = {{"hidden", json::array()}, {"embed", 6}, {"activation", "linear"}};
    j["baseline"] = {{"reg_coeff", 0.0}, {"outer_lr", 0.01}, {"batch_size_per_group", 128}, {"max_epochs", 40}};
    j["out_dir"] = out_dir;
    return j;
}

}  // namespace

TEST_CASE("run: invalid configs exit with code 2 and a field diagnostic") {
    TempDir tmp("badcfg");
    auto path = write_file(tmp.file("bad.json"), R"({"method": "erm"})");
    CHECK(cli::run_command(path, "") == cli::kExitConfigError);

    auto bad_json = write_file(tmp.file("notjson.json"), "{nope");
    CHECK(cli::run_command(bad_json, "") == cli::kExitConfigError);

    CHECK_THROWS_AS(cli::parse_run_config_text(R"({"method":"erm","dataset":{}})"), cli::ConfigError);
    CHECK_THROWS_AS(cli::parse_run_config_text(R"({"method":"nope","dataset":{"synthetic":{}}})"), cli::ConfigError);
}

TEST_CASE("run: fair synthetic erm produces records, checkpoints and a complete manifest") {
    TempDir tmp("fair_erm");
    const std::string out = tmp.file("run1");
    auto cfg_path = write_file(tmp.file("cfg.json"), fair_erm_config(out).dump());
    REQUIRE(cli::run_command(cfg_path, "") == cli::kExitOk);

    auto records = read_run_records(out + "/records.csv");
    REQUIRE(!records.empty());
    CHECK(records.back().perf_test < 1e-2);  // realizable regression

    json manifest = json::parse(read_file(out + "/manifest.json"));
    CHECK(manifest["status"] == "ok");
    // every output file is referenced and every referenced file exists
    std::vector<std::string> listed = manifest["outputs"].get<std::vector<std::string>>();
    for (const auto& name : listed) CHECK(fs::exists(out + "/" + name));
    for (const auto& entry : fs::directory_iterator(out)) {
        const std::string name = entry.path().filename().string();
        CHECK(std::find(listed.begin(), listed.end(), name) != listed.end());
    }
}

TEST_CASE("run: identical config and seed give byte-identical records") {
    TempDir tmp("repro");
    auto cfg = fair_erm_config(tmp.file("a"));
    cfg["baseline"]["max_epochs"] = 5;
    auto path_a = write_file(tmp.file("a.json"), cfg.dump());
    cfg["out_dir"] = tmp.file("b");
    auto path_b = write_file(tmp.file("b.json"), cfg.dump());
    REQUIRE(cli::run_command(path_a, "") == cli::kExitOk);
    REQUIRE(cli::run_command(path_b, "") == cli::kExitOk);
    CHECK(read_file(tmp.file("a") + "/records.csv") == read_file(tmp.file("b") + "/records.csv"));

    json ma = json::parse(read_file(tmp.file("a") + "/manifest.json"));
    json mb = json::parse(read_file(tmp.file("b") + "/manifest.json"));
    CHECK(ma["config_hash"] == mb["config_hash"]);
    CHECK(ma["data_hash"] == mb["data_hash"]);
}

TEST_CASE("run: diverging inner solve aborts with exit 3 and flushes partial output") {
    TempDir tmp("abort");
    json j;
    j["method"] = "implicit";
    j["seed"] = 1;
    j["dataset"]["synthetic"] = {{"regime", "fair"}, {"seed", 2}, {"n_per_group", 60}};
    j["model"] = {{"embed", 4}, {"activation", "linear"}};
    j["bilevel"] = {{"inner_solver", "gd"}, {"inner_lr", 100.0}, {"inner_max_steps", 50},
                    {"batch_size_per_group", 32}, {"max_epochs", 2}};
    j["out_dir"] = tmp.file("run");
    auto path = write_file(tmp.file("cfg.json"), j.dump());
    CHECK(cli::run_command(path, "") == cli::kExitRuntimeAbort);
    CHECK(fs::exists(tmp.file("run") + "/records.csv"));
    json manifest = json::parse(read_file(tmp.file("run") + "/manifest.json"));
    CHECK(std::string(manifest["status"]).rfind("aborted", 0) == 0);
}

TEST_CASE("sweep: single value and repetition equals a plain run") {
    TempDir tmp("sweep1");
    json base = fair_erm_config("");
    base.erase("out_dir");
    base["baseline"]["max_epochs"] = 5;
    base["method"] = "erm";

    json spec;
    spec["method"] = "erm";
    spec["values"] = {0.0};
    spec["repetitions"] = 1;
    spec["base"] = base;
    spec["out_dir"] = tmp.file("sweep");
    auto spec_path = write_file(tmp.file("spec.json"), spec.dump());
    REQUIRE(cli::sweep_command(spec_path, 1) == cli::kExitOk);

    json run_cfg = base;
    run_cfg["out_dir"] = tmp.file("plain");
    auto run_path = write_file(tmp.file("run.json"), run_cfg.dump());
    REQUIRE(cli::run_command(run_path, "") == cli::kExitOk);

    auto plain = read_run_records(tmp.file("plain") + "/records.csv");
    auto swept = read_run_records(tmp.file("sweep") + "/point_v0_rep0/records.csv");
    REQUIRE(!plain.empty());
    REQUIRE(!swept.empty());
    CHECK(plain.back().perf_test == swept.back().perf_test);
    CHECK(plain.back().suf_gap_test == swept.back().suf_gap_test);

    // summary has one row for the single value
    auto summary = read_file(tmp.file("sweep") + "/sweep_summary.csv");
    CHECK(summary.find("value,n,perf_mean") == 0);
    CHECK(summary.find("\n0,1,") != std::string::npos);
}

TEST_CASE("sweep: repetition count populates the std columns from that many runs") {
    TempDir tmp("sweep5");
    json base = fair_erm_config("");
    base.erase("out_dir");
    base["baseline"]["max_epochs"] = 2;
    base["dataset"]["synthetic"]["n_per_group"] = 120;

    json spec;
    spec["method"] = "erm";
    spec["values"] = {0.0};
    spec["repetitions"] = 5;
    spec["base"] = base;
    spec["out_dir"] = tmp.file("sweep");
    auto spec_path = write_file(tmp.file("spec.json"), spec.dump());
    REQUIRE(cli::sweep_command(spec_path, 2) == cli::kExitOk);
    auto summary = read_file(tmp.file("sweep") + "/sweep_summary.csv");
    CHECK(summary.find("\n0,5,") != std::string::npos);
    CHECK(fs::exists(tmp.file("sweep") + "/pareto.json"));
}

TEST_CASE("report: merges runs and warns on conflicting data hashes") {
    TempDir tmp("report");
    auto cfg = fair_erm_config(tmp.file("r1"));
    cfg["baseline"]["max_epochs"] = 2;
    auto p1 = write_file(tmp.file("c1.json"), cfg.dump());
    REQUIRE(cli::run_command(p1, "") == cli::kExitOk);

    cfg["out_dir"] = tmp.file("r2");
    cfg["dataset"]["synthetic"]["seed"] = 6;  // different data, same source label? no: source differs
    auto p2 = write_file(tmp.file("c2.json"), cfg.dump());
    REQUIRE(cli::run_command(p2, "") == cli::kExitOk);

    // single run: one data row
    REQUIRE(cli::report_command({tmp.file("r1")}, tmp.file("single.csv")) == cli::kExitOk);
    auto single = read_file(tmp.file("single.csv"));
    CHECK(std::count(single.begin(), single.end(), '\n') == 2);  // header + one row

    // force a conflict: same claimed source, different hash
    json m2 = json::parse(read_file(tmp.file("r2") + "/manifest.json"));
    json m1 = json::parse(read_file(tmp.file("r1") + "/manifest.json"));
    m2["dataset_source"] = m1["dataset_source"];
    write_file(tmp.file("r2") + "/manifest.json", m2.dump());
    REQUIRE(cli::report_command({tmp.file("r1"), tmp.file("r2")}, tmp.file("both.csv")) == cli::kExitOk);
    auto both = read_file(tmp.file("both.csv"));
    CHECK(both.find("warning") != std::string::npos);
}

TEST_CASE("gen-synthetic: writes a loadable canonical dataset") {
    TempDir tmp("gen");
    auto spec_path = write_file(tmp.file("spec.json"), R"({"regime":"biased","seed":4,"n_per_group":50})");
    REQUIRE(cli::gen_synthetic_command(spec_path, tmp.file("ds.bin")) == cli::kExitOk);
    auto ds = data::load_canonical(tmp.file("ds.bin"));
    CHECK(ds.n() == 100);
    CHECK(ds.dim() == 10);
    // both groups present in every split
    for (auto sp : {data::Split::train, data::Split::val, data::Split::test}) {
        CHECK(!ds.indices_of(sp, 0).empty());
        CHECK(!ds.indices_of(sp, 1).empty());
    }
}

TEST_CASE("verify: filtered run exits 0; mutated gradient exits 1; repeat is identical") {
    CHECK(cli::cli_main({"verify", "--filter", "fd_step_robustness"}) == cli::kExitOk);
    CHECK(cli::cli_main({"verify", "--filter", "implicit_grad_fidelity_k0", "--mutate-implicit-grad"}) ==
          cli::kExitVerifyFailed);
    auto a = oracle::run_all_checks("implicit_grad_fidelity_k0");
    auto b = oracle::run_all_checks("implicit_grad_fidelity_k0");
    REQUIRE(a.size() == b.size());
    CHECK(a[0].rel_error == b[0].rel_error);
}

TEST_CASE("verify: unknown filter is a usage error") {
    CHECK(cli::cli_main({"verify", "--filter", "no_such_check"}) == cli::kExitConfigError);
}
