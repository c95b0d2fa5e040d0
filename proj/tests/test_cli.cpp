#include "doctest.h"

#include "lab.hpp"

#include "cwp/error.hpp"
#include "cwp/free_energy.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace cwp;
using namespace cwp::lab;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun cli(std::vector<std::string> args) {
    args.insert(args.begin(), "cwp-lab");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("cwp_lab_test_" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir.parent_path());
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Json json_of(const std::string& text) { return Json::parse(text); }

}  // namespace

TEST_CASE("defaults and key validation") {
    for (const auto& name : subcommands()) {
        const auto d = default_config(name);
        CHECK(d.contains("seed"));
        CHECK(d.contains("threads"));
        CHECK(d.contains("format"));
    }
    CHECK_THROWS_AS(default_config("bogus"), ConfigError);

    Config c("clt-rate");
    CHECK_THROWS_AS(c.set("nonsense", 1, "test"), ConfigError);
    CHECK_THROWS_AS(c.set("n_grid", 5, "test"), ConfigError);
    CHECK_THROWS_AS(c.set("chains", 2.5, "test"), ConfigError);
    CHECK_THROWS_AS(c.set("conditioned", 1, "test"), ConfigError);
    c.set("beta", 3, "test");  // integer accepted where a real is expected
    CHECK(c.real("beta") == 3.0);
    c.set("n_grid", Json::array({10, 0}), "test");
    CHECK_THROWS_AS(c.int_list("n_grid"), ConfigError);
}

TEST_CASE("run id ignores the thread count only") {
    Config a("sample"), b("sample");
    b.set("threads", 8, "test");
    CHECK(a.run_id() == b.run_id());
    b.set("seed", 2, "test");
    CHECK(a.run_id() != b.run_id());
}

TEST_CASE("shortest round-trip numbers") {
    CHECK(number(0.1) == "0.1");
    CHECK(number(2.0) == "2");
    for (double v : {1.0 / 3, -2.5e-300, 6.02214076e23}) CHECK(std::stod(number(v)) == v);
}

TEST_CASE("precedence: defaults < config file < --set < dedicated flags") {
    const auto dir = scratch("precedence");
    fs::create_directories(dir);
    std::ofstream(dir / "cfg.json") << R"({"beta_points": 2, "h_points": 1, "seed": 5})";
    const auto run = cli({"phase-report", "--config", (dir / "cfg.json").string(), "--set", "beta_points=3", "--set",
                          "seed=6", "--seed", "7", "--out", (dir / "out").string()});
    REQUIRE(run.code == 0);
    const auto manifest = json_of(slurp(dir / "out" / "manifest.json"));
    CHECK(manifest["config"]["beta_points"] == 3);
    CHECK(manifest["config"]["h_points"] == 1);
    CHECK(manifest["config"]["seed"] == 7);
    CHECK(manifest["seed"] == 7);
    CHECK(manifest["config"]["beta_min"] == 1.5);
    CHECK(manifest["summary"]["points"] == 3);
    CHECK(manifest["schema"] == kManifestSchema);
    REQUIRE(manifest["outputs"].size() == 1);
    CHECK(manifest["outputs"][0]["file"] == "phase-report.json");
    const auto report = json_of(slurp(dir / "out" / "phase-report.json"));
    CHECK(report["run_id"] == manifest["run_id"]);
    CHECK(report["manifest"] == "manifest.json");
    CHECK(report["schema"] == "cwp-lab/phase-report/v1");
}

TEST_CASE("exit codes") {
    const auto dir = scratch("exit");
    fs::create_directories(dir);
    CHECK(cli({"phase-report", "--help"}).code == 0);
    CHECK(cli({}).code == 2);
    CHECK(cli({"phase-report", "--threads", "0"}).code == 2);
    CHECK(cli({"phase-report", "--format", "xml"}).code == 2);
    CHECK(cli({"phase-report", "--set", "nope=1"}).code == 2);
    CHECK(cli({"phase-report", "--set", "novalue"}).code == 2);
    CHECK(cli({"stein-bounds", "--format", "csv"}).code == 2);
    CHECK(cli({"sample", "--set", "conditioned=true"}).code == 2);  // unique minimizer at beta = 2
    CHECK(cli({"exact-law", "--set", "minimizer=3"}).code == 2);
    std::ofstream(dir / "broken.json") << "{ not json";
    CHECK(cli({"exact-law", "--config", (dir / "broken.json").string()}).code == 2);
    CHECK(cli({"exact-law", "--config", (dir / "missing.json").string()}).code == 2);
    const auto capacity = cli({"exact-law", "--set", "n=100000"});
    CHECK(capacity.code == 1);
    CHECK(capacity.err.find("budget") != std::string::npos);
    // a manifest from another subcommand is rejected
    REQUIRE(cli({"phase-report", "--set", "beta_points=0", "--out", (dir / "pr").string()}).code == 0);
    CHECK(cli({"exact-law", "--config", (dir / "pr" / "manifest.json").string()}).code == 2);
}

TEST_CASE("phase report: empty grid, the h = 0 sweep, the extremity") {
    const auto empty = cli({"phase-report", "--set", "beta_points=0"});
    CHECK(empty.code == 0);
    CHECK(json_of(empty.out)["points"].empty());

    const double beta_c = closed_form_constants(3).beta_c;
    const auto sweep = cli({"phase-report", "--set", "beta_min=2", "--set", "beta_max=3.2", "--set", "beta_points=13",
                            "--set", "h_points=1"});
    REQUIRE(sweep.code == 0);
    double last_unique = 0, first_fold = 10;
    const auto swept = json_of(sweep.out);
    for (const auto& p : swept["points"]) {
        const double beta = p["beta"];
        if (p["tag"] == "UniqueMinimizer") last_unique = std::max(last_unique, beta);
        if (p["tag"] == "LowTempQFold") first_fold = std::min(first_fold, beta);
    }
    CHECK(last_unique < beta_c);
    CHECK(first_fold > beta_c);
    CHECK(first_fold - last_unique == doctest::Approx(0.1));

    std::ostringstream at_critical;
    at_critical << "beta_min=" << number(beta_c);
    const auto critical = cli({"phase-report", "--set", at_critical.str(), "--set", "beta_points=1", "--set", "h_points=1"});
    const auto point = json_of(critical.out)["points"][0];
    CHECK(point["tag"] == "CriticalPointQPlus1");
    CHECK(point["minimizers"].size() == 4);

    const auto k = closed_form_constants(3);
    const auto extremity = cli({"phase-report", "--set", "beta_min=" + number(k.beta_0), "--set", "beta_points=1", "--set",
                                "h_min=" + number(k.h_0), "--set", "h_points=1"});
    const auto ext = json_of(extremity.out)["points"][0];
    CHECK(ext["tag"] == "Extremity");
    CHECK(ext["minimizers"][0]["degenerate"] == true);
    CHECK(ext["minimizers"][0]["sigma"].is_null());
}

TEST_CASE("manifest replays to byte-identical data across thread counts") {
    const auto dir = scratch("replay");
    REQUIRE(cli({"sample", "--set", "n=40", "--set", "chains=3", "--set", "samples_per_chain=50", "--format", "csv",
                 "--out", (dir / "a").string()})
                .code == 0);
    REQUIRE(cli({"sample", "--config", (dir / "a" / "manifest.json").string(), "--threads", "3", "--out",
                 (dir / "b").string()})
                .code == 0);
    const auto a = slurp(dir / "a" / "sample.csv");
    CHECK(a == slurp(dir / "b" / "sample.csv"));
    std::istringstream lines(a);
    std::string first, header;
    std::getline(lines, first);
    std::getline(lines, header);
    CHECK(first.rfind("# schema=cwp-lab/sample/v1 run_id=", 0) == 0);
    CHECK(header == "chain,sweep,W_1,W_2,W_3");
    const auto manifest = json_of(slurp(dir / "b" / "manifest.json"));
    CHECK(manifest["config"]["threads"] == 3);
    CHECK(manifest["summary"]["samples"] == 150);
    CHECK(manifest.contains("wall_clock_seconds"));
}

TEST_CASE("clt-rate single n gives a table without a fit") {
    const auto run = cli({"clt-rate", "--set", "n_grid=[40]", "--format", "csv"});
    REQUIRE(run.code == 0);
    std::istringstream lines(run.out);
    std::string first, header, row, extra;
    std::getline(lines, first);
    std::getline(lines, header);
    std::getline(lines, row);
    CHECK(header == "n,variance,dk_marginal,dk_quadrant,samples");
    CHECK(row.rfind("40,", 0) == 0);
    CHECK_FALSE(std::getline(lines, extra));
    const auto summary = json_of(run.err);
    CHECK(summary["fit_marginal"].is_null());
    CHECK(summary["mode"] == "exact");
}

TEST_CASE("stein-bounds: lambda doubles with n") {
    const auto run = cli({"stein-bounds", "--set", "n_grid=[16,32]", "--set", "samples_per_chain=300", "--set", "burn_in=50",
                          "--set", "thinning=2"});
    REQUIRE(run.code == 0);
    const auto doc = json_of(run.out);
    CHECK(doc["ratios"][0]["lambda"].get<double>() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(doc["ratios"][0]["A3"].get<double>() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(doc["terms"][0].contains("residual_rms_max"));
    CHECK(doc["residual_fit"].is_object());
}

TEST_CASE("critical-rate and hs-check outputs") {
    const auto crit = cli({"critical-rate", "--set", "n_grid=[64,256]"});
    REQUIRE(crit.code == 0);
    const auto doc = json_of(crit.out);
    CHECK(doc["rows"].size() == 2);
    CHECK(doc["rows"][0]["n"] == 64);
    CHECK(doc["rows"][1]["dk_f"].get<double>() < doc["rows"][0]["dk_f"].get<double>());
    CHECK(doc["summary"]["v_covariance_target"][0][0].get<double>() == doctest::Approx(0.375));

    const auto hs = cli({"hs-check", "--set", "n=1"});
    REQUIRE(hs.code == 0);
    CHECK(json_of(hs.out)["gap"]["tv"].get<double>() <= 1e-10);
    const auto refine = cli({"hs-check", "--set", "points=13", "--set", "refine=true"});
    const auto gaps = json_of(refine.out);
    CHECK(gaps["refined"]["tv"].get<double>() <= 0.5 * gaps["gap"]["tv"].get<double>());
    CHECK(cli({"hs-check", "--set", "gamma=0.7"}).code == 2);
}
