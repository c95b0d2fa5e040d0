#include "lab.hpp"

#include "cwp/error.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <chrono>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#ifndef CWP_VERSION
#define CWP_VERSION "unknown"
#endif

namespace cwp::lab {

namespace {

Json shared_defaults() { return {{"seed", 1}, {"threads", 1}, {"format", "json"}}; }

Json specific_defaults(const std::string& sub) {
    if (sub == "phase-report")
        return {{"q", 3}, {"beta_min", 1.5}, {"beta_max", 3.5}, {"beta_points", 21},
                {"h_min", 0.0}, {"h_max", 0.1}, {"h_points", 5}};
    if (sub == "exact-law") return {{"q", 3}, {"beta", 2.0}, {"h", 0.0}, {"n", 30}, {"minimizer", 0}};
    if (sub == "sample")
        return {{"q", 3},         {"beta", 2.0},         {"h", 0.0},       {"n", 100},
                {"minimizer", 0}, {"conditioned", false}, {"epsilon", 0.4}, {"samples_per_chain", 1000},
                {"burn_in", 1000}, {"thinning", 1},       {"chains", 1}};
    if (sub == "clt-rate")
        return {{"q", 3},          {"beta", 2.0},        {"h", 0.0},
                {"n_grid", {50, 100, 200, 400, 800}},    {"minimizer", 0},
                {"conditioned", false}, {"epsilon", 0.4}, {"quadrant_points", 41},
                {"samples_per_chain", 50000}, {"burn_in", 1000}, {"thinning", 1}, {"chains", 4}};
    if (sub == "stein-bounds")
        return {{"q", 3},           {"beta", 2.0},     {"h", 0.0},     {"n_grid", {64, 128, 256}},
                {"minimizer", 0},   {"samples_per_chain", 2500},       {"burn_in", 1000},
                {"thinning", 10},   {"chains", 4},     {"exact_residual", true}};
    if (sub == "critical-rate")
        return {{"q", 3},          {"n_grid", {256, 1024, 4096}}, {"v_check_n", 0},
                {"v_samples", 100000}, {"burn_in", 10000},       {"chains", 4}};
    if (sub == "hs-check")
        return {{"q", 3},      {"beta", 2.0},  {"h", 0.0},         {"n", 20},
                {"minimizer", 0}, {"extremity", false}, {"gamma", 0.5}, {"points", 61}, {"refine", false},
                {"compare", true}, {"bounds", Json::array()}};
    throw ConfigError("unknown subcommand '" + sub + "'");
}

bool compatible(const Json& want, const Json& got) {
    if (want.is_boolean()) return got.is_boolean();
    if (want.is_string()) return got.is_string();
    if (want.is_number_integer()) return got.is_number_integer();
    if (want.is_number()) return got.is_number();
    if (want.is_array()) return got.is_array();
    return false;
}

std::string type_name(const Json& v) {
    if (v.is_boolean()) return "boolean";
    if (v.is_number_integer()) return "integer";
    if (v.is_number()) return "number";
    return v.type_name();
}

}  // namespace

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = {"phase-report", "exact-law", "sample", "clt-rate",
                                                   "stein-bounds", "critical-rate", "hs-check"};
    return names;
}

Json default_config(const std::string& subcommand) {
    Json out = specific_defaults(subcommand);
    const Json shared = shared_defaults();
    for (const auto& [key, value] : shared.items()) out[key] = value;
    return out;
}

Config::Config(std::string subcommand) : subcommand_(std::move(subcommand)), values_(default_config(subcommand_)) {}

void Config::merge_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError(path.string() + ": expected a JSON object");
    if (doc.contains("schema") && doc["schema"] == kManifestSchema) {
        if (doc.value("subcommand", "") != subcommand_)
            throw ConfigError(path.string() + ": manifest is for '" + doc.value("subcommand", "") + "', not '" + subcommand_ + "'");
        merge(doc.at("config"), path.string() + " (manifest)");
        return;
    }
    merge(doc, path.string());
}

void Config::merge(const Json& layer, const std::string& origin) {
    if (!layer.is_object()) throw ConfigError(origin + ": expected a JSON object");
    for (const auto& [key, value] : layer.items()) set(key, value, origin);
}

void Config::set(const std::string& key, const Json& value, const std::string& origin) {
    if (!values_.contains(key)) throw ConfigError(origin + ": unknown key '" + key + "' for " + subcommand_);
    if (!compatible(values_[key], value))
        throw ConfigError(origin + ": key '" + key + "' expects " + type_name(values_[key]) + ", got " + type_name(value));
    values_[key] = value;
}

double Config::real(const std::string& key) const { return values_.at(key).get<double>(); }
std::int64_t Config::integer(const std::string& key) const { return values_.at(key).get<std::int64_t>(); }
bool Config::flag(const std::string& key) const { return values_.at(key).get<bool>(); }
std::string Config::text(const std::string& key) const { return values_.at(key).get<std::string>(); }

std::uint64_t Config::seed() const {
    const auto& v = values_.at("seed");
    if (v.is_number_unsigned()) return v.get<std::uint64_t>();
    if (v.get<std::int64_t>() < 0) throw ConfigError("seed must be non-negative");
    return v.get<std::uint64_t>();
}

unsigned Config::threads() const {
    const auto t = integer("threads");
    if (t < 1 || t > 1024) throw ConfigError("threads must be in [1, 1024]");
    return static_cast<unsigned>(t);
}

std::vector<int> Config::int_list(const std::string& key) const {
    std::vector<int> out;
    for (const auto& v : values_.at(key)) {
        if (!v.is_number_integer()) throw ConfigError("key '" + key + "' expects a list of integers");
        const auto x = v.get<std::int64_t>();
        if (x < 1 || x > std::numeric_limits<int>::max()) throw ConfigError("key '" + key + "' has an out-of-range entry");
        out.push_back(static_cast<int>(x));
    }
    return out;
}

std::string Config::run_id() const {
    Json identity = values_;
    identity.erase("threads");
    const std::string text = subcommand_ + '\n' + identity.dump();
    std::uint64_t hash = 14695981039346656037ull;  // FNV-1a
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 1099511628211ull;
    }
    std::ostringstream out;
    out << std::hex << hash;
    return out.str();
}

std::string number(double value) {
    char buffer[64];
    const auto [end, ec] = std::to_chars(buffer, buffer + sizeof buffer, value);
    return std::string(buffer, end);
}

Json make_manifest(const Config& config, const RunResult& result, double wall_clock_seconds) {
    Json outputs = Json::array();
    for (const auto& a : result.artifacts) outputs.push_back({{"file", a.file}, {"schema", a.schema}});
    return {{"schema", kManifestSchema},
            {"version", CWP_VERSION},
            {"subcommand", config.subcommand()},
            {"run_id", config.run_id()},
            {"seed", config.seed()},
            {"config", config.values()},
            {"outputs", outputs},
            {"summary", result.summary},
            {"wall_clock_seconds", wall_clock_seconds}};
}

int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Curie-Weiss-Potts experiment driver"};
    app.set_version_flag("--version", std::string(CWP_VERSION));
    app.require_subcommand(1);

    std::optional<std::filesystem::path> config_path, out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::optional<std::string> format;
    std::vector<std::string> overrides;
    for (const auto& name : subcommands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "flat JSON config or a previous run manifest");
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--threads", threads, "worker cap")->check(CLI::Range(1u, 1024u));
        sub->add_option("--out", out_dir, "output directory; stdout when absent");
        sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--set", overrides, "key=value override (value parsed as JSON)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        Config config(name);
        if (config_path) config.merge_file(*config_path);
        for (const auto& item : overrides) {
            const auto eq = item.find('=');
            if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + item + "'");
            const std::string key = item.substr(0, eq), raw = item.substr(eq + 1);
            Json value = Json::parse(raw, nullptr, false);
            if (value.is_discarded()) value = raw;
            config.set(key, value, "--set");
        }
        if (seed) config.set("seed", *seed, "--seed");
        if (threads) config.set("threads", *threads, "--threads");
        if (format) config.set("format", *format, "--format");

        const auto start = std::chrono::steady_clock::now();
        const RunResult result = run_experiment(config);
        const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        if (!out_dir) {
            for (const auto& a : result.artifacts) out << a.body;
            err << result.summary.dump() << '\n';
            return 0;
        }
        std::filesystem::create_directories(*out_dir);
        for (const auto& a : result.artifacts) {
            std::ofstream file(*out_dir / a.file, std::ios::binary);
            file << a.body;
            if (!file) throw std::runtime_error("cannot write " + (*out_dir / a.file).string());
        }
        std::ofstream manifest(*out_dir / "manifest.json", std::ios::binary);
        manifest << make_manifest(config, result, seconds).dump(2) << '\n';
        if (!manifest) throw std::runtime_error("cannot write manifest");
        out << (*out_dir / "manifest.json").string() << '\n';
        return 0;
    } catch (const ConfigError& e) {
        err << "cwp-lab: config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "cwp-lab: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace cwp::lab
