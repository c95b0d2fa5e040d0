#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cwp::lab {

using Json = nlohmann::ordered_json;

inline constexpr const char* kManifestSchema = "cwp-lab/manifest/v1";

const std::vector<std::string>& subcommands();

// Defaults for one subcommand, including the shared keys seed, threads and format.
Json default_config(const std::string& subcommand);

// Flat key/value configuration. Layers are applied in order; each layer may only
// name keys present in the defaults, with a compatible type.
class Config {
public:
    explicit Config(std::string subcommand);

    // Accepts a flat config document or a run manifest (its config block is used).
    void merge_file(const std::filesystem::path& path);
    void merge(const Json& layer, const std::string& origin);
    void set(const std::string& key, const Json& value, const std::string& origin);

    const std::string& subcommand() const { return subcommand_; }
    const Json& values() const { return values_; }

    double real(const std::string& key) const;
    std::int64_t integer(const std::string& key) const;
    std::uint64_t seed() const;
    unsigned threads() const;
    bool flag(const std::string& key) const;
    std::string text(const std::string& key) const;
    std::vector<int> int_list(const std::string& key) const;

    // Hash of the config without the thread count; identifies the data outputs.
    std::string run_id() const;

private:
    std::string subcommand_;
    Json values_;
};

struct Artifact {
    std::string file;    // relative name inside the output directory
    std::string schema;  // e.g. cwp-lab/clt-rate/v1
    std::string body;
};

struct RunResult {
    std::vector<Artifact> artifacts;
    Json summary = Json::object();
};

// Runs a subcommand on a validated config. Throws ConfigError, CapacityError or
// NumericError.
RunResult run_experiment(const Config& config);

Json make_manifest(const Config& config, const RunResult& result, double wall_clock_seconds);

// Full command line entry point; returns the process exit code (0, 1 or 2).
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

// Shortest round-trip decimal form.
std::string number(double value);

}  // namespace cwp::lab
