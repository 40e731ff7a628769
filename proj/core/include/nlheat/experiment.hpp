#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace nlheat {

// One experiment invocation: a subcommand plus its validated parameter bag.
// Unknown keys are rejected, defaults are filled in and echoed, and the
// owning module's parameter gates are re-checked at load time.
struct ExperimentConfig {
    std::string subcommand;
    int schema_version = 1;
    std::uint64_t seed = 1;
    int threads = 1;
    std::string out_dir = "out";
    int ensemble = 1;
    nlohmann::json params;
};

extern const char* const kArtifactVersion;

ExperimentConfig parse_config(const std::string& subcommand, const nlohmann::json& raw);
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);
std::string config_hash_hex(const ExperimentConfig& cfg);

struct RunStatus {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string note;
};

struct RunManifest {
    std::string config_hash;
    std::string artifact_version;
    std::vector<std::uint64_t> seeds;
    std::vector<RunStatus> status;
    std::vector<std::string> outputs; // file index
    nlohmann::json aggregate;
};

// Executes the configured subcommand for `ensemble` seeds (seed, seed+1, ...),
// writes per-seed outputs under out_dir, aggregates numeric summaries
// (mean, quartiles, CI for slope-like fields), and writes manifest.json.
// Fails when fewer than 80% of the seeds succeed.
RunManifest run_ensemble(const ExperimentConfig& cfg);

void write_manifest(const RunManifest& m, const std::string& path);
nlohmann::json manifest_to_json(const RunManifest& m);

} // namespace nlheat
