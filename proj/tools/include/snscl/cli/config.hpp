#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "snscl/dataset.hpp"
#include "snscl/trainer.hpp"

namespace snscl::cli {

/// Bad config file, bad flag value, or an output conflict. Maps to exit code 1.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parsed `[section]` / `key = value` text. `#` and `;` start comment lines.
/// Duplicate keys and malformed lines are rejected with the line number.
struct IniDocument {
    struct Entry {
        std::string value;
        int line = 0;
    };
    std::map<std::string, std::map<std::string, Entry>> sections;
};

IniDocument parse_ini(const std::string& text, const std::string& origin = "<string>");

/// Everything one experiment needs. Randomness comes from exactly two seeds:
/// `data_seed` (cluster layout, sampling and noise) and `training.seed`.
struct ExperimentConfig {
    std::string label = "default";
    std::filesystem::path out = "runs/default";
    std::filesystem::path dataset_dir;   // empty: same as `out`

    std::uint64_t data_seed = 1;
    data::BlobSpec blobs;                // `blobs.seed` is derived from data_seed
    data::NoiseKind noise_kind = data::NoiseKind::symmetric;
    double noise_rate = 0.4;

    train::TrainingConfig training;
    bool dump_reliability = false;
    bool save_checkpoint = true;

    std::filesystem::path dataset_path() const { return dataset_dir.empty() ? out : dataset_dir; }
    data::BlobSpec blob_spec() const;
    data::NoiseSpec noise_spec() const;

    /// Throws ConfigError on the first invalid field.
    void validate() const;
};

/// Defaults overridden by the file's keys; unknown sections or keys throw ConfigError.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<string>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical text of every key, in a fixed order; parse_config(to_ini(c)) == c.
std::string to_ini(const ExperimentConfig& cfg);

/// Hash over all settings except output locations.
std::string config_hash(const ExperimentConfig& cfg);
/// Hash over the data and noise settings only; identifies a generated dataset.
std::string data_hash(const ExperimentConfig& cfg);

/// Applies `no-correct`, `no-wupdate`, `no-stoch` or `plain_scl`.
void apply_ablation(train::Ablation& a, const std::string& name);

}  // namespace snscl::cli
