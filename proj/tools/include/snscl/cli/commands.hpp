#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "snscl/cli/config.hpp"

namespace snscl::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kRuntimeError = 2 };

/// Command-line overrides layered over the config file.
struct CommandOptions {
    std::filesystem::path config;            // empty: built-in defaults
    std::optional<std::filesystem::path> out;
    std::optional<std::uint64_t> seed;       // data seed for `gen`, training seed otherwise
    bool force = false;
    std::optional<std::string> lnl;
    std::vector<std::string> ablations;
    bool no_snscl = false;
};

/// Loads the config and applies the overrides for `command`. Throws ConfigError.
ExperimentConfig resolve(const CommandOptions& opts, const std::string& command);

// Each command logs progress to `log`, reports failures to `err` and
// returns an ExitCode.

/// Writes train.csv, test.csv and manifest.txt into the output directory.
int cmd_gen(const CommandOptions& opts, std::ostream& log, std::ostream& err);
/// Reads the dataset, trains, writes metrics.csv, summary.txt and optionally
/// model.ckpt / reliability.csv.
int cmd_train(const CommandOptions& opts, std::ostream& log, std::ostream& err);
/// Baseline and SNSCL on the same data and seed; writes compare_report.txt,
/// curves.csv, metrics_baseline.csv and metrics_snscl.csv.
int cmd_compare(const CommandOptions& opts, std::ostream& log, std::ostream& err);

/// `# key: value` lines at the top of an output file.
std::map<std::string, std::string> read_header(const std::filesystem::path& path);

/// Throws ConfigError when `path` exists and was not produced under `hash`
/// (unless forced).
void check_overwrite(const std::filesystem::path& path, const std::string& hash, bool force);

}  // namespace snscl::cli
