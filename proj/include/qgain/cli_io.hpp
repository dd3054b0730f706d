#pragma once

// Configuration parsing, command execution and artifact writing behind the
// qgain command-line tool.

#include "qgain/experiments.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace qgain {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumeric = 3;

struct RunConfig {
    std::string command;        // moments | weights | theory | simulate | figure | bound-check
    nlohmann::json effective;   // every key of the command with defaults applied
    std::uint64_t seed = 1;
    std::filesystem::path out_dir;
    std::filesystem::path cache_dir;
    bool use_cache = true;
    int workers = 1;
};

/// Validates a config object: the command must be known, every key must
/// belong to it and have the right type, ranges are checked, defaults are
/// filled in. Violations throw ValidationError naming the field.
RunConfig parse_config(const nlohmann::json& raw);

/// Parses JSON text; syntax errors report line and column.
nlohmann::json parse_json_text(const std::string& text, const std::string& source = "config");

std::vector<std::string> command_names();

/// Executes a validated config, writing artifacts into out_dir. Progress and
/// summaries go to `log`. Returns the list of files written.
std::vector<std::filesystem::path> run(const RunConfig& config, std::ostream& log);

/// Maps exceptions to exit statuses: 2 for validation, 3 for numeric
/// failures (including a violated error bound), 1 otherwise.
int exit_status(const std::exception& e);

/// "# config: {...}" followed by a newline.
std::string config_header(const nlohmann::json& effective);

/// Integer λ grid from 2 to lmax: every value up to 10, then about ten
/// log-spaced values per decade, always ending at lmax.
std::vector<int> lambda_grid(int lmax);

/// "cigar" or "cigar:1e6"; the condition number defaults to 1e6 for
/// discus, ellipsoid and cigar.
SpectrumSpec spectrum_spec_from_string(const std::string& text);

} // namespace qgain
