#pragma once

// Operator-facing commands. Exit codes: 0 success, 1 I/O, 2 validation/config.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gatead/score.hpp"
#include "gatead/train.hpp"

namespace gatead::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitIo = 1;
inline constexpr int kExitValidation = 2;

inline constexpr const char* kToolVersion = "0.1.0";

/// Everything a run can be configured with.
struct RunSettings {
    TrainConfig train;
    ScoreConfig score;
};

/// Recognized setting keys (config-file spelling; flags use dashes instead of underscores).
const std::vector<std::string>& setting_keys();

/// Parses and range-checks one setting. `origin` names the source in error
/// messages, e.g. "--mask-ratio" or "config key mask_ratio".
void apply_setting(RunSettings& settings, std::string_view key, std::string_view value, std::string_view origin);

/// Flat `key = value` lines; blank lines and `#` comments ignored.
std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text);
std::vector<std::pair<std::string, std::string>> parse_config_file(const std::filesystem::path& path);

/// `key = v1, v2, ...` lines, keys in file order.
std::vector<std::pair<std::string, std::vector<std::string>>> parse_grid_text(std::string_view text);

/// Current value of a setting in its textual form.
std::string setting_value(const RunSettings& settings, std::string_view key);

/// Runs one command line (args exclude the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gatead::cli
