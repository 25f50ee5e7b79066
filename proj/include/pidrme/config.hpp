#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "pidrme/federation.hpp"

namespace pidrme {

/// Everything one invocation of the experiment runner needs.
struct ExperimentConfig {
  ScenarioConfig scenario;
  RoundConfig round;
  std::vector<Mode> modes{Mode::PIDRME, Mode::FLRME, Mode::SRME};
  std::filesystem::path output_dir = "out";

  ExperimentConfig();
};

using KeyValues = std::vector<std::pair<std::string, std::string>>;

struct ConfigKey {
  std::string name;
  std::string default_value;
  std::string help;
};

/// Every accepted key with its default, in documentation order.
const std::vector<ConfigKey>& config_keys();

/// Config file grammar: one `key = value` per line; `#` starts a comment;
/// blank lines ignored; keys are lower_snake_case; a repeated key overrides
/// the earlier one.
KeyValues read_config_text(const std::string& text);
KeyValues read_config_file(const std::filesystem::path& path);

/// Applies `file` then `overrides` on top of the defaults and validates the
/// result. Unknown keys, malformed values and constraint violations raise
/// ValidationError naming the key.
ExperimentConfig parse_config(const KeyValues& file, const KeyValues& overrides = {});

/// Key/value echo of a config, for reports.
KeyValues describe(const ExperimentConfig& config);

/// Subcommands of the CLI. Returns the process exit status
/// (0 success, 1 validation error, 2 runtime error).
int dispatch(const std::string& command, const ExperimentConfig& config, std::ostream& out, std::ostream& err);

}  // namespace pidrme
