#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "instructav/consistency.hpp"
#include "instructav/genclient.hpp"
#include "instructav/humaneval.hpp"

namespace instructav {

// Run definition shared by every subcommand. Loaded from a TOML document;
// "${NAME}" inside string values expands to the environment variable NAME.
struct ToolkitConfig {
  std::uint64_t seed = 0;
  BackendConfig backend;
  int max_new_tokens = kDefaultMaxNewTokens;
  double temperature = kDefaultTemperature;
  PhrasePolicy phrases;
  humaneval::RubricConfig rubric;

  std::string template_dir;  // empty: default_template_dir()
  std::optional<std::string> demos_path;
  std::size_t demo_count = 2;
  std::size_t char_budget = 0;

  bool dedup = true;
  std::string source = "other";

  std::optional<std::string> embeddings_path;
  bool strip_answer = true;

  void validate() const;
};

// Parses and validates. Unknown sections or keys, wrong value types and
// unset interpolated variables throw Error(kConfig).
ToolkitConfig parse_config(const std::string& text, const std::string& origin = "<string>");
// Missing file is Error(kConfig).
ToolkitConfig load_config(const std::string& path);

// Sets one dotted key ("backend.retry_limit") from its TOML literal; a value
// that does not parse as TOML is taken as a bare string. Does not validate.
void set_config_value(ToolkitConfig& config, const std::string& key, const std::string& value);

std::vector<std::string> config_keys();

}  // namespace instructav
