#include "instructav/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>

#include "instructav/error.hpp"
#include "instructav/jsonl.hpp"
#include "toml.hpp"

namespace instructav {

namespace {

Error config_error(const std::string& message, const std::string& key) {
  return Error(ErrorCode::kConfig, message, {{"key", key}});
}

std::string interpolate(const std::string& raw, const std::string& key) {
  std::string out;
  std::size_t pos = 0;
  while (pos < raw.size()) {
    const auto open = raw.find("${", pos);
    if (open == std::string::npos) break;
    const auto close = raw.find('}', open + 2);
    if (close == std::string::npos) throw config_error("unterminated ${ in value", key);
    const std::string var = raw.substr(open + 2, close - open - 2);
    const char* value = var.empty() ? nullptr : std::getenv(var.c_str());
    if (value == nullptr) {
      throw Error(ErrorCode::kConfig, "environment variable not set", {{"key", key}, {"variable", var}});
    }
    out.append(raw, pos, open - pos);
    out += value;
    pos = close + 1;
  }
  out.append(raw, pos, std::string::npos);
  return out;
}

std::string as_string(const toml::node& node, const std::string& key) {
  if (!node.is_string()) throw config_error("expected a string", key);
  return interpolate(node.as_string()->get(), key);
}

std::int64_t as_int(const toml::node& node, const std::string& key) {
  if (!node.is_integer()) throw config_error("expected an integer", key);
  return node.as_integer()->get();
}

std::int64_t as_nonnegative(const toml::node& node, const std::string& key) {
  const auto v = as_int(node, key);
  if (v < 0) throw config_error("expected a non-negative integer", key);
  return v;
}

int as_int32(const toml::node& node, const std::string& key) {
  const auto v = as_int(node, key);
  if (v < INT32_MIN || v > INT32_MAX) throw config_error("integer out of range", key);
  return static_cast<int>(v);
}

double as_double(const toml::node& node, const std::string& key) {
  if (node.is_floating_point()) return node.as_floating_point()->get();
  if (node.is_integer()) return static_cast<double>(node.as_integer()->get());
  throw config_error("expected a number", key);
}

bool as_bool(const toml::node& node, const std::string& key) {
  if (!node.is_boolean()) throw config_error("expected a boolean", key);
  return node.as_boolean()->get();
}

std::vector<std::string> as_string_list(const toml::node& node, const std::string& key) {
  const auto* arr = node.as_array();
  if (arr == nullptr) throw config_error("expected an array of strings", key);
  std::vector<std::string> out;
  for (const auto& item : *arr) out.push_back(as_string(item, key));
  return out;
}

using Setter = std::function<void(ToolkitConfig&, const toml::node&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"seed", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.seed = static_cast<std::uint64_t>(as_nonnegative(n, k));
       }},
      {"backend.kind", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         const auto v = as_string(n, k);
         if (v == "mock") {
           c.backend.kind = BackendKind::kMock;
         } else if (v == "http") {
           c.backend.kind = BackendKind::kHttpChatCompletion;
         } else {
           throw config_error("backend.kind must be \"mock\" or \"http\"", k);
         }
       }},
      {"backend.endpoint_url", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.backend.endpoint_url = as_string(n, k);
       }},
      {"backend.api_key_env", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.backend.api_key_env_var = as_string(n, k);
       }},
      {"backend.model", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.backend.model_name = as_string(n, k);
       }},
      {"backend.max_in_flight", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.backend.max_in_flight = as_int32(n, k);
       }},
      {"backend.retry_limit", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.backend.retry_limit = as_int32(n, k);
       }},
      {"backend.backoff_base_ms", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.backend.backoff_base_ms = as_int32(n, k);
       }},
      {"backend.timeout_ms", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.backend.timeout_ms = as_int32(n, k);
       }},
      {"backend.mock_seed", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.backend.mock_seed = static_cast<std::uint64_t>(as_nonnegative(n, k));
       }},
      {"backend.mock_corrupt_fraction", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.backend.mock_corrupt_fraction = as_double(n, k);
       }},
      {"decoding.temperature", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.temperature = as_double(n, k);
       }},
      {"decoding.max_new_tokens", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.max_new_tokens = as_int32(n, k);
       }},
      {"consistency.same_phrases", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.phrases.same_phrases = as_string_list(n, k);
       }},
      {"consistency.different_phrases", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.phrases.different_phrases = as_string_list(n, k);
       }},
      {"consistency.case_sensitive", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.phrases.case_sensitive = as_bool(n, k);
       }},
      {"consistency.conclusion_only", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.phrases.conclusion_only = as_bool(n, k);
       }},
      {"rubric.coverage_max", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.rubric.coverage_max = as_int32(n, k);
       }},
      {"rubric.coverage_by_system", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         const auto* tbl = n.as_table();
         if (tbl == nullptr) throw config_error("expected a table of system = integer", k);
         c.rubric.coverage_by_system.clear();
         for (const auto& [system, value] : *tbl) {
           c.rubric.coverage_by_system[std::string(system.str())] =
               as_int32(value, k + "." + std::string(system.str()));
         }
       }},
      {"prompting.template_dir", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.template_dir = as_string(n, k);
       }},
      {"prompting.demos", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.demos_path = as_string(n, k);
       }},
      {"prompting.demo_count", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.demo_count = static_cast<std::size_t>(as_nonnegative(n, k));
       }},
      {"prompting.char_budget", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.char_budget = static_cast<std::size_t>(as_nonnegative(n, k));
       }},
      {"dataset.dedup", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.dedup = as_bool(n, k);
       }},
      {"dataset.source", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.source = as_string(n, k);
       }},
      {"metrics.embeddings", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.embeddings_path = as_string(n, k);
       }},
      {"metrics.strip_answer", [](ToolkitConfig& c, const toml::node& n, const std::string& k) {
         c.strip_answer = as_bool(n, k);
       }},
  };
  return table;
}

bool is_section(const std::string& name) {
  const auto prefix = name + ".";
  for (const auto& [key, setter] : setters()) {
    if (key.rfind(prefix, 0) == 0) return true;
  }
  return false;
}

void apply(ToolkitConfig& config, const std::string& key, const toml::node& node) {
  if (key == "backend.api_key" || key.ends_with(".api_key")) {
    throw config_error("keys are never read from configuration; name the variable in backend.api_key_env", key);
  }
  const auto it = setters().find(key);
  if (it == setters().end()) throw config_error("unknown configuration key", key);
  it->second(config, node, key);
}

}  // namespace

void ToolkitConfig::validate() const {
  backend.validate();
  phrases.validate();
  rubric.validate();
  GenerationRequest probe;
  probe.prompt = "x";
  probe.max_new_tokens = max_new_tokens;
  probe.temperature = temperature;
  try {
    probe.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what(), e.context());
  }
}

ToolkitConfig parse_config(const std::string& text, const std::string& origin) {
  toml::table root;
  try {
    root = toml::parse(text, origin);
  } catch (const toml::parse_error& e) {
    std::ostringstream where;
    where << e.source().begin.line;
    throw Error(ErrorCode::kConfig, std::string(e.description()), {{"path", origin}, {"line", where.str()}});
  }
  ToolkitConfig config;
  for (const auto& [raw_key, node] : root) {
    const std::string key(raw_key.str());
    if (node.is_table() && is_section(key)) {
      for (const auto& [sub_key, sub_node] : *node.as_table()) {
        apply(config, key + "." + std::string(sub_key.str()), sub_node);
      }
    } else {
      apply(config, key, node);
    }
  }
  config.validate();
  return config;
}

ToolkitConfig load_config(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorCode::kConfig, "config file not found", {{"path", path}});
  }
  return parse_config(read_text_file(path), path);
}

void set_config_value(ToolkitConfig& config, const std::string& key, const std::string& value) {
  toml::table parsed;
  try {
    parsed = toml::parse("v = " + value);
  } catch (const toml::parse_error&) {
    parsed = toml::table{{"v", value}};
  }
  const toml::node& node = *parsed.get("v");
  static const std::string kCoveragePrefix = "rubric.coverage_by_system.";
  if (key.rfind(kCoveragePrefix, 0) == 0 && key.size() > kCoveragePrefix.size()) {
    config.rubric.coverage_by_system[key.substr(kCoveragePrefix.size())] = as_int32(node, key);
    return;
  }
  apply(config, key, node);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& [key, setter] : setters()) out.push_back(key);
  return out;
}

}  // namespace instructav
