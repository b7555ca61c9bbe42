#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "instructav/error.hpp"

namespace instructav {

inline constexpr int kDefaultMaxNewTokens = 512;
inline constexpr double kDefaultTemperature = 0.1;

struct GenerationRequest {
  std::string prompt;
  int max_new_tokens = kDefaultMaxNewTokens;
  double temperature = kDefaultTemperature;
  std::map<std::string, std::string> metadata;

  void validate() const;
};

struct GenerationResult {
  std::string text;
  std::string backend_name;
  std::int64_t latency_ms = 0;
  int attempt_count = 1;
};

enum class BackendKind { kHttpChatCompletion, kMock };

struct BackendConfig {
  BackendKind kind = BackendKind::kMock;
  std::optional<std::string> endpoint_url;
  // Name of the environment variable holding the bearer token. Keys never
  // live in configuration.
  std::optional<std::string> api_key_env_var;
  std::optional<std::string> model_name;
  int max_in_flight = 4;
  int retry_limit = 3;
  int backoff_base_ms = 500;
  int timeout_ms = 120000;
  std::uint64_t mock_seed = 0;
  double mock_corrupt_fraction = 0.0;

  void validate() const;
};

// A generation backend. Implementations are thread-safe.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string name() const = 0;
  virtual GenerationResult generate(const GenerationRequest& request) = 0;
};

// Offline backend: output is a pure function of (prompt, seed).
//
// Prompts opening with a label clause get an answer phrase plus an
// eleven-feature explanation agreeing with that label. Other prompts get a
// hash-chosen answer, with an explanation when the prompt asks for analysis.
// A `corrupt_fraction` share of prompts, keyed by prompt hash, receives the
// wrong answer phrase instead.
class MockBackend : public Backend {
 public:
  explicit MockBackend(std::uint64_t seed = 0, double corrupt_fraction = 0.0);

  std::string name() const override { return "mock"; }
  GenerationResult generate(const GenerationRequest& request) override;

  bool corrupts(std::string_view prompt) const;
  std::string respond(std::string_view prompt) const;

 private:
  std::uint64_t seed_;
  double corrupt_fraction_;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

// Chat-completion style HTTP backend: POST {model, messages, temperature,
// max_tokens}; the reply text is choices[0].message.content. Transport
// failures, 429 and 5xx are retried; retry k (from 0) waits backoff_base_ms * 2^k.
class HttpChatBackend : public Backend {
 public:
  explicit HttpChatBackend(BackendConfig config, Sleeper sleeper = {});

  std::string name() const override;
  GenerationResult generate(const GenerationRequest& request) override;

 private:
  BackendConfig config_;
  Sleeper sleeper_;
};

std::string encode_chat_request(const GenerationRequest& request, const std::string& model);
// Throws Error(kBackendUnavailable) when the body has no usable choice.
std::string extract_chat_text(std::string_view response_body);

std::unique_ptr<Backend> make_backend(const BackendConfig& config);

GenerationResult generate(const GenerationRequest& request, const BackendConfig& config);

struct BatchItem {
  std::optional<GenerationResult> result;
  std::optional<Error> error;
  bool ok() const { return result.has_value(); }
};

// Results align index-wise with `requests`; at most `max_in_flight` calls are
// outstanding. A failing item records its error without stopping the batch.
std::vector<BatchItem> generate_batch(const std::vector<GenerationRequest>& requests, Backend& backend,
                                      std::size_t max_in_flight);
std::vector<BatchItem> generate_batch(const std::vector<GenerationRequest>& requests,
                                      const BackendConfig& config);

// 64-bit FNV-1a, used wherever a stable content hash is needed.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0);

}  // namespace instructav
