#include "instructav/genclient.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <regex>
#include <thread>

#include "instructav/core.hpp"
#include "instructav/prompting.hpp"
#include "json.hpp"

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include "httplib.h"

namespace instructav {

namespace {

constexpr std::string_view kAnalysisRequest = "provide an analysis";

std::string mock_explanation(ClassificationLabel label, std::uint64_t h) {
  static constexpr std::array<std::string_view, 3> kSame = {
      "both texts handle this dimension in the same way.",
      "the two texts show matching habits here.",
      "no meaningful difference appears between the texts.",
  };
  static constexpr std::array<std::string_view, 3> kDifferent = {
      "the texts handle this dimension differently.",
      "the two texts show contrasting habits here.",
      "a clear difference appears between the texts.",
  };
  const bool same = label == ClassificationLabel::kSameAuthor;
  const auto& observations = same ? kSame : kDifferent;
  std::string out = same ? "Comparing the two texts feature by feature, the shared habits point to a single writer.\n"
                         : "Comparing the two texts feature by feature, the contrasting habits point to two writers.\n";
  int i = 0;
  for (auto f : kAllLinguisticFeatures) {
    out += std::string(feature_heading(f)) + ": " + std::string(observations[(h >> (2 * i++)) % 3]) + "\n";
  }
  out += same ? "In summary, the texts were written by the same author."
              : "In summary, the texts were written by different authors.";
  return out;
}

ClassificationLabel flip(ClassificationLabel l) {
  return l == ClassificationLabel::kSameAuthor ? ClassificationLabel::kDifferentAuthor
                                               : ClassificationLabel::kSameAuthor;
}

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) {
    throw Error(ErrorCode::kConfig, "endpoint_url must be an http(s) URL", {{"endpoint_url", url}});
  }
  return {m[1].str(), m[2].matched ? m[2].str() : std::string("/v1/chat/completions")};
}

bool mentions_context_length(const std::string& body) {
  return body.find("context_length") != std::string::npos ||
         body.find("maximum context length") != std::string::npos;
}

// splitmix64 finalizer; FNV-1a alone leaves the low bits poorly mixed.
std::uint64_t avalanche(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = 14695981039346656037ULL;
  auto mix = [&h](unsigned char c) {
    h ^= c;
    h *= 1099511628211ULL;
  };
  for (int i = 0; i < 8; ++i) mix(static_cast<unsigned char>(seed >> (8 * i)));
  for (unsigned char c : data) mix(c);
  return h;
}

void GenerationRequest::validate() const {
  if (max_new_tokens < 1) throw Error(ErrorCode::kInvalidArgument, "max_new_tokens must be >= 1");
  if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be a finite non-negative number");
  }
}

void BackendConfig::validate() const {
  if (kind == BackendKind::kHttpChatCompletion) {
    if (!endpoint_url || endpoint_url->empty()) {
      throw Error(ErrorCode::kConfig, "HTTP backend requires endpoint_url");
    }
    if (!model_name || model_name->empty()) {
      throw Error(ErrorCode::kConfig, "HTTP backend requires model_name");
    }
    parse_url(*endpoint_url);
  }
  if (max_in_flight < 1) throw Error(ErrorCode::kConfig, "max_in_flight must be >= 1");
  if (retry_limit < 0) throw Error(ErrorCode::kConfig, "retry_limit must be >= 0");
  if (backoff_base_ms < 1) throw Error(ErrorCode::kConfig, "backoff_base_ms must be >= 1");
  if (timeout_ms < 1) throw Error(ErrorCode::kConfig, "timeout_ms must be >= 1");
  if (!(mock_corrupt_fraction >= 0.0 && mock_corrupt_fraction <= 1.0)) {
    throw Error(ErrorCode::kConfig, "mock_corrupt_fraction must lie in [0, 1]");
  }
}

MockBackend::MockBackend(std::uint64_t seed, double corrupt_fraction)
    : seed_(seed), corrupt_fraction_(corrupt_fraction) {}

bool MockBackend::corrupts(std::string_view prompt) const {
  if (corrupt_fraction_ <= 0.0) return false;
  const std::uint64_t h = avalanche(fnv1a64(prompt, seed_ ^ 0x9E3779B97F4A7C15ULL));
  // Top 53 bits as a uniform draw in [0, 1).
  return static_cast<double>(h >> 11) * 0x1.0p-53 < corrupt_fraction_;
}

std::string MockBackend::respond(std::string_view prompt) const {
  const std::uint64_t h = fnv1a64(prompt, seed_);
  std::optional<ClassificationLabel> clause_label;
  for (auto l : {ClassificationLabel::kSameAuthor, ClassificationLabel::kDifferentAuthor}) {
    const std::string clause = label_clause(l);
    if (prompt.substr(0, clause.size()) == clause) clause_label = l;
  }
  const ClassificationLabel label =
      clause_label.value_or((h >> 40) & 1 ? ClassificationLabel::kSameAuthor : ClassificationLabel::kDifferentAuthor);
  const bool explain = clause_label.has_value() || prompt.find(kAnalysisRequest) != std::string_view::npos;
  const ClassificationLabel answer = corrupts(prompt) ? flip(label) : label;

  std::string out = label_to_answer_phrase(answer);
  if (explain) out += " " + mock_explanation(label, h);
  return out;
}

GenerationResult MockBackend::generate(const GenerationRequest& request) {
  request.validate();
  return GenerationResult{respond(request.prompt), name(), 0, 1};
}

HttpChatBackend::HttpChatBackend(BackendConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleeper_(std::move(sleeper)) {
  config_.validate();
  if (config_.kind != BackendKind::kHttpChatCompletion) {
    throw Error(ErrorCode::kConfig, "HttpChatBackend requires kind = http");
  }
  if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string HttpChatBackend::name() const { return "http:" + *config_.model_name; }

std::string encode_chat_request(const GenerationRequest& request, const std::string& model) {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", request.prompt}}});
  j["temperature"] = request.temperature;
  j["max_tokens"] = request.max_new_tokens;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string extract_chat_text(std::string_view response_body) {
  const auto j = nlohmann::json::parse(response_body.begin(), response_body.end(), nullptr, false);
  if (!j.is_discarded() && j.is_object()) {
    auto choices = j.find("choices");
    if (choices != j.end() && choices->is_array() && !choices->empty()) {
      const auto& first = (*choices)[0];
      if (auto msg = first.find("message"); msg != first.end() && msg->is_object()) {
        if (auto content = msg->find("content"); content != msg->end() && content->is_string()) {
          return content->get<std::string>();
        }
      }
      if (auto text = first.find("text"); text != first.end() && text->is_string()) {
        return text->get<std::string>();
      }
    }
  }
  throw Error(ErrorCode::kBackendUnavailable, "response carries no completion text");
}

GenerationResult HttpChatBackend::generate(const GenerationRequest& request) {
  request.validate();
  httplib::Headers headers;
  if (config_.api_key_env_var) {
    const char* key = std::getenv(config_.api_key_env_var->c_str());
    if (!key || !*key) {
      throw Error(ErrorCode::kAuthMissing, "API key environment variable is not set",
                  {{"env_var", *config_.api_key_env_var}});
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const ParsedUrl url = parse_url(*config_.endpoint_url);
  const std::string body = encode_chat_request(request, *config_.model_name);

  const auto started = std::chrono::steady_clock::now();
  std::string last_failure;
  for (int attempt = 0; attempt <= config_.retry_limit; ++attempt) {
    if (attempt > 0) {
      sleeper_(std::chrono::milliseconds(static_cast<std::int64_t>(config_.backoff_base_ms) << (attempt - 1)));
    }
    httplib::Client client(url.base);
    const auto timeout = std::chrono::milliseconds(config_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = client.Post(url.path, headers, body, "application/json");
    if (!res) {
      last_failure = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    const int status = res->status;
    if (status == 413 || (status == 400 && mentions_context_length(res->body))) {
      throw Error(ErrorCode::kPromptTooLong, "backend rejected the prompt as too long",
                  {{"status", std::to_string(status)}});
    }
    if (status == 429 || status >= 500) {
      last_failure = "HTTP " + std::to_string(status);
      continue;
    }
    if (status < 200 || status >= 300) {
      throw Error(ErrorCode::kBackendUnavailable, "backend rejected the request",
                  {{"status", std::to_string(status)}, {"body", res->body.substr(0, 200)}});
    }
    try {
      std::string text = extract_chat_text(res->body);
      const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
          std::chrono::steady_clock::now() - started);
      return GenerationResult{std::move(text), name(), elapsed.count(), attempt + 1};
    } catch (const Error& e) {
      last_failure = e.what();
    }
  }
  throw Error(ErrorCode::kBackendUnavailable, "retries exhausted",
              {{"attempts", std::to_string(config_.retry_limit + 1)}, {"last_failure", last_failure}});
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
  config.validate();
  if (config.kind == BackendKind::kMock) {
    return std::make_unique<MockBackend>(config.mock_seed, config.mock_corrupt_fraction);
  }
  return std::make_unique<HttpChatBackend>(config);
}

GenerationResult generate(const GenerationRequest& request, const BackendConfig& config) {
  return make_backend(config)->generate(request);
}

std::vector<BatchItem> generate_batch(const std::vector<GenerationRequest>& requests, Backend& backend,
                                      std::size_t max_in_flight) {
  if (requests.empty()) throw Error(ErrorCode::kInvalidArgument, "empty generation batch");
  if (max_in_flight == 0) throw Error(ErrorCode::kInvalidArgument, "max_in_flight must be >= 1");
  std::vector<BatchItem> items(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < requests.size(); i = next++) {
      try {
        items[i].result = backend.generate(requests[i]);
      } catch (const Error& e) {
        items[i].error = e;
      } catch (const std::exception& e) {
        items[i].error = Error(ErrorCode::kInternal, e.what());
      }
    }
  };
  const std::size_t n_workers = std::min(max_in_flight, requests.size());
  if (n_workers == 1) {
    worker();
    return items;
  }
  std::vector<std::thread> threads;
  threads.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  return items;
}

std::vector<BatchItem> generate_batch(const std::vector<GenerationRequest>& requests,
                                      const BackendConfig& config) {
  auto backend = make_backend(config);
  return generate_batch(requests, *backend, static_cast<std::size_t>(config.max_in_flight));
}

}  // namespace instructav
