#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <string_view>

namespace instructav {

// Stable numeric values: these are the status codes returned through the C API.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kConfig = 2,
  kUsage = 3,
  kCorpusNotFound = 4,
  kIo = 5,
  kMalformedLine = 6,
  kInsufficientCorpus = 7,
  kInsufficientVerified = 8,
  kTemplate = 9,
  kBackendUnavailable = 10,
  kAuthMissing = 11,
  kPromptTooLong = 12,
  kUnknownId = 13,
  kDuplicateId = 14,
  kMissingPrediction = 15,
  kEmptySequence = 16,
  kDimensionMismatch = 17,
  kOutOfRange = 18,
  kDuplicateRating = 19,
  kTrainingDiverged = 20,
  kInternal = 99,
};

std::string_view error_code_name(ErrorCode code);

// Usage and configuration problems (exit code 2) versus runtime failures (1).
bool is_usage_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  using Context = std::map<std::string, std::string>;

  Error(ErrorCode code, std::string message, Context context = {});

  ErrorCode code() const noexcept { return code_; }
  const Context& context() const noexcept { return context_; }

  // {"code": "...", "message": "...", "context": {...}}
  std::string to_json() const;

 private:
  ErrorCode code_;
  Context context_;
};

}  // namespace instructav
