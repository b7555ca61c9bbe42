#include "instructav/error.hpp"

#include "json.hpp"

namespace instructav {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kUsage: return "UsageError";
    case ErrorCode::kCorpusNotFound: return "CorpusNotFound";
    case ErrorCode::kIo: return "IoError";
    case ErrorCode::kMalformedLine: return "MalformedLine";
    case ErrorCode::kInsufficientCorpus: return "InsufficientCorpus";
    case ErrorCode::kInsufficientVerified: return "InsufficientVerified";
    case ErrorCode::kTemplate: return "TemplateError";
    case ErrorCode::kBackendUnavailable: return "BackendUnavailable";
    case ErrorCode::kAuthMissing: return "AuthMissing";
    case ErrorCode::kPromptTooLong: return "PromptTooLong";
    case ErrorCode::kUnknownId: return "UnknownId";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kMissingPrediction: return "MissingPrediction";
    case ErrorCode::kEmptySequence: return "EmptySequence";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kDuplicateRating: return "DuplicateRating";
    case ErrorCode::kTrainingDiverged: return "TrainingDiverged";
    case ErrorCode::kInternal: return "InternalError";
  }
  return "InternalError";
}

bool is_usage_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kConfig:
    case ErrorCode::kUsage:
    case ErrorCode::kCorpusNotFound:
    case ErrorCode::kTemplate:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorCode code, std::string message, Context context)
    : std::runtime_error(std::move(message)), code_(code), context_(std::move(context)) {}

std::string Error::to_json() const {
  nlohmann::ordered_json j;
  j["code"] = error_code_name(code_);
  j["message"] = what();
  j["context"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : context_) j["context"][k] = v;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace instructav
