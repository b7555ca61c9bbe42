#include "instructav/consistency.hpp"

#include <algorithm>
#include <cctype>

#include "instructav/error.hpp"
#include "json.hpp"

namespace instructav {

namespace {

constexpr std::string_view kAnswerLead = "the correct answer is";

std::string fold(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

struct AnswerHit {
  ClassificationLabel label;
  std::size_t lead_offset;  // start of "the correct answer is"
  std::size_t end;          // just past the answer word
};

// `folded` is the lower-cased text.
std::optional<AnswerHit> find_answer(const std::string& folded, std::size_t from = 0) {
  std::size_t pos = folded.find(kAnswerLead, from);
  while (pos != std::string::npos) {
    std::size_t i = pos + kAnswerLead.size();
    while (i < folded.size() &&
           (std::isspace(static_cast<unsigned char>(folded[i])) || folded[i] == '"' ||
            folded[i] == '\'' || folded[i] == '*' || folded[i] == '`' || folded[i] == ':')) {
      ++i;
    }
    for (auto [word, label] : {std::pair{std::string_view("yes"), ClassificationLabel::kSameAuthor},
                               std::pair{std::string_view("no"), ClassificationLabel::kDifferentAuthor}}) {
      const std::size_t end = i + word.size();
      if (folded.compare(i, word.size(), word) == 0 && (end == folded.size() || !is_alnum(folded[end]))) {
        return AnswerHit{label, pos, end};
      }
    }
    pos = folded.find(kAnswerLead, pos + 1);
  }
  return std::nullopt;
}

std::vector<PhraseMatch> find_all(const std::string& haystack, const std::vector<std::string>& phrases,
                                  bool case_sensitive, std::size_t base_offset) {
  std::vector<PhraseMatch> out;
  for (const auto& phrase : phrases) {
    const std::string needle = case_sensitive ? phrase : fold(phrase);
    for (std::size_t p = haystack.find(needle); p != std::string::npos;
         p = haystack.find(needle, p + 1)) {
      out.push_back({phrase, base_offset + p});
    }
  }
  return out;
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?' || c == '\n'; }

// Byte offset where the final sentence begins.
std::size_t last_sentence_start(std::string_view text) {
  std::size_t end = text.size();
  while (end > 0 && (is_terminator(text[end - 1]) ||
                     std::isspace(static_cast<unsigned char>(text[end - 1])))) {
    --end;
  }
  std::size_t start = end;
  while (start > 0 && !is_terminator(text[start - 1])) --start;
  return start;
}

}  // namespace

std::string_view reason_name(VerificationReason reason) {
  switch (reason) {
    case VerificationReason::kOk: return "Ok";
    case VerificationReason::kAnswerMismatch: return "AnswerMismatch";
    case VerificationReason::kMissingConsistentPhrase: return "MissingConsistentPhrase";
    case VerificationReason::kConflictingPhrasePresent: return "ConflictingPhrasePresent";
    case VerificationReason::kUnparseable: return "Unparseable";
  }
  return "Unparseable";
}

void PhrasePolicy::validate() const {
  if (same_phrases.empty() || different_phrases.empty()) {
    throw Error(ErrorCode::kConfig, "phrase policy needs at least one phrase per label");
  }
  for (const auto* list : {&same_phrases, &different_phrases}) {
    for (const auto& p : *list) {
      if (p.empty()) throw Error(ErrorCode::kConfig, "phrase policy contains an empty phrase");
    }
  }
  for (const auto& s : same_phrases) {
    for (const auto& d : different_phrases) {
      if (case_sensitive ? s == d : fold(s) == fold(d)) {
        throw Error(ErrorCode::kConfig, "phrase appears in both lists", {{"phrase", s}});
      }
    }
  }
}

std::optional<ClassificationLabel> parse_answer(std::string_view text) {
  const auto hit = find_answer(fold(text));
  if (!hit) return std::nullopt;
  return hit->label;
}

std::size_t leading_answer_end(std::string_view text) {
  std::size_t start = 0;
  while (start < text.size() && std::isspace(static_cast<unsigned char>(text[start]))) ++start;
  const std::string folded = fold(text);
  const auto hit = find_answer(folded, start);
  if (!hit || hit->lead_offset != start) return 0;
  std::size_t end = hit->end;
  while (end < text.size() && std::ispunct(static_cast<unsigned char>(text[end]))) ++end;
  return end;
}

std::string strip_leading_answer(std::string_view text) {
  std::size_t pos = leading_answer_end(text);
  while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) ++pos;
  return std::string(text.substr(pos));
}

VerificationResult verify_alignment(std::string_view generated_text, ClassificationLabel label,
                                    const PhrasePolicy& policy) {
  policy.validate();
  const std::string haystack = policy.case_sensitive ? std::string(generated_text) : fold(generated_text);
  const bool same = label == ClassificationLabel::kSameAuthor;
  const auto& consistent = same ? policy.same_phrases : policy.different_phrases;
  const auto& inconsistent = same ? policy.different_phrases : policy.same_phrases;

  VerificationResult result;
  auto consistent_hits = find_all(haystack, consistent, policy.case_sensitive, 0);
  const std::size_t conflict_from = policy.conclusion_only ? last_sentence_start(haystack) : 0;
  auto conflict_hits = find_all(haystack.substr(conflict_from), inconsistent, policy.case_sensitive,
                                conflict_from);
  result.matched_phrases = consistent_hits;
  result.matched_phrases.insert(result.matched_phrases.end(), conflict_hits.begin(), conflict_hits.end());
  std::sort(result.matched_phrases.begin(), result.matched_phrases.end(),
            [](const PhraseMatch& a, const PhraseMatch& b) {
              return a.offset != b.offset ? a.offset < b.offset : a.phrase < b.phrase;
            });

  const auto answer = find_answer(fold(generated_text));
  if (answer && answer->label != label) {
    result.reason = VerificationReason::kAnswerMismatch;
  } else if (consistent_hits.empty()) {
    result.reason = answer ? VerificationReason::kMissingConsistentPhrase : VerificationReason::kUnparseable;
  } else if (!conflict_hits.empty()) {
    result.reason = VerificationReason::kConflictingPhrasePresent;
  } else {
    result.reason = VerificationReason::kOk;
  }
  result.passed = result.reason == VerificationReason::kOk;
  return result;
}

FilterOutcome filter_verified(const std::vector<VerificationInput>& samples, const PhrasePolicy& policy) {
  if (samples.empty()) throw Error(ErrorCode::kInvalidArgument, "nothing to verify");
  FilterOutcome out;
  for (const auto& s : samples) {
    VerifiedSample v{s, verify_alignment(s.generated_text, s.label, policy)};
    (v.result.passed ? out.kept : out.dropped).push_back(std::move(v));
  }
  out.drop_rate = static_cast<double>(out.dropped.size()) / static_cast<double>(samples.size());
  return out;
}

std::string encode_dropped(const VerifiedSample& sample) {
  nlohmann::ordered_json j;
  j["id"] = sample.input.pair.id;
  j["label"] = label_to_wire(sample.input.label);
  j["reason"] = reason_name(sample.result.reason);
  j["output_text"] = sample.input.generated_text;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace instructav
