#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "instructav/core.hpp"

namespace instructav {

enum class VerificationReason {
  kOk,
  kAnswerMismatch,
  kMissingConsistentPhrase,
  kConflictingPhrasePresent,
  kUnparseable,
};

std::string_view reason_name(VerificationReason reason);

struct PhraseMatch {
  std::string phrase;
  std::size_t offset = 0;
  bool operator==(const PhraseMatch&) const = default;
};

struct VerificationResult {
  bool passed = false;
  VerificationReason reason = VerificationReason::kUnparseable;
  // Every policy phrase occurrence in the text, ordered by offset.
  std::vector<PhraseMatch> matched_phrases;
  bool operator==(const VerificationResult&) const = default;
};

struct PhrasePolicy {
  std::vector<std::string> same_phrases{"written by the same author"};
  std::vector<std::string> different_phrases{"written by different authors"};
  bool case_sensitive = false;
  // Restricts the conflicting-phrase search to the last sentence of the text.
  bool conclusion_only = false;

  // Both lists non-empty, no empty phrase, no phrase in both lists.
  void validate() const;
};

// First "the correct answer is yes|no" (case-insensitive, whitespace and
// quoting tolerated before the answer word, any punctuation after it).
std::optional<ClassificationLabel> parse_answer(std::string_view text);

// Byte offset just past the leading answer sentence, or 0 when the text does
// not open with one.
std::size_t leading_answer_end(std::string_view text);

// Text with the leading answer sentence and following whitespace removed.
std::string strip_leading_answer(std::string_view text);

// Checks, in order: (a) a parseable answer agrees with `label`; (b) some
// label-consistent phrase occurs; (c) no label-inconsistent phrase occurs.
// Unparseable replaces MissingConsistentPhrase when no answer exists either.
VerificationResult verify_alignment(std::string_view generated_text, ClassificationLabel label,
                                    const PhrasePolicy& policy = {});

struct VerificationInput {
  AVPair pair;
  ClassificationLabel label = ClassificationLabel::kSameAuthor;
  std::string generated_text;
};

struct VerifiedSample {
  VerificationInput input;
  VerificationResult result;
};

struct FilterOutcome {
  std::vector<VerifiedSample> kept;
  std::vector<VerifiedSample> dropped;
  double drop_rate = 0.0;
};

// Partitions by verify_alignment, preserving input order in both lists.
FilterOutcome filter_verified(const std::vector<VerificationInput>& samples,
                              const PhrasePolicy& policy = {});

// Audit record: {"id","label","reason","output_text"}.
std::string encode_dropped(const VerifiedSample& sample);

}  // namespace instructav
