#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace instructav {

enum class ClassificationLabel { kSameAuthor, kDifferentAuthor };

// "yes" / "no", the wire form used in JSONL records.
std::string_view label_to_wire(ClassificationLabel label);
std::optional<ClassificationLabel> label_from_wire(std::string_view s);

// "The correct answer is yes." / "The correct answer is no."
std::string label_to_answer_phrase(ClassificationLabel label);

enum class DatasetSetting { kClassificationOnly, kClassificationAndExplanation };

// "cls" / "cls-expl"
std::string_view setting_to_wire(DatasetSetting setting);
std::optional<DatasetSetting> setting_from_wire(std::string_view s);

// The eleven style dimensions an explanation is asked to cover, in checklist order.
enum class LinguisticFeature {
  kWritingStyle,
  kExpressionsIdioms,
  kToneMood,
  kSentenceStructureSyntax,
  kPunctuationStyle,
  kSpecialCharactersCapitalization,
  kCompoundSeparateSpelling,
  kAcronymsAbbreviations,
  kCharactersStyle,
  kDiatopicVariationsForeignLanguages,
  kOtherRelevantAspects,
};

inline constexpr std::array<LinguisticFeature, 11> kAllLinguisticFeatures = {
    LinguisticFeature::kWritingStyle,
    LinguisticFeature::kExpressionsIdioms,
    LinguisticFeature::kToneMood,
    LinguisticFeature::kSentenceStructureSyntax,
    LinguisticFeature::kPunctuationStyle,
    LinguisticFeature::kSpecialCharactersCapitalization,
    LinguisticFeature::kCompoundSeparateSpelling,
    LinguisticFeature::kAcronymsAbbreviations,
    LinguisticFeature::kCharactersStyle,
    LinguisticFeature::kDiatopicVariationsForeignLanguages,
    LinguisticFeature::kOtherRelevantAspects,
};

// Wording used in the explanation-prompt checklist, e.g. "tone and mood."
std::string_view feature_checklist_text(LinguisticFeature f);
// Heading used in explanations, e.g. "Tone and Mood".
std::string_view feature_heading(LinguisticFeature f);

struct SourceDataset {
  enum class Kind { kImdb, kTwitter, kYelp, kSynthetic, kOther };
  Kind kind = Kind::kOther;
  std::string other_name;

  static SourceDataset parse(std::string_view s);
  std::string name() const;
  bool operator==(const SourceDataset&) const = default;
};

struct AuthorText {
  std::string author_id;
  std::string text;
  SourceDataset source;

  // author_id non-empty, text non-blank. Throws Error(kInvalidArgument).
  void validate() const;
  bool operator==(const AuthorText&) const = default;
};

struct AVPair {
  std::string id;
  std::string text1;
  std::string text2;
  ClassificationLabel label = ClassificationLabel::kSameAuthor;

  void validate() const;
  bool operator==(const AVPair&) const = default;
};

struct InstructionSample {
  std::string id;
  std::string instruction;
  std::string text1;
  std::string text2;
  ClassificationLabel label = ClassificationLabel::kSameAuthor;
  std::optional<std::string> explanation;
  DatasetSetting setting = DatasetSetting::kClassificationOnly;

  void validate() const;
  bool operator==(const InstructionSample&) const = default;
};

// Supervised target for a sample: the answer phrase, followed by the
// explanation in the explanation setting.
std::string training_target(const InstructionSample& sample);

struct PredictionRecord {
  std::string id;
  std::string output_text;
  bool operator==(const PredictionRecord&) const = default;
};

// "{dataset}-{index}"
std::string make_sample_id(std::string_view dataset, std::size_t index);

// Whitespace-token count.
std::size_t count_words(std::string_view text);

bool is_blank(std::string_view text);

}  // namespace instructav
