#include "instructav/core.hpp"

#include <algorithm>
#include <cctype>

#include "instructav/error.hpp"

namespace instructav {

namespace {

std::string ascii_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

std::string_view label_to_wire(ClassificationLabel label) {
  return label == ClassificationLabel::kSameAuthor ? "yes" : "no";
}

std::optional<ClassificationLabel> label_from_wire(std::string_view s) {
  const std::string v = ascii_lower(s);
  if (v == "yes" || v == "same" || v == "1") return ClassificationLabel::kSameAuthor;
  if (v == "no" || v == "different" || v == "0") return ClassificationLabel::kDifferentAuthor;
  return std::nullopt;
}

std::string label_to_answer_phrase(ClassificationLabel label) {
  return std::string("The correct answer is ") + std::string(label_to_wire(label)) + ".";
}

std::string_view setting_to_wire(DatasetSetting setting) {
  return setting == DatasetSetting::kClassificationOnly ? "cls" : "cls-expl";
}

std::optional<DatasetSetting> setting_from_wire(std::string_view s) {
  if (s == "cls") return DatasetSetting::kClassificationOnly;
  if (s == "cls-expl") return DatasetSetting::kClassificationAndExplanation;
  return std::nullopt;
}

std::string_view feature_checklist_text(LinguisticFeature f) {
  switch (f) {
    case LinguisticFeature::kWritingStyle: return "writing style.";
    case LinguisticFeature::kExpressionsIdioms: return "expressions and Idioms.";
    case LinguisticFeature::kToneMood: return "tone and mood.";
    case LinguisticFeature::kSentenceStructureSyntax: return "sentence structure and syntax.";
    case LinguisticFeature::kPunctuationStyle: return "punctuation style.";
    case LinguisticFeature::kSpecialCharactersCapitalization:
      return "special characters style, capitalization style.";
    case LinguisticFeature::kCompoundSeparateSpelling: return "compound and separate spelling.";
    case LinguisticFeature::kAcronymsAbbreviations: return "acronyms and abbreviations.";
    case LinguisticFeature::kCharactersStyle: return "characters style.";
    case LinguisticFeature::kDiatopicVariationsForeignLanguages:
      return "Diatopic variations and foreign languages.";
    case LinguisticFeature::kOtherRelevantAspects: return "any other relevant aspect.";
  }
  return "";
}

std::string_view feature_heading(LinguisticFeature f) {
  switch (f) {
    case LinguisticFeature::kWritingStyle: return "Writing Style";
    case LinguisticFeature::kExpressionsIdioms: return "Expressions and Idioms";
    case LinguisticFeature::kToneMood: return "Tone and Mood";
    case LinguisticFeature::kSentenceStructureSyntax: return "Sentence Structure and Syntax";
    case LinguisticFeature::kPunctuationStyle: return "Punctuation Style";
    case LinguisticFeature::kSpecialCharactersCapitalization:
      return "Special Characters Style, Capitalization Style";
    case LinguisticFeature::kCompoundSeparateSpelling: return "Compound and Separate Spelling";
    case LinguisticFeature::kAcronymsAbbreviations: return "Acronyms and Abbreviations";
    case LinguisticFeature::kCharactersStyle: return "Characters Style";
    case LinguisticFeature::kDiatopicVariationsForeignLanguages:
      return "Diatopic Variations and Foreign Languages";
    case LinguisticFeature::kOtherRelevantAspects: return "Other Relevant Aspects";
  }
  return "";
}

SourceDataset SourceDataset::parse(std::string_view s) {
  const std::string v = ascii_lower(s);
  if (v == "imdb" || v == "imdb62") return {Kind::kImdb, {}};
  if (v == "twitter") return {Kind::kTwitter, {}};
  if (v == "yelp") return {Kind::kYelp, {}};
  if (v == "synthetic") return {Kind::kSynthetic, {}};
  return {Kind::kOther, std::string(s)};
}

std::string SourceDataset::name() const {
  switch (kind) {
    case Kind::kImdb: return "imdb";
    case Kind::kTwitter: return "twitter";
    case Kind::kYelp: return "yelp";
    case Kind::kSynthetic: return "synthetic";
    case Kind::kOther: return other_name.empty() ? "other" : other_name;
  }
  return "other";
}

bool is_blank(std::string_view text) {
  return std::all_of(text.begin(), text.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

void AuthorText::validate() const {
  if (author_id.empty()) throw Error(ErrorCode::kInvalidArgument, "author_id is empty");
  if (is_blank(text)) {
    throw Error(ErrorCode::kInvalidArgument, "text is blank", {{"author_id", author_id}});
  }
}

void AVPair::validate() const {
  if (id.empty()) throw Error(ErrorCode::kInvalidArgument, "pair id is empty");
  if (is_blank(text1) || is_blank(text2)) {
    throw Error(ErrorCode::kInvalidArgument, "pair text is blank", {{"id", id}});
  }
}

void InstructionSample::validate() const {
  if (id.empty()) throw Error(ErrorCode::kInvalidArgument, "sample id is empty");
  if (setting == DatasetSetting::kClassificationAndExplanation &&
      (!explanation || is_blank(*explanation))) {
    throw Error(ErrorCode::kInvalidArgument,
                "explanation setting requires a non-empty explanation", {{"id", id}});
  }
}

std::string training_target(const InstructionSample& sample) {
  std::string out = label_to_answer_phrase(sample.label);
  if (sample.setting == DatasetSetting::kClassificationAndExplanation && sample.explanation) {
    out += ' ';
    out += *sample.explanation;
  }
  return out;
}

std::string make_sample_id(std::string_view dataset, std::size_t index) {
  return std::string(dataset) + "-" + std::to_string(index);
}

std::size_t count_words(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    const bool space = std::isspace(c) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

}  // namespace instructav
