#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "instructav/core.hpp"

namespace instructav {

using TokenSequence = std::vector<std::string>;

// ASCII case-fold, then split on maximal runs of non-alphanumeric bytes.
// Bytes >= 0x80 count as alphanumeric so non-ASCII words survive intact.
TokenSequence tokenize(std::string_view text);

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// 2pr/(p+r), or 0 when p+r = 0.
double harmonic_f1(double precision, double recall);

// Clipped n-gram overlap. Precision is over candidate n-grams, recall over
// reference n-grams; an empty n-gram set gives zeros.
RougeScore rouge_n(const TokenSequence& candidate, const TokenSequence& reference, std::size_t n);

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b);
RougeScore rouge_l(const TokenSequence& candidate, const TokenSequence& reference);

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::size_t dimension() const = 0;
  virtual std::string name() const = 0;
  // Must return the same vector for the same token on every call.
  virtual std::vector<double> embed(std::string_view token) const = 0;
};

// Deterministic toy provider: each component is a hash of (seed, token,
// index) mapped to [0, 1). Non-negative components keep cosines in [0, 1].
class HashEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(std::size_t dimension = 64, std::uint64_t seed = 0);
  std::size_t dimension() const override { return dimension_; }
  std::string name() const override { return "hash-" + std::to_string(dimension_); }
  std::vector<double> embed(std::string_view token) const override;

 private:
  std::size_t dimension_;
  std::uint64_t seed_;
};

// Word-vector table ("token v1 v2 ... vd" per line, GloVe text layout).
// Unknown tokens embed to the zero vector.
class TableEmbeddingProvider : public EmbeddingProvider {
 public:
  TableEmbeddingProvider(std::string name, std::unordered_map<std::string, std::vector<double>> table);
  static TableEmbeddingProvider load(const std::string& path);

  std::size_t dimension() const override { return dimension_; }
  std::string name() const override { return name_; }
  std::vector<double> embed(std::string_view token) const override;

 private:
  std::string name_;
  std::size_t dimension_ = 0;
  std::unordered_map<std::string, std::vector<double>> table_;
};

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

// Greedy matching: recall averages, over reference tokens, the best cosine
// against any candidate token; precision is the mirror image. Identical
// tokens score exactly 1. No idf weighting, no baseline rescaling.
// Throws Error(kEmptySequence) when either side is empty.
RougeScore embed_match_f1(const TokenSequence& candidate, const TokenSequence& reference,
                          const EmbeddingProvider& provider);

// A prediction is correct when parse_answer finds the gold label; an
// unparseable output is wrong. Returns correct / |predictions|.
// Throws Error(kUnknownId) or Error(kDuplicateId).
double accuracy(const std::vector<PredictionRecord>& predictions, const std::vector<InstructionSample>& gold);

struct ScoredSample {
  std::string id;
  double human_mean = 0.0;
  bool correct = false;
};

struct QuartileAccuracy {
  double top_accuracy = 0.0;
  double bottom_accuracy = 0.0;
  std::vector<std::string> top_ids;
  std::vector<std::string> bottom_ids;
};

// Ranks by human_mean descending (ties by ascending id) and scores the first
// and last ceil(fraction * N) samples.
QuartileAccuracy quartile_accuracy(const std::vector<ScoredSample>& samples, double fraction = 0.25);

struct SampleScore {
  std::string id;
  bool correct = false;
  std::optional<ClassificationLabel> parsed;
  // Explanation metrics; absent when the sample has no explanation label.
  std::optional<double> rouge1_f1;
  std::optional<double> rouge2_f1;
  std::optional<double> rougel_f1;
  std::optional<double> embed_f1;
};

struct ScoreReport {
  std::vector<SampleScore> samples;
  std::size_t n = 0;
  std::size_t n_explained = 0;
  double accuracy = 0.0;
  double rouge1_f1 = 0.0;
  double rouge2_f1 = 0.0;
  double rougel_f1 = 0.0;
  double embed_f1 = 0.0;
  std::string embedding_provider;

  std::string to_json() const;
  // Aligned columns: Accuracy ROUGE-1 ROUGE-2 ROUGE-L EmbedMatch
  std::string to_table() const;
};

struct ReportOptions {
  // Strip the leading "The correct answer is ..." sentence from both sides
  // before explanation metrics.
  bool strip_answer = true;
};

// Predictions and gold must cover the same ids (Error(kMissingPrediction) /
// Error(kUnknownId) otherwise). Samples are reported in gold order.
ScoreReport aggregate_report(const std::vector<PredictionRecord>& predictions,
                             const std::vector<InstructionSample>& gold,
                             const std::map<std::string, std::string>& explanation_labels,
                             const EmbeddingProvider& provider, const ReportOptions& options = {});

}  // namespace instructav
