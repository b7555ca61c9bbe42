#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <tuple>
#include <vector>

namespace instructav::humaneval {

inline constexpr int kLikertMin = 1;
inline constexpr int kLikertMax = 5;
// Features an explanation can cover: eleven for explanation-trained systems,
// seven for the prompting baseline.
inline constexpr int kFullCoverage = 11;
inline constexpr int kBaselineCoverage = 7;
inline constexpr std::size_t kDefaultSessionSize = 100;

struct RubricConfig {
  int coverage_max = kFullCoverage;
  // Per-system override of coverage_max.
  std::map<std::string, int> coverage_by_system;

  int coverage_max_for(const std::string& system) const;
  void validate() const;
};

struct Rating {
  std::string sample_id;
  std::string evaluator_id;
  std::string system_name;
  int coverage = 0;
  int relevance = kLikertMin;
  int reasonableness = kLikertMin;
  int persuasiveness = kLikertMin;
  std::string timestamp;  // ISO-8601, informational

  bool operator==(const Rating&) const = default;
};

std::string encode_rating(const Rating& rating);
Rating decode_rating(const std::string& line, std::size_t line_no);

struct CriterionMeans {
  double coverage = 0.0;
  double relevance = 0.0;
  double reasonableness = 0.0;
  double persuasiveness = 0.0;
};

struct SystemSummary {
  std::string system_name;
  CriterionMeans means;
  std::size_t n_ratings = 0;
  std::size_t n_samples = 0;
  std::size_t n_evaluators = 0;
};

struct RubricSummary {
  std::vector<SystemSummary> systems;  // ordered by system name
  std::size_t n_samples = 0;
  std::size_t n_evaluators = 0;

  std::string to_json() const;
  // Columns: System, Coverage, Relevance, Reasonableness, Persuasiveness
  std::string to_table() const;
};

struct SampleMean {
  std::string id;
  double human_mean = 0.0;
};

// Single-writer collection of ratings keyed by (sample, evaluator, system).
class Session {
 public:
  explicit Session(RubricConfig config = {});

  // Throws Error(kOutOfRange) naming the criterion, or Error(kDuplicateRating).
  void record(Rating rating);
  bool contains(const std::string& sample_id, const std::string& evaluator_id,
                const std::string& system_name) const;

  const std::vector<Rating>& ratings() const noexcept { return ratings_; }
  const RubricConfig& config() const noexcept { return config_; }
  std::size_t size() const noexcept { return ratings_.size(); }

  // Replays an append-only ratings file through record().
  static Session load(const std::string& path, RubricConfig config = {});

 private:
  RubricConfig config_;
  std::vector<Rating> ratings_;
  std::map<std::tuple<std::string, std::string, std::string>, std::size_t> index_;
};

// Arithmetic mean per criterion per system. Throws on an empty session.
RubricSummary summarize(const Session& session);

// 1 + 4 * coverage / coverage_max, mapping coverage onto the Likert range.
double rescale_coverage(int coverage, int coverage_max);

// Per sample: mean over evaluators of the mean of the four criteria, coverage
// rescaled first. An empty `system_name` takes every rating. Sorted by id.
std::vector<SampleMean> normalized_sample_scores(const Session& session, int coverage_max,
                                                 const std::string& system_name = {});

}  // namespace instructav::humaneval
