#include "instructav/humaneval.hpp"

#include <iomanip>
#include <set>
#include <sstream>

#include "instructav/error.hpp"
#include "instructav/jsonl.hpp"
#include "json.hpp"

namespace instructav::humaneval {

namespace {

void check_range(const char* criterion, int value, int lo, int hi) {
  if (value < lo || value > hi) {
    throw Error(ErrorCode::kOutOfRange, std::string(criterion) + " out of range",
                {{"criterion", criterion},
                 {"value", std::to_string(value)},
                 {"min", std::to_string(lo)},
                 {"max", std::to_string(hi)}});
  }
}

double criteria_mean(const Rating& r, int coverage_max) {
  return (rescale_coverage(r.coverage, coverage_max) + r.relevance + r.reasonableness + r.persuasiveness) / 4.0;
}

}  // namespace

int RubricConfig::coverage_max_for(const std::string& system) const {
  auto it = coverage_by_system.find(system);
  return it == coverage_by_system.end() ? coverage_max : it->second;
}

void RubricConfig::validate() const {
  if (coverage_max < 1) throw Error(ErrorCode::kConfig, "coverage_max must be positive");
  for (const auto& [system, max] : coverage_by_system) {
    if (max < 1) throw Error(ErrorCode::kConfig, "coverage_max must be positive", {{"system", system}});
  }
}

std::string encode_rating(const Rating& r) {
  nlohmann::ordered_json j;
  j["sample_id"] = r.sample_id;
  j["evaluator_id"] = r.evaluator_id;
  j["system_name"] = r.system_name;
  j["coverage"] = r.coverage;
  j["relevance"] = r.relevance;
  j["reasonableness"] = r.reasonableness;
  j["persuasiveness"] = r.persuasiveness;
  j["timestamp"] = r.timestamp;
  return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

Rating decode_rating(const std::string& line, std::size_t line_no) {
  const auto ctx = Error::Context{{"line", std::to_string(line_no)}};
  const auto j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::kMalformedLine, "invalid rating record", ctx);
  try {
    Rating r;
    r.sample_id = j.at("sample_id").get<std::string>();
    r.evaluator_id = j.at("evaluator_id").get<std::string>();
    r.system_name = j.at("system_name").get<std::string>();
    r.coverage = j.at("coverage").get<int>();
    r.relevance = j.at("relevance").get<int>();
    r.reasonableness = j.at("reasonableness").get<int>();
    r.persuasiveness = j.at("persuasiveness").get<int>();
    r.timestamp = j.value("timestamp", "");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kMalformedLine, std::string("invalid rating record: ") + e.what(), ctx);
  }
}

Session::Session(RubricConfig config) : config_(std::move(config)) { config_.validate(); }

bool Session::contains(const std::string& sample_id, const std::string& evaluator_id,
                       const std::string& system_name) const {
  return index_.count({sample_id, evaluator_id, system_name}) > 0;
}

void Session::record(Rating rating) {
  if (rating.sample_id.empty() || rating.evaluator_id.empty() || rating.system_name.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "rating needs sample, evaluator and system ids");
  }
  check_range("coverage", rating.coverage, 0, config_.coverage_max_for(rating.system_name));
  check_range("relevance", rating.relevance, kLikertMin, kLikertMax);
  check_range("reasonableness", rating.reasonableness, kLikertMin, kLikertMax);
  check_range("persuasiveness", rating.persuasiveness, kLikertMin, kLikertMax);
  auto key = std::make_tuple(rating.sample_id, rating.evaluator_id, rating.system_name);
  if (index_.count(key)) {
    throw Error(ErrorCode::kDuplicateRating, "rating already recorded",
                {{"sample_id", rating.sample_id},
                 {"evaluator_id", rating.evaluator_id},
                 {"system_name", rating.system_name}});
  }
  index_.emplace(std::move(key), ratings_.size());
  ratings_.push_back(std::move(rating));
}

Session Session::load(const std::string& path, RubricConfig config) {
  Session session(std::move(config));
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      session.record(decode_rating(lines[i], i + 1));
    } catch (Error& e) {
      auto ctx = e.context();
      ctx["path"] = path;
      ctx["line"] = std::to_string(i + 1);
      throw Error(e.code(), e.what(), ctx);
    }
  }
  return session;
}

RubricSummary summarize(const Session& session) {
  if (session.size() == 0) throw Error(ErrorCode::kInvalidArgument, "cannot summarize an empty session");
  struct Acc {
    CriterionMeans sum;
    std::size_t n = 0;
    std::set<std::string> samples;
    std::set<std::string> evaluators;
  };
  std::map<std::string, Acc> by_system;
  std::set<std::string> samples;
  std::set<std::string> evaluators;
  for (const auto& r : session.ratings()) {
    Acc& a = by_system[r.system_name];
    a.sum.coverage += r.coverage;
    a.sum.relevance += r.relevance;
    a.sum.reasonableness += r.reasonableness;
    a.sum.persuasiveness += r.persuasiveness;
    ++a.n;
    a.samples.insert(r.sample_id);
    a.evaluators.insert(r.evaluator_id);
    samples.insert(r.sample_id);
    evaluators.insert(r.evaluator_id);
  }
  RubricSummary out;
  out.n_samples = samples.size();
  out.n_evaluators = evaluators.size();
  for (const auto& [name, a] : by_system) {
    const double n = static_cast<double>(a.n);
    out.systems.push_back({name,
                           {a.sum.coverage / n, a.sum.relevance / n, a.sum.reasonableness / n,
                            a.sum.persuasiveness / n},
                           a.n,
                           a.samples.size(),
                           a.evaluators.size()});
  }
  return out;
}

std::string RubricSummary::to_json() const {
  nlohmann::ordered_json j;
  j["n_samples"] = n_samples;
  j["n_evaluators"] = n_evaluators;
  auto& systems_json = j["systems"] = nlohmann::ordered_json::array();
  for (const auto& s : systems) {
    nlohmann::ordered_json e;
    e["system_name"] = s.system_name;
    e["coverage"] = s.means.coverage;
    e["relevance"] = s.means.relevance;
    e["reasonableness"] = s.means.reasonableness;
    e["persuasiveness"] = s.means.persuasiveness;
    e["n_ratings"] = s.n_ratings;
    e["n_samples"] = s.n_samples;
    e["n_evaluators"] = s.n_evaluators;
    systems_json.push_back(std::move(e));
  }
  return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string RubricSummary::to_table() const {
  std::size_t width = 6;
  for (const auto& s : systems) width = std::max(width, s.system_name.size());
  width += 2;
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(width)) << "System" << std::setw(10) << "Coverage" << std::setw(11)
      << "Relevance" << std::setw(16) << "Reasonableness" << "Persuasiveness\n";
  out << std::fixed << std::setprecision(2);
  for (const auto& s : systems) {
    out << std::setw(static_cast<int>(width)) << s.system_name << std::setw(10) << s.means.coverage << std::setw(11)
        << s.means.relevance << std::setw(16) << s.means.reasonableness << s.means.persuasiveness << "\n";
  }
  return out.str();
}

double rescale_coverage(int coverage, int coverage_max) {
  if (coverage_max < 1) throw Error(ErrorCode::kInvalidArgument, "coverage_max must be positive");
  return 1.0 + 4.0 * static_cast<double>(coverage) / static_cast<double>(coverage_max);
}

std::vector<SampleMean> normalized_sample_scores(const Session& session, int coverage_max,
                                                 const std::string& system_name) {
  // sample -> evaluator -> (sum of per-rating criteria means, count)
  std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> acc;
  for (const auto& r : session.ratings()) {
    if (!system_name.empty() && r.system_name != system_name) continue;
    auto& cell = acc[r.sample_id][r.evaluator_id];
    cell.first += criteria_mean(r, coverage_max);
    ++cell.second;
  }
  std::vector<SampleMean> out;
  for (const auto& [sample, evaluators] : acc) {
    double sum = 0.0;
    for (const auto& [evaluator, cell] : evaluators) sum += cell.first / static_cast<double>(cell.second);
    out.push_back({sample, sum / static_cast<double>(evaluators.size())});
  }
  return out;
}

}  // namespace instructav::humaneval
