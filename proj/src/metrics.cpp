#include "instructav/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "instructav/consistency.hpp"
#include "instructav/error.hpp"
#include "instructav/genclient.hpp"
#include "instructav/jsonl.hpp"
#include "json.hpp"

namespace instructav {

namespace {

bool token_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c); }

std::map<std::vector<std::string>, std::size_t> ngram_counts(const TokenSequence& seq, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  if (seq.size() < n) return counts;
  for (std::size_t i = 0; i + n <= seq.size(); ++i) {
    ++counts[std::vector<std::string>(seq.begin() + static_cast<std::ptrdiff_t>(i),
                                      seq.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

RougeScore make_score(double overlap, std::size_t cand_total, std::size_t ref_total) {
  RougeScore s;
  if (cand_total == 0 || ref_total == 0) return s;
  s.precision = overlap / static_cast<double>(cand_total);
  s.recall = overlap / static_cast<double>(ref_total);
  s.f1 = harmonic_f1(s.precision, s.recall);
  return s;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double sum = 0.0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

}  // namespace

TokenSequence tokenize(std::string_view text) {
  TokenSequence out;
  std::string current;
  for (unsigned char c : text) {
    if (token_byte(c)) {
      current += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

double harmonic_f1(double precision, double recall) {
  const double sum = precision + recall;
  return sum == 0.0 ? 0.0 : 2.0 * precision * recall / sum;
}

RougeScore rouge_n(const TokenSequence& candidate, const TokenSequence& reference, std::size_t n) {
  if (n == 0) throw Error(ErrorCode::kInvalidArgument, "ROUGE-N needs n >= 1");
  const auto cand = ngram_counts(candidate, n);
  const auto ref = ngram_counts(reference, n);
  std::size_t overlap = 0;
  for (const auto& [gram, count] : cand) {
    if (auto it = ref.find(gram); it != ref.end()) overlap += std::min(count, it->second);
  }
  const std::size_t cand_total = candidate.size() >= n ? candidate.size() - n + 1 : 0;
  const std::size_t ref_total = reference.size() >= n ? reference.size() - n + 1 : 0;
  return make_score(static_cast<double>(overlap), cand_total, ref_total);
}

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0);
  std::vector<std::size_t> cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeScore rouge_l(const TokenSequence& candidate, const TokenSequence& reference) {
  return make_score(static_cast<double>(lcs_length(candidate, reference)), candidate.size(), reference.size());
}

HashEmbeddingProvider::HashEmbeddingProvider(std::size_t dimension, std::uint64_t seed)
    : dimension_(dimension), seed_(seed) {
  if (dimension == 0) throw Error(ErrorCode::kInvalidArgument, "embedding dimension must be >= 1");
}

std::vector<double> HashEmbeddingProvider::embed(std::string_view token) const {
  std::vector<double> v(dimension_);
  const std::uint64_t base = fnv1a64(token, seed_);
  for (std::size_t i = 0; i < dimension_; ++i) {
    // splitmix64 finalizer over (token hash, component index)
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (i + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    v[i] = static_cast<double>(z >> 11) * 0x1.0p-53;
  }
  return v;
}

TableEmbeddingProvider::TableEmbeddingProvider(std::string name,
                                               std::unordered_map<std::string, std::vector<double>> table)
    : name_(std::move(name)), table_(std::move(table)) {
  if (table_.empty()) throw Error(ErrorCode::kInvalidArgument, "embedding table is empty");
  dimension_ = table_.begin()->second.size();
  for (const auto& [token, vec] : table_) {
    if (vec.size() != dimension_ || dimension_ == 0) {
      throw Error(ErrorCode::kDimensionMismatch, "embedding table rows differ in dimension", {{"token", token}});
    }
  }
}

TableEmbeddingProvider TableEmbeddingProvider::load(const std::string& path) {
  std::unordered_map<std::string, std::vector<double>> table;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::istringstream in(lines[i]);
    std::string token;
    if (!(in >> token)) continue;
    std::vector<double> v;
    for (double x; in >> x;) v.push_back(x);
    if (!in.eof() || v.empty()) {
      throw Error(ErrorCode::kMalformedLine, "bad embedding row", {{"path", path}, {"line", std::to_string(i + 1)}});
    }
    table.emplace(std::move(token), std::move(v));
  }
  return TableEmbeddingProvider(path, std::move(table));
}

std::vector<double> TableEmbeddingProvider::embed(std::string_view token) const {
  auto it = table_.find(std::string(token));
  return it == table_.end() ? std::vector<double>(dimension_, 0.0) : it->second;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error(ErrorCode::kDimensionMismatch, "embedding dimensions differ");
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

RougeScore embed_match_f1(const TokenSequence& candidate, const TokenSequence& reference,
                          const EmbeddingProvider& provider) {
  if (candidate.empty() || reference.empty()) {
    throw Error(ErrorCode::kEmptySequence, "greedy matching needs non-empty sequences");
  }
  if (provider.dimension() == 0) throw Error(ErrorCode::kInvalidArgument, "provider dimension must be >= 1");
  std::vector<std::vector<double>> cand_vecs;
  std::vector<std::vector<double>> ref_vecs;
  for (const auto& t : candidate) cand_vecs.push_back(provider.embed(t));
  for (const auto& t : reference) ref_vecs.push_back(provider.embed(t));

  std::vector<std::vector<double>> sim(reference.size(), std::vector<double>(candidate.size()));
  for (std::size_t r = 0; r < reference.size(); ++r) {
    for (std::size_t c = 0; c < candidate.size(); ++c) {
      const bool nonzero = std::any_of(ref_vecs[r].begin(), ref_vecs[r].end(), [](double x) { return x != 0.0; });
      sim[r][c] = (reference[r] == candidate[c] && nonzero) ? 1.0 : cosine_similarity(ref_vecs[r], cand_vecs[c]);
    }
  }
  std::vector<double> best_for_ref(reference.size());
  std::vector<double> best_for_cand(candidate.size(), -1.0);
  for (std::size_t r = 0; r < reference.size(); ++r) {
    best_for_ref[r] = *std::max_element(sim[r].begin(), sim[r].end());
    for (std::size_t c = 0; c < candidate.size(); ++c) best_for_cand[c] = std::max(best_for_cand[c], sim[r][c]);
  }
  RougeScore s;
  s.recall = mean(best_for_ref);
  s.precision = mean(best_for_cand);
  s.f1 = harmonic_f1(s.precision, s.recall);
  return s;
}

double accuracy(const std::vector<PredictionRecord>& predictions, const std::vector<InstructionSample>& gold) {
  std::map<std::string, ClassificationLabel> labels;
  for (const auto& g : gold) {
    if (!labels.emplace(g.id, g.label).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate gold id", {{"id", g.id}});
    }
  }
  std::set<std::string> seen;
  std::size_t correct = 0;
  for (const auto& p : predictions) {
    auto it = labels.find(p.id);
    if (it == labels.end()) throw Error(ErrorCode::kUnknownId, "prediction id not in gold", {{"id", p.id}});
    if (!seen.insert(p.id).second) throw Error(ErrorCode::kDuplicateId, "duplicate prediction id", {{"id", p.id}});
    const auto parsed = parse_answer(p.output_text);
    if (parsed && *parsed == it->second) ++correct;
  }
  if (predictions.empty()) return 0.0;
  return static_cast<double>(correct) / static_cast<double>(predictions.size());
}

QuartileAccuracy quartile_accuracy(const std::vector<ScoredSample>& samples, double fraction) {
  if (!(fraction > 0.0 && fraction <= 0.5)) {
    throw Error(ErrorCode::kInvalidArgument, "fraction must lie in (0, 0.5]");
  }
  if (samples.size() < 2) throw Error(ErrorCode::kInvalidArgument, "need at least two scored samples");
  std::vector<const ScoredSample*> ranked;
  for (const auto& s : samples) ranked.push_back(&s);
  std::sort(ranked.begin(), ranked.end(), [](const ScoredSample* a, const ScoredSample* b) {
    return a->human_mean != b->human_mean ? a->human_mean > b->human_mean : a->id < b->id;
  });
  // The epsilon keeps e.g. 0.1 * 30 from rounding up to 4.
  const double exact = fraction * static_cast<double>(samples.size());
  const auto k = static_cast<std::size_t>(std::ceil(exact - 1e-9));

  QuartileAccuracy out;
  std::size_t top_correct = 0;
  std::size_t bottom_correct = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const ScoredSample* top = ranked[i];
    const ScoredSample* bottom = ranked[ranked.size() - k + i];
    out.top_ids.push_back(top->id);
    out.bottom_ids.push_back(bottom->id);
    top_correct += top->correct;
    bottom_correct += bottom->correct;
  }
  out.top_accuracy = static_cast<double>(top_correct) / static_cast<double>(k);
  out.bottom_accuracy = static_cast<double>(bottom_correct) / static_cast<double>(k);
  return out;
}

ScoreReport aggregate_report(const std::vector<PredictionRecord>& predictions,
                             const std::vector<InstructionSample>& gold,
                             const std::map<std::string, std::string>& explanation_labels,
                             const EmbeddingProvider& provider, const ReportOptions& options) {
  std::map<std::string, const PredictionRecord*> by_id;
  for (const auto& p : predictions) {
    if (!by_id.emplace(p.id, &p).second) throw Error(ErrorCode::kDuplicateId, "duplicate prediction id", {{"id", p.id}});
  }
  std::set<std::string> gold_ids;
  for (const auto& g : gold) {
    if (!gold_ids.insert(g.id).second) throw Error(ErrorCode::kDuplicateId, "duplicate gold id", {{"id", g.id}});
    if (!by_id.count(g.id)) throw Error(ErrorCode::kMissingPrediction, "no prediction for gold id", {{"id", g.id}});
  }
  for (const auto& p : predictions) {
    if (!gold_ids.count(p.id)) throw Error(ErrorCode::kUnknownId, "prediction id not in gold", {{"id", p.id}});
  }

  ScoreReport report;
  report.embedding_provider = provider.name();
  std::vector<double> acc, r1, r2, rl, em;
  for (const auto& g : gold) {
    const PredictionRecord& p = *by_id.at(g.id);
    SampleScore s;
    s.id = g.id;
    s.parsed = parse_answer(p.output_text);
    s.correct = s.parsed && *s.parsed == g.label;
    acc.push_back(s.correct ? 1.0 : 0.0);
    if (auto it = explanation_labels.find(g.id); it != explanation_labels.end()) {
      const std::string cand_text = options.strip_answer ? strip_leading_answer(p.output_text) : p.output_text;
      const std::string ref_text = options.strip_answer ? strip_leading_answer(it->second) : it->second;
      const TokenSequence cand = tokenize(cand_text);
      const TokenSequence ref = tokenize(ref_text);
      s.rouge1_f1 = rouge_n(cand, ref, 1).f1;
      s.rouge2_f1 = rouge_n(cand, ref, 2).f1;
      s.rougel_f1 = rouge_l(cand, ref).f1;
      // An output with no explanation body earns nothing rather than aborting the report.
      s.embed_f1 = (cand.empty() || ref.empty()) ? 0.0 : embed_match_f1(cand, ref, provider).f1;
      r1.push_back(*s.rouge1_f1);
      r2.push_back(*s.rouge2_f1);
      rl.push_back(*s.rougel_f1);
      em.push_back(*s.embed_f1);
    }
    report.samples.push_back(std::move(s));
  }
  report.n = gold.size();
  report.n_explained = r1.size();
  report.accuracy = mean(acc);
  report.rouge1_f1 = mean(r1);
  report.rouge2_f1 = mean(r2);
  report.rougel_f1 = mean(rl);
  report.embed_f1 = mean(em);
  return report;
}

std::string ScoreReport::to_json() const {
  nlohmann::ordered_json j;
  j["n"] = n;
  j["n_explained"] = n_explained;
  j["accuracy"] = accuracy;
  j["rouge1_f1"] = rouge1_f1;
  j["rouge2_f1"] = rouge2_f1;
  j["rougeL_f1"] = rougel_f1;
  j["embed_match_f1"] = embed_f1;
  j["embedding_provider"] = embedding_provider;
  auto& rows = j["samples"] = nlohmann::ordered_json::array();
  for (const auto& s : samples) {
    nlohmann::ordered_json r;
    r["id"] = s.id;
    r["correct"] = s.correct;
    r["parsed"] = s.parsed ? nlohmann::ordered_json(label_to_wire(*s.parsed)) : nlohmann::ordered_json(nullptr);
    auto opt = [](const std::optional<double>& v) {
      return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
    };
    r["rouge1_f1"] = opt(s.rouge1_f1);
    r["rouge2_f1"] = opt(s.rouge2_f1);
    r["rougeL_f1"] = opt(s.rougel_f1);
    r["embed_match_f1"] = opt(s.embed_f1);
    rows.push_back(std::move(r));
  }
  return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::string ScoreReport::to_table() const {
  std::ostringstream out;
  out << std::left << std::setw(10) << "Accuracy" << std::setw(10) << "ROUGE-1" << std::setw(10) << "ROUGE-2"
      << std::setw(10) << "ROUGE-L" << "EmbedMatch\n";
  out << std::fixed << std::setprecision(3) << std::setw(10) << accuracy << std::setw(10) << rouge1_f1
      << std::setw(10) << rouge2_f1 << std::setw(10) << rougel_f1 << embed_f1 << "\n";
  return out.str();
}

}  // namespace instructav
