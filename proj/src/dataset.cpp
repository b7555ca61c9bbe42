#include "instructav/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <unordered_map>

#include "instructav/error.hpp"
#include "instructav/jsonl.hpp"
#include "json.hpp"
#include "rng.hpp"

namespace instructav {

namespace {

using detail::shuffle;
using detail::uniform_index;

std::vector<std::vector<std::string>> parse_csv(const std::string& content, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  std::size_t line = 1;
  for (std::size_t i = 0; i < content.size(); ++i) {
    const char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      field_started = false;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      field_started = false;
      if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
      row.clear();
      ++line;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) {
    throw Error(ErrorCode::kMalformedLine, "unterminated quoted CSV field",
                {{"path", path}, {"line", std::to_string(line)}});
  }
  if (field_started || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

Corpus load_csv(const std::string& path, const SourceDataset& source) {
  const auto rows = parse_csv(read_text_file(path), path);
  Corpus corpus;
  if (rows.empty()) return corpus;
  const auto& header = rows.front();
  auto column = [&](const char* name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw Error(ErrorCode::kMalformedLine, std::string("CSV header lacks column ") + name,
                  {{"path", path}, {"line", "1"}});
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t author_col = column("author_id");
  const std::size_t text_col = column("text");
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw Error(ErrorCode::kMalformedLine, "CSV row has the wrong number of fields",
                  {{"path", path}, {"record", std::to_string(r + 1)}});
    }
    corpus.entries.push_back({row[author_col], row[text_col], source});
  }
  return corpus;
}

Corpus load_jsonl_corpus(const std::string& path, const SourceDataset& source) {
  Corpus corpus;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto j = nlohmann::json::parse(lines[i], nullptr, false);
    const auto ctx = Error::Context{{"path", path}, {"line", std::to_string(i + 1)}};
    if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::kMalformedLine, "invalid JSON object", ctx);
    auto author = j.find("author_id");
    auto text = j.find("text");
    if (author == j.end() || text == j.end() || !text->is_string() ||
        !(author->is_string() || author->is_number_integer())) {
      throw Error(ErrorCode::kMalformedLine, "corpus record needs author_id and text", ctx);
    }
    corpus.entries.push_back(
        {author->is_string() ? author->get<std::string>() : author->dump(), text->get<std::string>(), source});
  }
  return corpus;
}

struct IndexPair {
  std::size_t a;
  std::size_t b;
  bool operator<(const IndexPair& o) const { return a != o.a ? a < o.a : b < o.b; }
};

IndexPair unordered(std::size_t x, std::size_t y) { return x < y ? IndexPair{x, y} : IndexPair{y, x}; }

}  // namespace

std::size_t Corpus::author_count() const {
  std::set<std::string> ids;
  for (const auto& e : entries) ids.insert(e.author_id);
  return ids.size();
}

void Corpus::validate() const {
  for (const auto& e : entries) e.validate();
  if (author_count() < 2) {
    throw Error(ErrorCode::kInsufficientCorpus, "corpus needs at least two distinct authors",
                {{"corpus", name}});
  }
}

Corpus load_corpus(const std::string& path, const SourceDataset& source, const std::string& name) {
  const std::filesystem::path p(path);
  if (!std::filesystem::exists(p)) {
    throw Error(ErrorCode::kCorpusNotFound, "corpus file not found", {{"path", path}});
  }
  const auto ext = p.extension().string();
  Corpus corpus = (ext == ".jsonl" || ext == ".json") ? load_jsonl_corpus(path, source) : load_csv(path, source);
  corpus.name = name.empty() ? p.stem().string() : name;
  return corpus;
}

std::vector<AVPair> sample_pairs(const Corpus& corpus, std::size_t n, std::uint64_t seed, bool dedup) {
  corpus.validate();
  if (n % 2 != 0) throw Error(ErrorCode::kInvalidArgument, "pair count must be even", {{"n", std::to_string(n)}});
  const std::size_t half = n / 2;

  // Authors in first-appearance order keep the draw sequence independent of hashing.
  std::vector<std::vector<std::size_t>> by_author;
  {
    std::unordered_map<std::string, std::size_t> slot;
    for (std::size_t i = 0; i < corpus.entries.size(); ++i) {
      auto [it, inserted] = slot.emplace(corpus.entries[i].author_id, by_author.size());
      if (inserted) by_author.emplace_back();
      by_author[it->second].push_back(i);
    }
  }
  std::vector<std::size_t> multi;  // authors with >= 2 texts
  std::size_t same_capacity = 0;
  std::size_t sum_sq = 0;
  for (std::size_t a = 0; a < by_author.size(); ++a) {
    const std::size_t k = by_author[a].size();
    if (k >= 2) multi.push_back(a);
    same_capacity += k * (k - 1) / 2;
    sum_sq += k * k;
  }
  const std::size_t total = corpus.entries.size();
  const std::size_t diff_capacity = (total * total - sum_sq) / 2;
  auto insufficient = [&](const char* what) {
    return Error(ErrorCode::kInsufficientCorpus, what,
                 {{"corpus", corpus.name}, {"requested_pairs", std::to_string(n)}});
  };
  if (half > 0 && multi.empty()) throw insufficient("no author has two texts for a same-author pair");
  if (dedup && half > same_capacity) throw insufficient("not enough distinct same-author pairs");
  if (dedup && half > diff_capacity) throw insufficient("not enough distinct different-author pairs");

  std::mt19937_64 rng(seed);
  std::set<IndexPair> used;

  auto draw_same = [&]() {
    const auto& texts = by_author[multi[uniform_index(rng, multi.size())]];
    const std::size_t i = uniform_index(rng, texts.size());
    std::size_t j = uniform_index(rng, texts.size() - 1);
    if (j >= i) ++j;
    return IndexPair{texts[i], texts[j]};
  };
  auto draw_different = [&]() {
    const std::size_t a = uniform_index(rng, by_author.size());
    std::size_t b = uniform_index(rng, by_author.size() - 1);
    if (b >= a) ++b;
    return IndexPair{by_author[a][uniform_index(rng, by_author[a].size())],
                     by_author[b][uniform_index(rng, by_author[b].size())]};
  };
  auto enumerate_remaining = [&](bool same) {
    std::vector<IndexPair> candidates;
    for (std::size_t x = 0; x < total; ++x) {
      for (std::size_t y = x + 1; y < total; ++y) {
        const bool same_author = corpus.entries[x].author_id == corpus.entries[y].author_id;
        if (same_author == same && !used.count({x, y})) candidates.push_back({x, y});
      }
    }
    shuffle(candidates, rng);
    return candidates;
  };

  auto collect = [&](bool same, std::size_t capacity) {
    std::vector<IndexPair> out;
    out.reserve(half);
    if (dedup && 2 * half > capacity) {
      for (const auto& c : enumerate_remaining(same)) {
        if (out.size() == half) break;
        out.push_back(c);
        used.insert(c);
      }
      return out;
    }
    std::size_t attempts = 0;
    const std::size_t max_attempts = 100 * half + 1000;
    while (out.size() < half) {
      IndexPair p = same ? draw_same() : draw_different();
      if (dedup) {
        if (++attempts > max_attempts) {
          for (const auto& c : enumerate_remaining(same)) {
            if (out.size() == half) break;
            out.push_back(c);
            used.insert(c);
          }
          break;
        }
        if (!used.insert(unordered(p.a, p.b)).second) continue;
      }
      out.push_back(p);
    }
    return out;
  };

  std::vector<std::pair<IndexPair, ClassificationLabel>> drawn;
  for (const auto& p : collect(true, same_capacity)) drawn.push_back({p, ClassificationLabel::kSameAuthor});
  for (const auto& p : collect(false, diff_capacity)) drawn.push_back({p, ClassificationLabel::kDifferentAuthor});
  if (drawn.size() != n) throw insufficient("could not draw the requested pairs");
  shuffle(drawn, rng);

  std::vector<AVPair> pairs;
  pairs.reserve(n);
  for (std::size_t i = 0; i < drawn.size(); ++i) {
    auto [idx, label] = drawn[i];
    if (rng() & 1) std::swap(idx.a, idx.b);
    pairs.push_back({make_sample_id(corpus.name, i), corpus.entries[idx.a].text, corpus.entries[idx.b].text, label});
  }
  return pairs;
}

DatasetStats compute_stats(const Corpus& corpus, const DatasetSplit& split) {
  DatasetStats stats;
  stats.n_authors = corpus.author_count();
  stats.n_train = split.train.size();
  stats.n_test = split.test.size();
  std::size_t words = 0;
  std::size_t texts = 0;
  for (const auto* part : {&split.train, &split.test}) {
    for (const auto& s : *part) {
      words += count_words(s.text1) + count_words(s.text2);
      texts += 2;
    }
  }
  stats.avg_length_words = texts ? static_cast<double>(words) / static_cast<double>(texts) : 0.0;
  return stats;
}

DatasetSplit build_split(const TemplateSet& templates, const std::vector<AVPair>& pairs,
                         const std::map<std::string, std::string>& explanations, DatasetSetting setting,
                         std::size_t train_n, std::size_t test_n, std::uint64_t seed,
                         const PromptOptions& options) {
  const bool with_expl = setting == DatasetSetting::kClassificationAndExplanation;
  std::set<std::string> seen;
  std::vector<const AVPair*> same;
  std::vector<const AVPair*> different;
  for (const auto& p : pairs) {
    if (!seen.insert(p.id).second) throw Error(ErrorCode::kDuplicateId, "duplicate pair id", {{"id", p.id}});
    if (with_expl) {
      auto it = explanations.find(p.id);
      if (it == explanations.end() || is_blank(it->second)) continue;
    }
    (p.label == ClassificationLabel::kSameAuthor ? same : different).push_back(&p);
  }
  const std::size_t train_same = (train_n + 1) / 2;
  const std::size_t train_diff = train_n / 2;
  const std::size_t test_same = test_n / 2;
  const std::size_t test_diff = (test_n + 1) / 2;
  if (same.size() < train_same + test_same || different.size() < train_diff + test_diff) {
    throw Error(ErrorCode::kInsufficientVerified, "eligible pool too small for a balanced split",
                {{"eligible_same", std::to_string(same.size())},
                 {"eligible_different", std::to_string(different.size())},
                 {"train", std::to_string(train_n)},
                 {"test", std::to_string(test_n)}});
  }

  std::mt19937_64 rng(seed);
  shuffle(same, rng);
  shuffle(different, rng);

  auto render = [&](const AVPair& p) {
    InstructionSample s;
    s.id = p.id;
    s.instruction = build_instruction(templates, p, setting, options);
    s.text1 = p.text1;
    s.text2 = p.text2;
    s.label = p.label;
    if (with_expl) s.explanation = explanations.at(p.id);
    s.setting = setting;
    return s;
  };
  auto take = [&](std::size_t same_from, std::size_t n_same, std::size_t diff_from, std::size_t n_diff) {
    std::vector<const AVPair*> chosen(same.begin() + same_from, same.begin() + same_from + n_same);
    chosen.insert(chosen.end(), different.begin() + diff_from, different.begin() + diff_from + n_diff);
    shuffle(chosen, rng);
    std::vector<InstructionSample> out;
    out.reserve(chosen.size());
    for (const AVPair* p : chosen) out.push_back(render(*p));
    return out;
  };

  DatasetSplit split;
  split.train = take(0, train_same, 0, train_diff);
  split.test = take(train_same, test_same, train_diff, test_diff);
  split.stats = compute_stats(Corpus{}, split);
  return split;
}

std::pair<std::string, std::string> write_jsonl(const DatasetSplit& split, const std::string& path_prefix) {
  std::string train_path = path_prefix + "_train.jsonl";
  std::string test_path = path_prefix + "_test.jsonl";
  write_samples(train_path, split.train);
  write_samples(test_path, split.test);
  return {std::move(train_path), std::move(test_path)};
}

std::vector<InstructionSample> read_jsonl(const std::string& path) { return read_samples(path); }

}  // namespace instructav
