#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "instructav/core.hpp"
#include "instructav/prompting.hpp"

namespace instructav {

// Default split sizes for the dataset builder.
inline constexpr std::size_t kDefaultTrainSize = 10000;
inline constexpr std::size_t kDefaultTestSize = 1000;

struct Corpus {
  std::string name;
  std::vector<AuthorText> entries;

  std::size_t author_count() const;
  // Entries valid and at least two distinct authors.
  void validate() const;
};

// CSV (header with author_id,text; RFC 4180 quoting) or JSONL
// ({"author_id","text"}), chosen by the .jsonl/.json extension. The corpus
// name defaults to the file stem. Throws Error(kCorpusNotFound) if the file
// does not exist.
Corpus load_corpus(const std::string& path, const SourceDataset& source = {},
                   const std::string& name = {});

// n/2 same-author and n/2 different-author pairs, ids "{corpus.name}-{i}".
// With dedup, no unordered pair of corpus entries is drawn twice.
std::vector<AVPair> sample_pairs(const Corpus& corpus, std::size_t n, std::uint64_t seed, bool dedup);

struct DatasetStats {
  std::size_t n_authors = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  double avg_length_words = 0.0;
};

struct DatasetSplit {
  std::vector<InstructionSample> train;
  std::vector<InstructionSample> test;
  DatasetStats stats;
};

// n_authors counts the corpus; avg_length_words averages the whitespace word
// count of every text1/text2 occurrence in train and test.
DatasetStats compute_stats(const Corpus& corpus, const DatasetSplit& split);

// Balanced, seeded train/test selection. In the explanation setting only
// pairs with an explanation are eligible. Train takes the extra same-author
// sample when train_n is odd, test the extra different-author sample.
DatasetSplit build_split(const TemplateSet& templates, const std::vector<AVPair>& pairs,
                         const std::map<std::string, std::string>& explanations, DatasetSetting setting,
                         std::size_t train_n, std::size_t test_n, std::uint64_t seed,
                         const PromptOptions& options = {});

// Writes "<prefix>_train.jsonl" and "<prefix>_test.jsonl".
std::pair<std::string, std::string> write_jsonl(const DatasetSplit& split, const std::string& path_prefix);
std::vector<InstructionSample> read_jsonl(const std::string& path);

}  // namespace instructav
