#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "instructav/dataset.hpp"
#include "instructav/jsonl.hpp"
#include "test_util.hpp"

using namespace instructav;
using testutil::code_of;

namespace {

Corpus make_corpus(std::size_t authors, std::size_t per_author) {
  Corpus c;
  c.name = "syn";
  for (std::size_t a = 0; a < authors; ++a) {
    for (std::size_t t = 0; t < per_author; ++t) {
      c.entries.push_back({"a" + std::to_string(a), "text " + std::to_string(a) + " number " + std::to_string(t), {}});
    }
  }
  return c;
}

std::string author_of(const Corpus& c, const std::string& text) {
  for (const auto& e : c.entries)
    if (e.text == text) return e.author_id;
  return {};
}

std::vector<AVPair> make_pairs(std::size_t n_same, std::size_t n_diff) {
  std::vector<AVPair> out;
  for (std::size_t i = 0; i < n_same + n_diff; ++i) {
    const bool same = i < n_same;
    out.push_back({"p-" + std::to_string(i), "left " + std::to_string(i), "right " + std::to_string(i),
                   same ? ClassificationLabel::kSameAuthor : ClassificationLabel::kDifferentAuthor});
  }
  return out;
}

}  // namespace

TEST_CASE("two authors with two texts each, two pairs") {
  const auto corpus = make_corpus(2, 2);
  const auto pairs = sample_pairs(corpus, 2, 1, true);
  REQUIRE(pairs.size() == 2);
  std::size_t same = 0;
  for (const auto& p : pairs) {
    const bool is_same = author_of(corpus, p.text1) == author_of(corpus, p.text2);
    CHECK(is_same == (p.label == ClassificationLabel::kSameAuthor));
    CHECK(p.text1 != p.text2);
    same += is_same;
  }
  CHECK(same == 1);
}

TEST_CASE("1000 pairs from 100 authors are exactly balanced and labelled truthfully") {
  const auto corpus = make_corpus(100, 5);
  const auto pairs = sample_pairs(corpus, 1000, 42, true);
  REQUIRE(pairs.size() == 1000);
  std::map<ClassificationLabel, std::size_t> hist;
  std::set<std::string> ids;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& p : pairs) {
    ++hist[p.label];
    ids.insert(p.id);
    CHECK((author_of(corpus, p.text1) == author_of(corpus, p.text2)) == (p.label == ClassificationLabel::kSameAuthor));
    const auto key = std::minmax(p.text1, p.text2);
    CHECK(seen.insert({key.first, key.second}).second);
  }
  CHECK(hist[ClassificationLabel::kSameAuthor] == 500);
  CHECK(hist[ClassificationLabel::kDifferentAuthor] == 500);
  CHECK(ids.size() == 1000);
  CHECK(ids.count("syn-0") == 1);
}

TEST_CASE("sampling is a function of the seed") {
  const auto corpus = make_corpus(10, 4);
  CHECK(sample_pairs(corpus, 40, 3, true) == sample_pairs(corpus, 40, 3, true));
  CHECK(sample_pairs(corpus, 40, 3, true) != sample_pairs(corpus, 40, 4, true));
}

TEST_CASE("sampling rejections") {
  CHECK(code_of([] { sample_pairs(make_corpus(4, 3), 3, 0, true); }) == ErrorCode::kInvalidArgument);
  CHECK(code_of([] { sample_pairs(make_corpus(1, 10), 2, 0, true); }) == ErrorCode::kInsufficientCorpus);
  CHECK(code_of([] { sample_pairs(make_corpus(5, 1), 2, 0, true); }) == ErrorCode::kInsufficientCorpus);
  // 2 authors x 2 texts hold 2 distinct same-author pairs.
  CHECK(code_of([] { sample_pairs(make_corpus(2, 2), 6, 0, true); }) == ErrorCode::kInsufficientCorpus);
  CHECK_NOTHROW(sample_pairs(make_corpus(2, 2), 6, 0, false));
  // Exhausting the distinct pairs exactly still succeeds.
  CHECK(sample_pairs(make_corpus(2, 2), 4, 0, true).size() == 4);
}

TEST_CASE("stats average the words of every embedded text") {
  DatasetSplit split;
  InstructionSample s;
  s.id = "x";
  s.instruction = "i";
  s.text1 = "one two three four five six seven eight nine ten";
  s.text2 = std::string("w ") + "w w w w w w w w w w w w w w w w w w w";
  split.train.push_back(s);
  const auto stats = compute_stats(make_corpus(3, 2), split);
  CHECK(stats.n_authors == 3);
  CHECK(stats.n_train == 1);
  CHECK(stats.n_test == 0);
  CHECK(stats.avg_length_words == doctest::Approx(15.0));
}

TEST_CASE("split sizes, balance and disjointness") {
  const auto templates = TemplateSet::load(default_template_dir());
  const auto pairs = make_pairs(11, 11);
  const auto split = build_split(templates, pairs, {}, DatasetSetting::kClassificationOnly, 20, 2, 5);
  REQUIRE(split.train.size() == 20);
  REQUIRE(split.test.size() == 2);
  std::set<std::string> train_ids;
  std::size_t train_same = 0, test_same = 0;
  for (const auto& s : split.train) {
    train_ids.insert(s.id);
    train_same += s.label == ClassificationLabel::kSameAuthor;
    CHECK_FALSE(s.explanation.has_value());
    CHECK(s.setting == DatasetSetting::kClassificationOnly);
  }
  for (const auto& s : split.test) {
    CHECK(train_ids.count(s.id) == 0);
    test_same += s.label == ClassificationLabel::kSameAuthor;
  }
  CHECK(train_same == 10);
  CHECK(test_same == 1);
  CHECK(split.stats.n_train == 20);
  CHECK(split.stats.n_test == 2);
}

TEST_CASE("explanation split only takes explained pairs") {
  const auto templates = TemplateSet::load(default_template_dir());
  const auto pairs = make_pairs(4, 4);
  std::map<std::string, std::string> expl;
  for (const auto& p : pairs)
    if (p.id != "p-0" && p.id != "p-7") expl[p.id] = "Because of " + p.id;
  const auto split = build_split(templates, pairs, expl, DatasetSetting::kClassificationAndExplanation, 4, 2, 1);
  for (const auto* part : {&split.train, &split.test}) {
    for (const auto& s : *part) {
      CHECK(s.id != "p-0");
      CHECK(s.id != "p-7");
      REQUIRE(s.explanation.has_value());
      CHECK(*s.explanation == "Because of " + s.id);
    }
  }
  CHECK(code_of([&] {
          build_split(templates, pairs, expl, DatasetSetting::kClassificationAndExplanation, 6, 2, 1);
        }) == ErrorCode::kInsufficientVerified);
}

TEST_CASE("written splits read back identically") {
  testutil::TempDir dir("split");
  const auto templates = TemplateSet::load(default_template_dir());
  const auto split = build_split(templates, make_pairs(5, 5), {}, DatasetSetting::kClassificationOnly, 6, 4, 9);
  const auto [train, test] = write_jsonl(split, dir.file("out"));
  CHECK(train == dir.file("out_train.jsonl"));
  CHECK(read_jsonl(train) == split.train);
  CHECK(read_jsonl(test) == split.test);
}

TEST_CASE("CSV and JSONL corpora") {
  const auto csv = load_corpus(INSTRUCTAV_FIXTURE_DIR "/toy_corpus.csv", SourceDataset::parse("yelp"));
  CHECK(csv.name == "toy_corpus");
  CHECK(csv.entries.size() == 200);
  CHECK(csv.author_count() == 20);
  CHECK(csv.entries[0].author_id == "author00");
  CHECK(csv.entries[0].text.front() == '"');
  CHECK(csv.entries[0].text.find("\" she said") != std::string::npos);
  CHECK(csv.entries[0].source.kind == SourceDataset::Kind::kYelp);
  const auto jsonl = load_corpus(INSTRUCTAV_FIXTURE_DIR "/toy_corpus.jsonl", {}, "named");
  CHECK(jsonl.name == "named");
  CHECK(jsonl.entries.size() == 40);
  CHECK_NOTHROW(jsonl.validate());

  testutil::TempDir dir("corpus");
  CHECK(code_of([&] { load_corpus(dir.file("absent.csv")); }) == ErrorCode::kCorpusNotFound);
  write_text_file(dir.file("one.csv"), "author_id,text\nsolo,first text\nsolo,second text\n");
  CHECK(code_of([&] { sample_pairs(load_corpus(dir.file("one.csv")), 2, 0, true); }) ==
        ErrorCode::kInsufficientCorpus);
  write_text_file(dir.file("multi.csv"), "text,author_id\r\n\"line one\nline two, still\",x\r\nplain,y\r\n");
  const auto multi = load_corpus(dir.file("multi.csv"));
  REQUIRE(multi.entries.size() == 2);
  CHECK(multi.entries[0].text == "line one\nline two, still");
  CHECK(multi.entries[0].author_id == "x");
  write_text_file(dir.file("bad.csv"), "author_id,text\n\"open,quote\n");
  CHECK(code_of([&] { load_corpus(dir.file("bad.csv")); }) == ErrorCode::kMalformedLine);
}
