#include "doctest.h"
#include "instructav/humaneval.hpp"
#include "instructav/jsonl.hpp"
#include "test_util.hpp"

using namespace instructav;
using namespace instructav::humaneval;
using testutil::code_of;

namespace {

Rating rating(std::string sample, std::string evaluator, std::string system, int c, int rel, int rea, int per) {
  return {std::move(sample), std::move(evaluator), std::move(system), c, rel, rea, per, "2026-01-02T03:04:05Z"};
}

}  // namespace

TEST_CASE("normalized score anchors") {
  Session low, high;
  low.record(rating("s", "e", "sys", 0, 1, 1, 1));
  high.record(rating("s", "e", "sys", 11, 5, 5, 5));
  CHECK(normalized_sample_scores(low, 11)[0].human_mean == 1.0);
  CHECK(normalized_sample_scores(high, 11)[0].human_mean == 5.0);
  CHECK(rescale_coverage(7, 7) == 5.0);
  CHECK(rescale_coverage(0, 7) == 1.0);
  CHECK(code_of([] { rescale_coverage(1, 0); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("per-sample mean over evaluators") {
  Session s;
  // Evaluator means: (5+5+4+3)/4 = 4.25, (1+4+4+4)/4 = 3.25, (5+5+5+5)/4 = 5.
  s.record(rating("x", "e1", "sys", 11, 5, 4, 3));
  s.record(rating("x", "e2", "sys", 0, 4, 4, 4));
  s.record(rating("x", "e3", "sys", 11, 5, 5, 5));
  s.record(rating("w", "e1", "sys", 11, 5, 4, 3));
  const auto scores = normalized_sample_scores(s, 11);
  REQUIRE(scores.size() == 2);
  CHECK(scores[0].id == "w");
  CHECK(scores[0].human_mean == doctest::Approx(4.25));
  CHECK(scores[1].id == "x");
  CHECK(scores[1].human_mean == doctest::Approx(12.5 / 3.0));
}

TEST_CASE("system filter and three equal-weight evaluators") {
  Session s;
  s.record(rating("x", "a", "sys", 11, 5, 5, 5));  // 5
  s.record(rating("x", "b", "sys", 11, 5, 5, 5));  // 5
  s.record(rating("x", "c", "sys", 0, 4, 4, 4));   // 3.25
  s.record(rating("x", "a", "other", 0, 1, 1, 1));
  CHECK(normalized_sample_scores(s, 11, "sys")[0].human_mean == doctest::Approx(13.25 / 3.0));
  CHECK(normalized_sample_scores(s, 11, "other")[0].human_mean == 1.0);
  CHECK(normalized_sample_scores(s, 11, "none").empty());
}

TEST_CASE("out-of-range ratings name the criterion") {
  Session s;
  try {
    s.record(rating("x", "e", "sys", 3, 6, 3, 3));
    FAIL("expected OutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kOutOfRange);
    CHECK(e.context().at("criterion") == "relevance");
    CHECK(e.context().at("value") == "6");
  }
  CHECK(code_of([&] { s.record(rating("x", "e", "sys", 12, 3, 3, 3)); }) == ErrorCode::kOutOfRange);
  CHECK(code_of([&] { s.record(rating("x", "e", "sys", -1, 3, 3, 3)); }) == ErrorCode::kOutOfRange);
  CHECK(code_of([&] { s.record(rating("x", "e", "sys", 3, 3, 0, 3)); }) == ErrorCode::kOutOfRange);
  CHECK(code_of([&] { s.record(rating("", "e", "sys", 3, 3, 3, 3)); }) == ErrorCode::kInvalidArgument);
  CHECK(s.size() == 0);

  RubricConfig config;
  config.coverage_by_system["baseline"] = kBaselineCoverage;
  Session b(config);
  CHECK(code_of([&] { b.record(rating("x", "e", "baseline", 8, 3, 3, 3)); }) == ErrorCode::kOutOfRange);
  CHECK_NOTHROW(b.record(rating("x", "e", "baseline", 7, 3, 3, 3)));
  CHECK_NOTHROW(b.record(rating("x", "e", "full", 11, 3, 3, 3)));
}

TEST_CASE("duplicate ratings are rejected") {
  Session s;
  s.record(rating("x", "e", "sys", 3, 3, 3, 3));
  CHECK(code_of([&] { s.record(rating("x", "e", "sys", 4, 4, 4, 4)); }) == ErrorCode::kDuplicateRating);
  CHECK_NOTHROW(s.record(rating("x", "e2", "sys", 4, 4, 4, 4)));
  CHECK(s.contains("x", "e", "sys"));
  CHECK_FALSE(s.contains("x", "e", "other"));
  CHECK(s.size() == 2);
}

TEST_CASE("ratings files replay and reject bad lines") {
  testutil::TempDir dir("ratings");
  const auto r1 = rating("x", "e", "sys", 3, 3, 4, 5);
  const auto r2 = rating("y", "e", "sys", 0, 1, 1, 1);
  CHECK(decode_rating(encode_rating(r1), 1) == r1);
  write_lines(dir.file("r.jsonl"), {encode_rating(r1), encode_rating(r2)});
  const auto s = Session::load(dir.file("r.jsonl"));
  CHECK(s.ratings() == std::vector<Rating>{r1, r2});

  write_lines(dir.file("dup.jsonl"), {encode_rating(r1), encode_rating(r1)});
  try {
    Session::load(dir.file("dup.jsonl"));
    FAIL("expected DuplicateRating");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kDuplicateRating);
    CHECK(e.context().at("line") == "2");
  }
  write_lines(dir.file("bad.jsonl"), {"{\"sample_id\":\"x\"}"});
  CHECK(code_of([&] { Session::load(dir.file("bad.jsonl")); }) == ErrorCode::kMalformedLine);
}

TEST_CASE("summary per system") {
  Session s;
  s.record(rating("x", "e1", "zeta", 10, 4, 4, 4));
  s.record(rating("y", "e1", "zeta", 8, 2, 3, 5));
  s.record(rating("x", "e2", "alpha", 5, 5, 5, 5));
  const auto summary = summarize(s);
  REQUIRE(summary.systems.size() == 2);
  CHECK(summary.systems[0].system_name == "alpha");
  CHECK(summary.systems[1].system_name == "zeta");
  CHECK(summary.systems[1].means.coverage == 9.0);
  CHECK(summary.systems[1].means.relevance == 3.0);
  CHECK(summary.systems[1].means.reasonableness == 3.5);
  CHECK(summary.systems[1].means.persuasiveness == 4.5);
  CHECK(summary.systems[1].n_ratings == 2);
  CHECK(summary.systems[1].n_samples == 2);
  CHECK(summary.systems[1].n_evaluators == 1);
  CHECK(summary.n_samples == 2);
  CHECK(summary.n_evaluators == 2);
  const auto table = summary.to_table();
  CHECK(table.rfind("System", 0) == 0);
  CHECK(table.find("zeta") != std::string::npos);
  CHECK(table.find("9.00") != std::string::npos);
  CHECK(table.find("alpha") < table.find("zeta"));
  CHECK(code_of([] { summarize(Session{}); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("rubric config validation") {
  RubricConfig c;
  CHECK(c.coverage_max_for("any") == kFullCoverage);
  c.coverage_max = 0;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::kConfig);
}
