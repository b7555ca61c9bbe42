#include <set>

#include "doctest.h"
#include "instructav/consistency.hpp"
#include "instructav/genclient.hpp"
#include "instructav/prompting.hpp"
#include "test_util.hpp"

using namespace instructav;
using testutil::code_of;

namespace {

constexpr auto kSame = ClassificationLabel::kSameAuthor;
constexpr auto kDiff = ClassificationLabel::kDifferentAuthor;

const std::string kSameExplanation =
    "The correct answer is yes. Both reviews open with a one-line verdict and lean on ellipses. "
    "The vocabulary and rhythm match closely, so the two texts were written by the same author.";

}  // namespace

TEST_CASE("parse_answer") {
  CHECK(parse_answer("The correct answer is yes. Looking at Text 1 ...") == kSame);
  CHECK(parse_answer("the correct answer is NO") == kDiff);
  CHECK_FALSE(parse_answer("Both texts share tone.").has_value());
  CHECK(parse_answer("**The correct answer is:** \"yes\"") == kSame);
  CHECK(parse_answer("The correct answer is no!") == kDiff);
  CHECK_FALSE(parse_answer("The correct answer is nowhere to be found").has_value());
  CHECK(parse_answer("The correct answer is yesterday's news. The correct answer is no.") == kDiff);
  CHECK(parse_answer("Preamble. The correct answer is yes. Later: the correct answer is no.") == kSame);
  for (auto l : {kSame, kDiff}) CHECK(parse_answer(label_to_answer_phrase(l)) == l);
}

TEST_CASE("leading answer stripping") {
  CHECK(strip_leading_answer("The correct answer is yes. Body text.") == "Body text.");
  CHECK(strip_leading_answer("  the correct answer is no.\nBody") == "Body");
  CHECK(strip_leading_answer("Body first. The correct answer is yes.") == "Body first. The correct answer is yes.");
  CHECK(leading_answer_end("No answer here") == 0);
}

TEST_CASE("aligned explanation passes") {
  const auto r = verify_alignment(kSameExplanation, kSame);
  CHECK(r.passed);
  CHECK(r.reason == VerificationReason::kOk);
  REQUIRE(r.matched_phrases.size() == 1);
  CHECK(r.matched_phrases[0].phrase == "written by the same author");
  CHECK(kSameExplanation.compare(r.matched_phrases[0].offset, 26, "written by the same author") == 0);
}

TEST_CASE("same text under the other label is an answer mismatch") {
  const auto r = verify_alignment(kSameExplanation, kDiff);
  CHECK_FALSE(r.passed);
  CHECK(r.reason == VerificationReason::kAnswerMismatch);
}

TEST_CASE("label clause followed by the opposite answer is rejected") {
  const std::string text = label_clause(kSame) + " The correct answer is no. The styles diverge.";
  const auto r = verify_alignment(text, kSame);
  CHECK_FALSE(r.passed);
  CHECK(r.reason == VerificationReason::kAnswerMismatch);
}

TEST_CASE("reason precedence") {
  CHECK(verify_alignment("The correct answer is yes. Similar tone.", kSame).reason ==
        VerificationReason::kMissingConsistentPhrase);
  CHECK(verify_alignment("Similar tone throughout.", kSame).reason == VerificationReason::kUnparseable);
  CHECK(verify_alignment("", kSame).reason == VerificationReason::kUnparseable);
  CHECK(verify_alignment("Clearly written by the same author.", kSame).reason == VerificationReason::kOk);
  const std::string both =
      "The correct answer is yes. Some would say written by different authors, but they were written by the same "
      "author.";
  const auto r = verify_alignment(both, kSame);
  CHECK(r.reason == VerificationReason::kConflictingPhrasePresent);
  REQUIRE(r.matched_phrases.size() == 2);
  CHECK(r.matched_phrases[0].phrase == "written by different authors");
  CHECK(r.matched_phrases[0].offset < r.matched_phrases[1].offset);
}

TEST_CASE("conclusion-only conflict search") {
  const std::string text =
      "The correct answer is yes. One might guess written by different authors. In the end they were written by "
      "the same author.";
  PhrasePolicy policy;
  CHECK(verify_alignment(text, kSame, policy).reason == VerificationReason::kConflictingPhrasePresent);
  policy.conclusion_only = true;
  CHECK(verify_alignment(text, kSame, policy).passed);
}

TEST_CASE("case sensitivity") {
  const std::string text = "The correct answer is yes. WRITTEN BY THE SAME AUTHOR.";
  CHECK(verify_alignment(text, kSame).passed);
  PhrasePolicy policy;
  policy.case_sensitive = true;
  CHECK(verify_alignment(text, kSame, policy).reason == VerificationReason::kMissingConsistentPhrase);
}

TEST_CASE("policy validation") {
  PhrasePolicy p;
  p.same_phrases.clear();
  CHECK(code_of([&] { p.validate(); }) == ErrorCode::kConfig);
  p = {};
  p.different_phrases.push_back("");
  CHECK(code_of([&] { p.validate(); }) == ErrorCode::kConfig);
  p = {};
  p.different_phrases.push_back("Written By The Same Author");
  CHECK(code_of([&] { p.validate(); }) == ErrorCode::kConfig);
}

TEST_CASE("adding inconsistent phrases never turns a failure into a pass") {
  const std::vector<std::string> texts{
      kSameExplanation,
      "The correct answer is no. They were written by different authors.",
      "The correct answer is yes. Same voice; distinct authors unlikely; written by the same author.",
      "Written by the same author, plainly.",
      "The correct answer is yes. Probably not one writer.",
  };
  const PhrasePolicy base;
  for (const auto& t : texts) {
    for (auto label : {kSame, kDiff}) {
      PhrasePolicy grown = base;
      auto& inconsistent = label == kSame ? grown.different_phrases : grown.same_phrases;
      inconsistent.push_back(label == kSame ? "distinct authors" : "one writer");
      if (!verify_alignment(t, label, base).passed) CHECK_FALSE(verify_alignment(t, label, grown).passed);
    }
  }
}

TEST_CASE("filter_verified partitions in order") {
  std::vector<VerificationInput> in;
  for (int i = 0; i < 6; ++i) {
    const bool good = i % 3 != 1;
    in.push_back({AVPair{"s-" + std::to_string(i), "a", "b", kSame}, kSame,
                  good ? kSameExplanation : "The correct answer is no. written by different authors."});
  }
  const auto out = filter_verified(in);
  REQUIRE(out.kept.size() == 4);
  REQUIRE(out.dropped.size() == 2);
  CHECK(out.kept[0].input.pair.id == "s-0");
  CHECK(out.kept[1].input.pair.id == "s-2");
  CHECK(out.kept[3].input.pair.id == "s-5");
  CHECK(out.dropped[0].input.pair.id == "s-1");
  CHECK(out.drop_rate == doctest::Approx(2.0 / 6.0));

  std::vector<VerificationInput> all_good(3, in[0]);
  CHECK(filter_verified(all_good).drop_rate == 0.0);
  std::vector<VerificationInput> all_bad(3, in[1]);
  const auto none = filter_verified(all_bad);
  CHECK(none.kept.empty());
  CHECK(none.drop_rate == 1.0);
  CHECK(code_of([] { filter_verified({}); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("dropped audit record") {
  VerifiedSample v{{AVPair{"x-1", "a", "b", kDiff}, kDiff, "text"}, {false, VerificationReason::kUnparseable, {}}};
  CHECK(encode_dropped(v) == R"({"id":"x-1","label":"no","reason":"Unparseable","output_text":"text"})");
}

TEST_CASE("mock corruption: drop rate and exact agreement with the corruption oracle") {
  const auto templates = TemplateSet::load(default_template_dir());
  MockBackend mock(2024, 0.30);
  std::vector<VerificationInput> in;
  std::set<std::string> corrupted;
  for (int i = 0; i < 200; ++i) {
    const auto label = i % 2 ? kDiff : kSame;
    AVPair p{"m-" + std::to_string(i), "first text number " + std::to_string(i),
             "second text number " + std::to_string(i * 7), label};
    const auto prompt = build_explanation_prompt(templates, p, label, {});
    if (mock.corrupts(prompt)) corrupted.insert(p.id);
    in.push_back({p, label, mock.generate({prompt}).text});
  }
  const auto out = filter_verified(in);
  std::set<std::string> dropped;
  for (const auto& d : out.dropped) dropped.insert(d.input.pair.id);
  CHECK(dropped == corrupted);
  CHECK(out.drop_rate >= 0.25);
  CHECK(out.drop_rate <= 0.35);
  CHECK(out.drop_rate == doctest::Approx(static_cast<double>(corrupted.size()) / 200.0));
}
