// One PASS/FAIL line per primary criterion. Exit status is nonzero on any FAIL.
#include <sys/wait.h>

#include <Eigen/SVD>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "instructav/consistency.hpp"
#include "instructav/dataset.hpp"
#include "instructav/genclient.hpp"
#include "instructav/humaneval.hpp"
#include "instructav/jsonl.hpp"
#include "instructav/lora.hpp"
#include "instructav/metrics.hpp"
#include "instructav/pipeline.hpp"
#include "instructav/prompting.hpp"

using namespace instructav;
namespace fs = std::filesystem;

namespace {

const std::string kFixtures = INSTRUCTAV_FIXTURE_DIR;

struct Failure {
  std::string why;
};

void require(bool ok, const std::string& why) {
  if (!ok) throw Failure{why};
}

int failures = 0;

void criterion(const std::string& name, double budget_ms, const std::function<void()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  std::string why;
  try {
    body();
  } catch (const Failure& f) {
    why = f.why;
  } catch (const std::exception& e) {
    why = std::string("exception: ") + e.what();
  }
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  if (why.empty() && ms >= budget_ms) {
    std::ostringstream s;
    s << "took " << ms << " ms, bound " << budget_ms << " ms";
    why = s.str();
  }
  std::printf("%s %s (%.1f ms)%s%s\n", why.empty() ? "PASS" : "FAIL", name.c_str(), ms, why.empty() ? "" : ": ",
              why.c_str());
  failures += !why.empty();
}

// --- LoRA helpers ---------------------------------------------------------

lora::Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  lora::Matrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

lora::Vector random_vector(std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  lora::Vector v(d);
  for (auto& x : v) x = n(rng);
  return v;
}

// --- ROUGE oracles --------------------------------------------------------

std::size_t brute_lcs(const TokenSequence& a, const TokenSequence& b) {
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << a.size()); ++mask) {
    TokenSequence sub;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (mask & (1u << i)) sub.push_back(a[i]);
    std::size_t j = 0;
    for (std::size_t i = 0; i < b.size() && j < sub.size(); ++i)
      if (b[i] == sub[j]) ++j;
    if (j == sub.size()) best = std::max(best, sub.size());
  }
  return best;
}

double f1_of(double overlap, double nc, double nr) {
  const double p = nc ? overlap / nc : 0.0, r = nr ? overlap / nr : 0.0;
  return p + r > 0 ? 2 * p * r / (p + r) : 0.0;
}

double brute_rouge_n_f1(const TokenSequence& c, const TokenSequence& r, std::size_t n) {
  std::map<TokenSequence, std::size_t> cg, rg;
  for (std::size_t i = 0; i + n <= c.size(); ++i) ++cg[TokenSequence(c.begin() + i, c.begin() + i + n)];
  for (std::size_t i = 0; i + n <= r.size(); ++i) ++rg[TokenSequence(r.begin() + i, r.begin() + i + n)];
  double overlap = 0, nc = 0, nr = 0;
  for (const auto& [g, k] : cg) {
    nc += k;
    if (rg.count(g)) overlap += std::min(k, rg[g]);
  }
  for (const auto& [g, k] : rg) nr += k;
  return f1_of(overlap, nc, nr);
}

// --- subprocess -----------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string(INSTRUCTAV_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

int main() {
  fs::create_directories(INSTRUCTAV_WORK_DIR);
  const std::string work = INSTRUCTAV_WORK_DIR;

  criterion("LoRA parameter budget", 1.0, [] {
    const auto b = lora::param_budget({4096, 8, 32, 2, 7'000'000'000ULL});
    require(b.trainable == 4'194'304ULL, "trainable = " + std::to_string(b.trainable));
    require(b.ratio * 100 >= 0.0595 && b.ratio * 100 <= 0.0605, "ratio out of range");
  });

  criterion("LoRA numerics", 10000.0, [] {
    std::mt19937_64 rng(2024);
    // (a) zero-init identity
    for (int i = 0; i < 100; ++i) {
      const std::size_t d = 1 + rng() % 64, r = 1 + rng() % std::min<std::size_t>(d, 8);
      const auto w0 = random_matrix(d, d, rng);
      lora::FrozenLinear layer(w0, lora::init_adapter(d, r, rng()));
      const auto x = random_vector(d, rng);
      require(lora::forward(layer, x) == w0.multiply(x), "zero-init output differs from base");
    }
    // (b) merge equivalence and (d) rank
    for (int i = 0; i < 20; ++i) {
      const std::size_t d = 2 + rng() % 40, r = 1 + rng() % std::min<std::size_t>(d, 4);
      const auto w0 = random_matrix(d, d, rng);
      lora::FrozenLinear layer(w0, {random_matrix(r, d, rng), random_matrix(d, r, rng), 0.75});
      const auto merged = lora::merge(layer);
      const auto x = random_vector(d, rng);
      const auto a = lora::forward(layer, x), b = merged.multiply(x);
      double inf = 0;
      for (std::size_t k = 0; k < d; ++k) inf = std::max(inf, std::abs(a[k] - b[k]));
      require(inf <= 1e-9, "merge differs by " + std::to_string(inf));
      Eigen::MatrixXd delta(d, d);
      for (std::size_t p = 0; p < d; ++p)
        for (std::size_t q = 0; q < d; ++q) delta(p, q) = merged(p, q) - w0(p, q);
      const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(delta).singularValues();
      std::size_t rank = 0;
      for (Eigen::Index k = 0; k < sv.size(); ++k) rank += sv(k) > 1e-9 * sv(0);
      require(rank <= r, "numerical rank exceeds r");
    }
    // (c) gradients against central differences of |h|^2 / 2
    const double h = 1e-6;
    for (int i = 0; i < 20; ++i) {
      const std::size_t d = 1 + rng() % 16, r = 1 + rng() % std::min<std::size_t>(d, 4);
      lora::FrozenLinear layer(random_matrix(d, d, rng), {random_matrix(r, d, rng), random_matrix(d, r, rng), 1.0});
      const auto x = random_vector(d, rng);
      const auto g = lora::backward(layer, x, lora::forward(layer, x));
      auto loss = [&] {
        double s = 0;
        for (double v : lora::forward(layer, x)) s += v * v;
        return 0.5 * s;
      };
      auto check = [&](lora::Matrix& param, const lora::Matrix& grad) {
        for (std::size_t p = 0; p < param.rows(); ++p) {
          for (std::size_t q = 0; q < param.cols(); ++q) {
            const double keep = param(p, q);
            param(p, q) = keep + h;
            const double up = loss();
            param(p, q) = keep - h;
            const double down = loss();
            param(p, q) = keep;
            const double fd = (up - down) / (2 * h);
            const double rel = std::abs(fd - grad(p, q)) / std::max({1.0, std::abs(fd), std::abs(grad(p, q))});
            require(rel < 1e-4, "gradient relative error " + std::to_string(rel));
          }
        }
      };
      check(layer.adapter().a, g.grad_a);
      check(layer.adapter().b, g.grad_b);
    }
  });

  criterion("LoRA training demo", 5000.0, [] {
    lora::DemoTask task;  // d = 8, r = 2, seed 7
    const auto trace = lora::train_demo(task, 500, 0.1);
    require(trace.final_accuracy >= 0.95, "final accuracy " + std::to_string(trace.final_accuracy));
    require(trace.base_unchanged(), "W0 checksum changed");
  });

  criterion("ROUGE oracle equivalence", 1000.0, [] {
    std::mt19937_64 rng(5);
    const char* alphabet[] = {"a", "b", "c", "d", "e"};
    for (int i = 0; i < 50; ++i) {
      TokenSequence c(rng() % 13), r(rng() % 13);
      for (auto& t : c) t = alphabet[rng() % 5];
      for (auto& t : r) t = alphabet[rng() % 5];
      for (std::size_t n : {1u, 2u})
        require(std::abs(rouge_n(c, r, n).f1 - brute_rouge_n_f1(c, r, n)) <= 1e-9, "ROUGE-N differs from oracle");
      const double lcs = double(brute_lcs(c, r));
      require(std::abs(rouge_l(c, r).f1 - f1_of(lcs, double(c.size()), double(r.size()))) <= 1e-9,
              "ROUGE-L differs from oracle");
    }
    const TokenSequence c{"the", "cat", "sat"}, r{"the", "cat", "ate"};
    require(std::abs(rouge_n(c, r, 1).f1 - 2.0 / 3.0) <= 1e-9, "hand R1");
    require(std::abs(rouge_n(c, r, 2).f1 - 0.5) <= 1e-9, "hand R2");
    require(std::abs(rouge_l(c, r).f1 - 2.0 / 3.0) <= 1e-9, "hand RL");
  });

  criterion("Embedding greedy-match", 1000.0, [] {
    struct Ortho : EmbeddingProvider {
      std::size_t dimension() const override { return 4; }
      std::string name() const override { return "ortho"; }
      std::vector<double> embed(std::string_view t) const override {
        std::vector<double> v(4, 0.0);
        v[static_cast<std::size_t>(t[0] - 'a') % 4] = 1.0;
        return v;
      }
    } ortho;
    struct Fixed : EmbeddingProvider {
      std::size_t dimension() const override { return 2; }
      std::string name() const override { return "fixed"; }
      std::vector<double> embed(std::string_view t) const override {
        if (t == "u") return {2, 1};
        if (t == "v") return {-1, 3};
        return {1, -1};
      }
    } fixed;
    HashEmbeddingProvider hash;
    const auto t = tokenize("a reference sentence about style");
    require(embed_match_f1(t, t, hash).f1 == 1.0, "identity is not 1");
    require(embed_match_f1({"a", "b"}, {"c", "d"}, ortho).f1 == 0.0, "orthogonal is not 0");
    const TokenSequence c{"u", "v", "w"}, r{"w", "u", "w"};
    double p = 0, rc = 0;
    for (const auto& x : c) {
      double best = -2;
      for (const auto& y : r) best = std::max(best, cosine_similarity(fixed.embed(x), fixed.embed(y)));
      p += best / 3;
    }
    for (const auto& y : r) {
      double best = -2;
      for (const auto& x : c) best = std::max(best, cosine_similarity(fixed.embed(x), fixed.embed(y)));
      rc += best / 3;
    }
    const auto got = embed_match_f1(c, r, fixed);
    require(std::abs(got.precision - p) <= 1e-12 && std::abs(got.recall - rc) <= 1e-12 &&
                std::abs(got.f1 - 2 * p * rc / (p + rc)) <= 1e-12,
            "3x3 case differs from exhaustive computation");
  });

  criterion("Consistency verifier soundness", 2000.0, [] {
    const auto corpus = load_corpus(kFixtures + "/toy_corpus.csv");
    const auto pairs = sample_pairs(corpus, 500, 77, true);
    const auto templates = TemplateSet::load(default_template_dir());
    MockBackend mock(2024, 0.30);
    std::vector<VerificationInput> inputs;
    std::set<std::string> corrupted;
    for (const auto& p : pairs) {
      const auto prompt = build_explanation_prompt(templates, p, p.label, {});
      if (mock.corrupts(prompt)) corrupted.insert(p.id);
      inputs.push_back({p, p.label, mock.respond(prompt)});
    }
    const auto outcome = filter_verified(inputs);
    std::size_t true_drops = 0;
    for (const auto& d : outcome.dropped) true_drops += corrupted.count(d.input.pair.id);
    const double precision = outcome.dropped.empty() ? 0.0 : double(true_drops) / outcome.dropped.size();
    const double recall = corrupted.empty() ? 0.0 : double(true_drops) / corrupted.size();
    require(precision == 1.0 && recall == 1.0, "drop precision " + std::to_string(precision) + " recall " +
                                                    std::to_string(recall));
    for (const auto& k : outcome.kept) require(!corrupted.count(k.input.pair.id), "corrupted sample kept");
    require(outcome.kept.size() == 500 - corrupted.size(), "kept set size");
    require(outcome.drop_rate > 0.25 && outcome.drop_rate < 0.35, "corruption rate far from 30%");
    const auto narrative = verify_alignment(
        "The correct answer is no. Both passages lean on short declaratives and the same odd comma habits, so "
        "they were written by the same author.",
        ClassificationLabel::kSameAuthor);
    require(!narrative.passed && narrative.reason == VerificationReason::kAnswerMismatch,
            "narrative case not rejected as AnswerMismatch");
  });

  criterion("End-to-end pipeline (mock backend)", 10000.0, [&] {
    const std::string args = "build-dataset --corpus " + kFixtures +
                             "/toy_corpus.csv --pool 200 --train 100 --test 20 --seed 11 --out ";
    require(run_cli(args + work + "/run1") == 0, "first build failed");
    require(run_cli(args + work + "/run2") == 0, "second build failed");
    for (const char* part : {"_train.jsonl", "_test.jsonl"}) {
      require(read_text_file(work + "/run1" + part) == read_text_file(work + "/run2" + part),
              std::string("artifacts differ: ") + part);
    }
    const auto train = read_samples(work + "/run1_train.jsonl");
    const auto test = read_samples(work + "/run1_test.jsonl");
    require(train.size() == 100 && test.size() == 20, "split sizes");
    for (const auto* part : {&train, &test}) {
      long balance = 0;
      for (const auto& s : *part) balance += s.label == ClassificationLabel::kSameAuthor ? 1 : -1;
      require(std::abs(balance) <= 1, "class balance off by more than one");
    }
    std::set<std::string> ids;
    for (const auto& s : train) ids.insert(s.id);
    for (const auto& s : test) require(!ids.count(s.id), "train/test share id " + s.id);
    write_samples(work + "/roundtrip.jsonl", train);
    require(read_text_file(work + "/roundtrip.jsonl") == read_text_file(work + "/run1_train.jsonl"),
            "rewrite is not byte-identical");
    require(read_samples(work + "/roundtrip.jsonl") == train, "round trip is lossy");
  });

  criterion("Evaluation harness", 1e9, [&] {
    ToolkitConfig config;
    const auto report = evaluate_files(config, kFixtures + "/eval_gold.jsonl", kFixtures + "/eval_pred.jsonl", "", "");
    char buf[16];
    std::snprintf(buf, sizeof buf, "%.3f", report.accuracy);
    require(std::string(buf) == "0.700" && report.accuracy == 0.7, std::string("accuracy ") + buf);
    const auto test = read_samples(work + "/run1_test.jsonl");
    std::vector<PredictionRecord> ident;
    for (const auto& s : test) {
      ident.push_back({s.id, training_target(s)});
    }
    write_predictions(work + "/ident.jsonl", ident);
    const auto id = evaluate_files(config, work + "/run1_test.jsonl", work + "/ident.jsonl", "", "");
    require(id.n_explained == test.size(), "not every sample carried an explanation label");
    require(id.rouge1_f1 == 1.0 && id.rouge2_f1 == 1.0 && id.rougel_f1 == 1.0, "identity ROUGE below 1");
  });

  criterion("Correlation analysis", 1e9, [] {
    const auto q = correlate_files(kFixtures + "/rated_scores.jsonl", kFixtures + "/rated_pred.jsonl",
                                   kFixtures + "/rated_gold.jsonl");
    require(q.top_accuracy == 1.0 && q.bottom_accuracy == 0.5, "fixture accuracies");
    std::vector<ScoredSample> samples;
    const bool pattern[] = {true, true, false, true, false, false, true, false};
    for (int i = 0; i < 8; ++i) samples.push_back({"hr-" + std::to_string(i), double(8 - i), pattern[i]});
    const auto base = quartile_accuracy(samples);
    for (const auto& f : std::vector<std::function<double(double)>>{
             [](double x) { return 2 * x + 1; }, [](double x) { return std::exp(x); },
             [](double x) { return std::log(x) - 100; }, [](double x) { return x * x * x; }}) {
      auto moved = samples;
      for (auto& s : moved) s.human_mean = f(s.human_mean);
      const auto t = quartile_accuracy(moved);
      require(t.top_ids == base.top_ids && t.bottom_ids == base.bottom_ids, "partition changed under transform");
    }
  });

  criterion("Human-eval aggregation", 1e9, [] {
    using namespace humaneval;
    auto score_of = [](std::vector<Rating> ratings) {
      Session s;
      for (auto& r : ratings) s.record(r);
      return normalized_sample_scores(s, kFullCoverage).at(0).human_mean;
    };
    require(score_of({{"s", "e", "sys", 0, 1, 1, 1, ""}}) == 1.0, "all-min anchor");
    require(score_of({{"s", "e", "sys", 11, 5, 5, 5, ""}}) == 5.0, "all-max anchor");
    const double three = score_of({{"s", "e1", "sys", 11, 5, 5, 5, ""},
                                   {"s", "e2", "sys", 11, 5, 5, 5, ""},
                                   {"s", "e3", "sys", 0, 4, 4, 3, ""}});
    require(std::abs(three - 13.0 / 3.0) < 1e-12, "three-rating mean " + std::to_string(three));
    Session s;
    s.record({"s", "e", "sys", 5, 3, 3, 3, ""});
    bool range = false, dup = false;
    try {
      s.record({"t", "e", "sys", 5, 6, 3, 3, ""});
    } catch (const Error& e) {
      range = e.code() == ErrorCode::kOutOfRange && e.context().at("criterion") == "relevance";
    }
    try {
      s.record({"s", "e", "sys", 4, 4, 4, 4, ""});
    } catch (const Error& e) {
      dup = e.code() == ErrorCode::kDuplicateRating;
    }
    require(range, "out-of-range rating accepted");
    require(dup, "duplicate rating accepted");
  });

  return failures == 0 ? 0 : 1;
}
