// instructav command-line front end. Talks to the toolkit only through the C API.
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "instructav/instructav.h"
#include "json.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct CliFailure {
  int exit_code;
};

void print_error_json(const std::string& code, const std::string& message) {
  nlohmann::ordered_json j{{"code", code}, {"message", message}, {"context", nlohmann::ordered_json::object()}};
  std::cerr << j.dump() << "\n";
}

// Reports the C API's last error on stderr and unwinds with the exit code.
void check(iav_status status) {
  if (status == IAV_OK) return;
  const std::string err = iav_last_error();
  if (err.empty()) {
    print_error_json(iav_status_name(status), "operation failed");
  } else {
    std::cerr << nlohmann::json::parse(err).dump() << "\n";
  }
  throw CliFailure{iav_status_is_usage(status) ? kExitUsage : kExitRuntime};
}

struct CString {
  char* p = nullptr;
  ~CString() { iav_string_free(p); }
  std::string str() const { return p == nullptr ? std::string() : std::string(p); }
};

struct Context {
  iav_context* ctx = nullptr;
  ~Context() { iav_context_destroy(ctx); }
};

struct Session {
  iav_session* s = nullptr;
  ~Session() { iav_session_close(s); }
};

std::string iso_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

struct AnnotateItem {
  std::string id;
  std::string text;
};

std::vector<AnnotateItem> read_annotate_items(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    print_error_json("IoError", "cannot open items file: " + path);
    throw CliFailure{kExitRuntime};
  }
  std::vector<AnnotateItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("id")) {
      print_error_json("MalformedLine", "bad item at line " + std::to_string(line_no));
      throw CliFailure{kExitRuntime};
    }
    std::string text = j.value("output_text", j.value("explanation", std::string()));
    items.push_back({j.at("id").get<std::string>(), std::move(text)});
  }
  return items;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Instruction-tuned authorship verification toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "TOML run definition");
  app.add_option("--set", sets, "Override a config key: key=value (repeatable)");

  // build-dataset
  auto* build = app.add_subcommand("build-dataset", "Sample, explain, verify and split a corpus");
  std::string corpus, corpus_name, setting = "cls-expl", out_prefix;
  std::size_t pool = 0, train_n = 10000, test_n = 1000;
  std::optional<std::uint64_t> seed;
  build->add_option("--corpus", corpus, "CSV or JSONL corpus (author_id, text)")->required();
  build->add_option("--name", corpus_name, "Corpus name used in sample ids");
  build->add_option("--setting", setting, "cls or cls-expl")->check(CLI::IsMember({"cls", "cls-expl"}));
  build->add_option("--pool", pool, "Pairs to sample before verification (default train+test)");
  build->add_option("--train", train_n, "Training samples");
  build->add_option("--test", test_n, "Test samples");
  build->add_option("--seed", seed, "Seed (overrides config)");
  build->add_option("--out", out_prefix, "Output prefix")->required();

  // generate
  auto* gen = app.add_subcommand("generate", "Run sample instructions through the backend");
  std::string gen_in, gen_out;
  gen->add_option("--in", gen_in, "Samples JSONL")->required();
  gen->add_option("--out", gen_out, "Predictions JSONL")->required();

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "Score predictions against gold samples");
  std::string gold, pred, expl_labels, report;
  eval->add_option("--gold", gold, "Gold samples JSONL")->required();
  eval->add_option("--pred", pred, "Predictions JSONL")->required();
  eval->add_option("--expl-labels", expl_labels, "Explanation labels JSONL (id, explanation)");
  eval->add_option("--report", report, "Write the JSON report here");

  // verify
  auto* verify = app.add_subcommand("verify", "Check generated explanations against their labels");
  std::string verify_in, label_field = "label", kept, dropped;
  verify->add_option("--in", verify_in, "Generated JSONL (id, label, output_text)")->required();
  verify->add_option("--label-field", label_field, "Field holding the label");
  verify->add_option("--kept", kept, "Write passing records here");
  verify->add_option("--dropped", dropped, "Write audit records for failures here");

  // lora-demo
  auto* lora = app.add_subcommand("lora-demo", "Train a low-rank adapter on a synthetic task");
  iav_lora_demo_options lo{8, 2, 500, 0.1, 7, nullptr, nullptr};
  std::string trace_path, adapter_path;
  lora->add_option("--d", lo.d, "Dimension");
  lora->add_option("--r", lo.r, "Rank");
  lora->add_option("--steps", lo.steps, "Gradient steps");
  lora->add_option("--lr", lo.lr, "Learning rate");
  lora->add_option("--seed", lo.seed, "Task seed");
  lora->add_option("--trace", trace_path, "Loss trace CSV");
  lora->add_option("--adapter", adapter_path, "Adapter JSON");

  // lora-budget
  auto* budget = app.add_subcommand("lora-budget", "Count adapter parameters");
  std::uint64_t bd = 4096, br = 8, blayers = 32, bmats = 2;
  double bbase = 7e9;
  budget->add_option("--d", bd, "Hidden size");
  budget->add_option("--r", br, "Rank");
  budget->add_option("--layers", blayers, "Layers");
  budget->add_option("--matrices", bmats, "Adapted matrices per layer");
  budget->add_option("--base", bbase, "Base model parameters");

  // annotate
  auto* annotate = app.add_subcommand("annotate", "Rate explanations interactively (resumable)");
  std::string items_path, ratings_path, system_name, evaluator, export_path;
  std::size_t limit = 100;
  bool summary_only = false;
  annotate->add_option("--items", items_path, "JSONL with id and output_text or explanation");
  annotate->add_option("--ratings", ratings_path, "Append-only ratings JSONL")->required();
  annotate->add_option("--system", system_name, "System that produced the explanations");
  annotate->add_option("--evaluator", evaluator, "Evaluator id");
  annotate->add_option("--limit", limit, "Items per session");
  annotate->add_flag("--summary", summary_only, "Print the rubric summary and exit");
  annotate->add_option("--export", export_path, "Write per-sample normalized scores here");

  // correlate
  auto* corr = app.add_subcommand("correlate", "Accuracy on top and bottom human-rated samples");
  std::string scores;
  double fraction = 0.25;
  corr->add_option("--scores", scores, "Scores JSONL (id, human_mean)")->required();
  corr->add_option("--pred", pred, "Predictions JSONL")->required();
  corr->add_option("--gold", gold, "Gold samples JSONL")->required();
  corr->add_option("--fraction", fraction, "Share at each end")->check(CLI::Range(0.0, 1.0));

  // fewshot-prompts
  auto* fewshot = app.add_subcommand("fewshot-prompts", "Render k-shot evaluation prompts");
  std::string test_path, demos_path, fewshot_out;
  std::vector<std::size_t> ks{0, 2, 4, 8};
  fewshot->add_option("--test", test_path, "Test samples JSONL")->required();
  fewshot->add_option("--demos", demos_path, "Demonstration samples JSONL");
  fewshot->add_option("--k", ks, "Shot counts")->delimiter(',');
  fewshot->add_option("--out", fewshot_out, "Prompts JSONL")->required();

  auto* show = app.add_subcommand("show-config", "Print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error_json("UsageError", e.what());
    return kExitUsage;
  }

  try {
    Context ctx;
    check(iav_context_create(config_path.empty() ? nullptr : config_path.c_str(), &ctx.ctx));
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        print_error_json("UsageError", "--set expects key=value: " + kv);
        return kExitUsage;
      }
      check(iav_context_set(ctx.ctx, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
    }

    if (*build) {
      if (seed) check(iav_context_set(ctx.ctx, "seed", std::to_string(*seed).c_str()));
      iav_build_options o{corpus.c_str(), corpus_name.empty() ? nullptr : corpus_name.c_str(),
                          setting.c_str(),  pool,
                          train_n,        test_n,
                          out_prefix.c_str()};
      CString summary;
      check(iav_build_dataset(ctx.ctx, &o, &summary.p));
      std::cout << summary.str() << "\n";
    } else if (*gen) {
      std::size_t n = 0;
      check(iav_generate_file(ctx.ctx, gen_in.c_str(), gen_out.c_str(), &n));
      std::cout << "generated: " << n << "\n";
    } else if (*eval) {
      CString json, table;
      check(iav_evaluate(ctx.ctx, gold.c_str(), pred.c_str(), expl_labels.empty() ? nullptr : expl_labels.c_str(),
                         report.empty() ? nullptr : report.c_str(), &json.p, &table.p));
      std::cout << table.str();
    } else if (*verify) {
      CString json;
      check(iav_verify_file(ctx.ctx, verify_in.c_str(), label_field.c_str(), kept.empty() ? nullptr : kept.c_str(),
                            dropped.empty() ? nullptr : dropped.c_str(), &json.p));
      const auto j = nlohmann::json::parse(json.str());
      std::cout << "passed: " << j["passed"] << "\nfailed: " << j["failed"]
                << "\ndrop_rate: " << fixed3(j["drop_rate"].get<double>()) << "\n";
    } else if (*lora) {
      lo.trace_csv_path = trace_path.empty() ? nullptr : trace_path.c_str();
      lo.adapter_path = adapter_path.empty() ? nullptr : adapter_path.c_str();
      CString json;
      check(iav_lora_demo(&lo, &json.p));
      const auto j = nlohmann::json::parse(json.str());
      std::cout << "base accuracy: " << fixed3(j["base_accuracy"].get<double>())
                << "\nfinal accuracy: " << fixed3(j["final_accuracy"].get<double>())
                << "\nfinal loss: " << j["final_loss"].get<double>()
                << "\nW0 unchanged: " << (j["w0_unchanged"].get<bool>() ? "true" : "false") << "\n";
    } else if (*budget) {
      std::uint64_t trainable = 0;
      double ratio = 0.0;
      check(iav_lora_param_budget(bd, br, blayers, bmats, static_cast<std::uint64_t>(bbase), &trainable, &ratio));
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.4f%%", ratio * 100.0);
      std::cout << "trainable: " << trainable << "\nratio: " << buf << "\n";
    } else if (*annotate) {
      Session session;
      check(iav_session_open(ctx.ctx, ratings_path.c_str(), &session.s));
      if (!summary_only && !items_path.empty()) {
        if (system_name.empty() || evaluator.empty()) {
          print_error_json("UsageError", "--system and --evaluator are required when rating");
          return kExitUsage;
        }
        int cov_max = 0;
        check(iav_session_coverage_max(session.s, system_name.c_str(), &cov_max));
        const auto items = read_annotate_items(items_path);
        const std::size_t n = std::min(limit, items.size());
        std::string line;
        bool quit = false;
        for (std::size_t i = 0; i < n && !quit; ++i) {
          int has = 0;
          check(iav_session_has(session.s, items[i].id.c_str(), evaluator.c_str(), system_name.c_str(), &has));
          if (has) continue;
          std::cout << "\n[" << (i + 1) << "/" << n << "] " << items[i].id << "\n" << items[i].text << "\n";
          while (true) {
            std::cout << "coverage (0-" << cov_max
                      << ") relevance reasonableness persuasiveness (1-5), or q to stop: " << std::flush;
            if (!std::getline(std::cin, line) || line == "q") {
              quit = true;
              break;
            }
            std::istringstream in(line);
            int c = 0, rel = 0, rea = 0, per = 0;
            if (!(in >> c >> rel >> rea >> per)) {
              std::cout << "enter four integers\n";
              continue;
            }
            const auto st = iav_session_record(session.s, items[i].id.c_str(), evaluator.c_str(), system_name.c_str(),
                                               c, rel, rea, per, iso_now().c_str());
            if (st == IAV_E_OUT_OF_RANGE) {
              std::cout << nlohmann::json::parse(iav_last_error())["message"].get<std::string>() << "\n";
              continue;
            }
            check(st);
            break;
          }
        }
        std::cout << "\n";
      }
      std::size_t size = 0;
      check(iav_session_size(session.s, &size));
      if (size > 0) {
        CString table;
        check(iav_session_summary_table(session.s, &table.p));
        std::cout << table.str();
      } else {
        std::cout << "no ratings recorded\n";
      }
      if (!export_path.empty()) {
        std::size_t n = 0;
        check(iav_session_export_scores(session.s, export_path.c_str(),
                                        system_name.empty() ? nullptr : system_name.c_str(), 0, &n));
        std::cout << "exported: " << n << "\n";
      }
    } else if (*corr) {
      CString json;
      check(iav_correlate(scores.c_str(), pred.c_str(), gold.c_str(), fraction, &json.p));
      const auto j = nlohmann::json::parse(json.str());
      const auto pct = std::to_string(static_cast<int>(fraction * 100.0 + 0.5));
      std::cout << "top-" << pct << "% accuracy: " << fixed3(j["top_accuracy"].get<double>()) << "\nbottom-" << pct
                << "% accuracy: " << fixed3(j["bottom_accuracy"].get<double>()) << "\n";
    } else if (*fewshot) {
      std::size_t n = 0;
      check(iav_fewshot_prompts(ctx.ctx, test_path.c_str(), demos_path.empty() ? nullptr : demos_path.c_str(),
                                ks.data(), ks.size(), fewshot_out.c_str(), &n));
      std::cout << "prompts: " << n << "\n";
    } else if (*show) {
      CString json;
      check(iav_context_describe(ctx.ctx, &json.p));
      std::cout << json.str() << "\n";
    }
  } catch (const CliFailure& f) {
    return f.exit_code;
  }
  return 0;
}
