#include "instructav/instructav.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <string>

#include "instructav/config.hpp"
#include "instructav/consistency.hpp"
#include "instructav/error.hpp"
#include "instructav/humaneval.hpp"
#include "instructav/jsonl.hpp"
#include "instructav/lora.hpp"
#include "instructav/metrics.hpp"
#include "instructav/pipeline.hpp"
#include "json.hpp"

using instructav::Error;
using instructav::ErrorCode;

struct iav_context {
  instructav::ToolkitConfig config;
};

struct iav_session {
  std::string path;
  instructav::humaneval::Session session;
};

namespace {

using ojson = nlohmann::ordered_json;

thread_local std::string g_last_error;

iav_status fail(const Error& e) {
  g_last_error = e.to_json();
  return static_cast<iav_status>(e.code());
}

iav_status fail(ErrorCode code, const std::string& message) { return fail(Error(code, message)); }

// Runs `fn`, mapping exceptions onto status codes and the thread's last error.
template <typename Fn>
iav_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return IAV_OK;
  } catch (const Error& e) {
    return fail(e);
  } catch (const std::bad_alloc&) {
    return fail(ErrorCode::kInternal, "out of memory");
  } catch (const std::exception& e) {
    return fail(ErrorCode::kInternal, e.what());
  } catch (...) {
    return fail(ErrorCode::kInternal, "unknown failure");
  }
}

void require(const void* p, const char* name) {
  if (p == nullptr) throw Error(ErrorCode::kInvalidArgument, std::string(name) + " must not be NULL");
}

std::string opt_str(const char* s) { return s == nullptr ? std::string() : std::string(s); }

void hand_out(const std::string& s, char** out) {
  if (out == nullptr) return;
  char* buf = static_cast<char*>(std::malloc(s.size() + 1));
  if (buf == nullptr) throw std::bad_alloc();
  std::memcpy(buf, s.c_str(), s.size() + 1);
  *out = buf;
}

std::string dump(const ojson& j) { return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace); }

std::string describe(const instructav::ToolkitConfig& c) {
  ojson j;
  j["seed"] = c.seed;
  auto& b = j["backend"];
  b["kind"] = c.backend.kind == instructav::BackendKind::kMock ? "mock" : "http";
  if (c.backend.endpoint_url) b["endpoint_url"] = *c.backend.endpoint_url;
  if (c.backend.api_key_env_var) b["api_key_env"] = *c.backend.api_key_env_var;
  if (c.backend.model_name) b["model"] = *c.backend.model_name;
  b["max_in_flight"] = c.backend.max_in_flight;
  b["retry_limit"] = c.backend.retry_limit;
  b["backoff_base_ms"] = c.backend.backoff_base_ms;
  b["timeout_ms"] = c.backend.timeout_ms;
  b["mock_seed"] = c.backend.mock_seed;
  b["mock_corrupt_fraction"] = c.backend.mock_corrupt_fraction;
  j["decoding"] = {{"temperature", c.temperature}, {"max_new_tokens", c.max_new_tokens}};
  j["consistency"] = {{"same_phrases", c.phrases.same_phrases},
                      {"different_phrases", c.phrases.different_phrases},
                      {"case_sensitive", c.phrases.case_sensitive},
                      {"conclusion_only", c.phrases.conclusion_only}};
  j["rubric"] = {{"coverage_max", c.rubric.coverage_max}, {"coverage_by_system", c.rubric.coverage_by_system}};
  auto& p = j["prompting"];
  p["template_dir"] = c.template_dir;
  if (c.demos_path) p["demos"] = *c.demos_path;
  p["demo_count"] = c.demo_count;
  p["char_budget"] = c.char_budget;
  j["dataset"] = {{"dedup", c.dedup}, {"source", c.source}};
  auto& m = j["metrics"];
  if (c.embeddings_path) m["embeddings"] = *c.embeddings_path;
  m["strip_answer"] = c.strip_answer;
  return dump(j);
}

instructav::ClassificationLabel label_arg(int label) {
  if (label == IAV_LABEL_SAME_AUTHOR) return instructav::ClassificationLabel::kSameAuthor;
  if (label == IAV_LABEL_DIFFERENT_AUTHOR) return instructav::ClassificationLabel::kDifferentAuthor;
  throw Error(ErrorCode::kInvalidArgument, "label must be 0 (different) or 1 (same)");
}

}  // namespace

extern "C" {

const char* iav_version(void) { return "0.1.0"; }

const char* iav_last_error(void) { return g_last_error.c_str(); }

const char* iav_status_name(iav_status status) {
  if (status == IAV_OK) return "Ok";
  return instructav::error_code_name(static_cast<ErrorCode>(status)).data();
}

int iav_status_is_usage(iav_status status) {
  return status != IAV_OK && instructav::is_usage_error(static_cast<ErrorCode>(status)) ? 1 : 0;
}

void iav_string_free(char* s) { std::free(s); }

iav_status iav_context_create(const char* config_path, iav_context** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    auto ctx = std::make_unique<iav_context>();
    if (config_path != nullptr) ctx->config = instructav::load_config(config_path);
    *out = ctx.release();
  });
}

iav_status iav_context_set(iav_context* ctx, const char* key, const char* value) {
  return guarded([&] {
    require(ctx, "ctx");
    require(key, "key");
    require(value, "value");
    auto updated = ctx->config;
    instructav::set_config_value(updated, key, value);
    updated.validate();
    ctx->config = std::move(updated);
  });
}

iav_status iav_context_describe(const iav_context* ctx, char** out_json) {
  return guarded([&] {
    require(ctx, "ctx");
    require(out_json, "out_json");
    hand_out(describe(ctx->config), out_json);
  });
}

void iav_context_destroy(iav_context* ctx) { delete ctx; }

iav_status iav_build_dataset(iav_context* ctx, const iav_build_options* options, char** out_summary_json) {
  return guarded([&] {
    require(ctx, "ctx");
    require(options, "options");
    require(options->corpus_path, "corpus_path");
    require(options->out_prefix, "out_prefix");
    instructav::BuildOptions o;
    o.corpus_path = options->corpus_path;
    o.corpus_name = opt_str(options->corpus_name);
    const auto setting = instructav::setting_from_wire(options->setting ? options->setting : "cls-expl");
    if (!setting) throw Error(ErrorCode::kUsage, "setting must be cls or cls-expl", {{"setting", options->setting}});
    o.setting = *setting;
    o.pool = options->pool;
    o.train_n = options->train;
    o.test_n = options->test;
    o.seed = ctx->config.seed;
    o.out_prefix = options->out_prefix;
    const auto result = instructav::build_dataset(ctx->config, o);
    hand_out(result.to_json(), out_summary_json);
  });
}

iav_status iav_generate_file(iav_context* ctx, const char* in_path, const char* out_path, size_t* out_count) {
  return guarded([&] {
    require(ctx, "ctx");
    require(in_path, "in_path");
    require(out_path, "out_path");
    const auto n = instructav::generate_predictions(ctx->config, in_path, out_path);
    if (out_count != nullptr) *out_count = n;
  });
}

iav_status iav_verify_file(iav_context* ctx, const char* in_path, const char* label_field, const char* kept_path,
                           const char* dropped_path, char** out_summary_json) {
  return guarded([&] {
    require(ctx, "ctx");
    require(in_path, "in_path");
    const auto r = instructav::verify_file(ctx->config, in_path, label_field ? label_field : "label",
                                           opt_str(kept_path), opt_str(dropped_path));
    ojson j;
    j["total"] = r.total;
    j["passed"] = r.passed;
    j["failed"] = r.failed;
    j["drop_rate"] = r.drop_rate;
    hand_out(dump(j), out_summary_json);
  });
}

iav_status iav_evaluate(iav_context* ctx, const char* gold_path, const char* pred_path, const char* labels_path,
                        const char* report_path, char** out_report_json, char** out_table) {
  return guarded([&] {
    require(ctx, "ctx");
    require(gold_path, "gold_path");
    require(pred_path, "pred_path");
    const auto report =
        instructav::evaluate_files(ctx->config, gold_path, pred_path, opt_str(labels_path), opt_str(report_path));
    hand_out(report.to_json(), out_report_json);
    hand_out(report.to_table(), out_table);
  });
}

iav_status iav_correlate(const char* scores_path, const char* pred_path, const char* gold_path, double fraction,
                         char** out_json) {
  return guarded([&] {
    require(scores_path, "scores_path");
    require(pred_path, "pred_path");
    require(gold_path, "gold_path");
    const auto q = instructav::correlate_files(scores_path, pred_path, gold_path, fraction);
    ojson j;
    j["fraction"] = fraction;
    j["top_accuracy"] = q.top_accuracy;
    j["bottom_accuracy"] = q.bottom_accuracy;
    j["top_ids"] = q.top_ids;
    j["bottom_ids"] = q.bottom_ids;
    hand_out(dump(j), out_json);
  });
}

iav_status iav_fewshot_prompts(iav_context* ctx, const char* test_path, const char* demos_path, const size_t* ks,
                               size_t n_ks, const char* out_path, size_t* out_count) {
  return guarded([&] {
    require(ctx, "ctx");
    require(test_path, "test_path");
    require(out_path, "out_path");
    if (n_ks > 0) require(ks, "ks");
    const std::vector<std::size_t> kv(ks, ks + n_ks);
    const auto n = instructav::fewshot_prompts_file(ctx->config, test_path, opt_str(demos_path), kv, out_path);
    if (out_count != nullptr) *out_count = n;
  });
}

iav_status iav_lora_demo(const iav_lora_demo_options* options, char** out_summary_json) {
  return guarded([&] {
    require(options, "options");
    instructav::lora::DemoTask task;
    task.d = options->d;
    task.rank = options->r;
    task.seed = options->seed;
    const auto trace = instructav::lora::train_demo(task, options->steps, options->lr);
    if (options->trace_csv_path != nullptr) instructav::write_text_file(options->trace_csv_path, trace.to_csv());
    if (options->adapter_path != nullptr) {
      instructav::write_text_file(options->adapter_path, instructav::lora::adapter_to_json(trace.adapter) + "\n");
    }
    if (trace.diverged_at_step) {
      throw Error(ErrorCode::kTrainingDiverged, "loss became non-finite",
                  {{"step", std::to_string(*trace.diverged_at_step)}});
    }
    ojson j;
    j["d"] = task.d;
    j["r"] = task.rank;
    j["steps"] = options->steps;
    j["lr"] = options->lr;
    j["seed"] = task.seed;
    j["base_accuracy"] = trace.base_accuracy;
    j["final_accuracy"] = trace.final_accuracy;
    j["initial_loss"] = trace.losses.front();
    j["final_loss"] = trace.losses.back();
    j["w0_unchanged"] = trace.base_unchanged();
    hand_out(dump(j), out_summary_json);
  });
}

iav_status iav_lora_param_budget(uint64_t d, uint64_t r, uint64_t layers, uint64_t matrices_per_layer,
                                 uint64_t base_params, uint64_t* out_trainable, double* out_ratio) {
  return guarded([&] {
    require(out_trainable, "out_trainable");
    require(out_ratio, "out_ratio");
    const auto b = instructav::lora::param_budget({d, r, layers, matrices_per_layer, base_params});
    *out_trainable = b.trainable;
    *out_ratio = b.ratio;
  });
}

iav_status iav_parse_answer(const char* text, int* out_label) {
  return guarded([&] {
    require(text, "text");
    require(out_label, "out_label");
    const auto parsed = instructav::parse_answer(text);
    *out_label = !parsed                                                   ? IAV_LABEL_NONE
                 : *parsed == instructav::ClassificationLabel::kSameAuthor ? IAV_LABEL_SAME_AUTHOR
                                                                           : IAV_LABEL_DIFFERENT_AUTHOR;
  });
}

iav_status iav_verify_alignment(const iav_context* ctx, const char* text, int label, char** out_json) {
  return guarded([&] {
    require(text, "text");
    require(out_json, "out_json");
    const instructav::PhrasePolicy policy = ctx != nullptr ? ctx->config.phrases : instructav::PhrasePolicy{};
    const auto r = instructav::verify_alignment(text, label_arg(label), policy);
    ojson j;
    j["passed"] = r.passed;
    j["reason"] = std::string(instructav::reason_name(r.reason));
    auto& matches = j["matched_phrases"] = ojson::array();
    for (const auto& m : r.matched_phrases) matches.push_back({{"phrase", m.phrase}, {"offset", m.offset}});
    hand_out(dump(j), out_json);
  });
}

iav_status iav_rouge(const char* candidate, const char* reference, double* out_r1, double* out_r2, double* out_rl) {
  return guarded([&] {
    require(candidate, "candidate");
    require(reference, "reference");
    const auto c = instructav::tokenize(candidate);
    const auto r = instructav::tokenize(reference);
    if (out_r1 != nullptr) *out_r1 = instructav::rouge_n(c, r, 1).f1;
    if (out_r2 != nullptr) *out_r2 = instructav::rouge_n(c, r, 2).f1;
    if (out_rl != nullptr) *out_rl = instructav::rouge_l(c, r).f1;
  });
}

iav_status iav_session_open(const iav_context* ctx, const char* ratings_path, iav_session** out) {
  return guarded([&] {
    require(ratings_path, "ratings_path");
    require(out, "out");
    *out = nullptr;
    const auto rubric = ctx != nullptr ? ctx->config.rubric : instructav::humaneval::RubricConfig{};
    if (!std::filesystem::exists(ratings_path)) instructav::write_text_file(ratings_path, "");
    *out = new iav_session{ratings_path, instructav::humaneval::Session::load(ratings_path, rubric)};
  });
}

iav_status iav_session_record(iav_session* session, const char* sample_id, const char* evaluator_id,
                              const char* system_name, int coverage, int relevance, int reasonableness,
                              int persuasiveness, const char* timestamp) {
  return guarded([&] {
    require(session, "session");
    require(sample_id, "sample_id");
    require(evaluator_id, "evaluator_id");
    require(system_name, "system_name");
    instructav::humaneval::Rating r{sample_id,      evaluator_id,   system_name, coverage, relevance,
                                    reasonableness, persuasiveness, opt_str(timestamp)};
    const auto line = instructav::humaneval::encode_rating(r);
    session->session.record(r);
    std::ofstream f(session->path, std::ios::app | std::ios::binary);
    f << line << '\n';
    f.flush();
    if (!f) throw Error(ErrorCode::kIo, "cannot append rating", {{"path", session->path}});
  });
}

iav_status iav_session_has(const iav_session* session, const char* sample_id, const char* evaluator_id,
                           const char* system_name, int* out_has) {
  return guarded([&] {
    require(session, "session");
    require(sample_id, "sample_id");
    require(evaluator_id, "evaluator_id");
    require(system_name, "system_name");
    require(out_has, "out_has");
    *out_has = session->session.contains(sample_id, evaluator_id, system_name) ? 1 : 0;
  });
}

iav_status iav_session_size(const iav_session* session, size_t* out_size) {
  return guarded([&] {
    require(session, "session");
    require(out_size, "out_size");
    *out_size = session->session.size();
  });
}

iav_status iav_session_coverage_max(const iav_session* session, const char* system_name, int* out_max) {
  return guarded([&] {
    require(session, "session");
    require(out_max, "out_max");
    *out_max = session->session.config().coverage_max_for(opt_str(system_name));
  });
}

iav_status iav_session_summary_json(const iav_session* session, char** out_json) {
  return guarded([&] {
    require(session, "session");
    require(out_json, "out_json");
    hand_out(instructav::humaneval::summarize(session->session).to_json(), out_json);
  });
}

iav_status iav_session_summary_table(const iav_session* session, char** out_table) {
  return guarded([&] {
    require(session, "session");
    require(out_table, "out_table");
    hand_out(instructav::humaneval::summarize(session->session).to_table(), out_table);
  });
}

iav_status iav_session_export_scores(const iav_session* session, const char* out_path, const char* system_name,
                                     int coverage_max, size_t* out_count) {
  return guarded([&] {
    require(session, "session");
    require(out_path, "out_path");
    const std::string system = opt_str(system_name);
    const int max = coverage_max > 0 ? coverage_max : session->session.config().coverage_max_for(system);
    const auto scores = instructav::humaneval::normalized_sample_scores(session->session, max, system);
    std::vector<std::string> lines;
    for (const auto& s : scores) lines.push_back(ojson{{"id", s.id}, {"human_mean", s.human_mean}}.dump());
    instructav::write_lines(out_path, lines);
    if (out_count != nullptr) *out_count = lines.size();
  });
}

void iav_session_close(iav_session* session) { delete session; }

}  // extern "C"
