#include "instructav/pipeline.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "instructav/consistency.hpp"
#include "instructav/error.hpp"
#include "instructav/jsonl.hpp"
#include "instructav/prompting.hpp"
#include "json.hpp"

namespace instructav {

namespace {

using ojson = nlohmann::ordered_json;

std::string dump_line(const ojson& j) { return j.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace); }

TemplateSet load_templates(const ToolkitConfig& config) {
  return TemplateSet::load(config.template_dir.empty() ? default_template_dir() : config.template_dir);
}

std::unique_ptr<Backend> backend_for(const ToolkitConfig& config, Backend* override_backend) {
  if (override_backend != nullptr) return nullptr;
  return make_backend(config.backend);
}

GenerationRequest make_request(const ToolkitConfig& config, std::string prompt, const std::string& id) {
  GenerationRequest req;
  req.prompt = std::move(prompt);
  req.max_new_tokens = config.max_new_tokens;
  req.temperature = config.temperature;
  req.metadata["id"] = id;
  return req;
}

AVPair pair_of(const InstructionSample& s) { return AVPair{s.id, s.text1, s.text2, s.label}; }

ojson parse_object(const std::string& line, std::size_t line_no, const std::string& path) {
  auto j = ojson::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(ErrorCode::kMalformedLine, "line is not a JSON object",
                {{"path", path}, {"line", std::to_string(line_no)}});
  }
  return j;
}

std::string string_field(const ojson& j, const std::string& key, std::size_t line_no, const std::string& path) {
  const auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    throw Error(ErrorCode::kMalformedLine, "missing string field",
                {{"path", path}, {"line", std::to_string(line_no)}, {"field", key}});
  }
  return it->get<std::string>();
}

}  // namespace

std::string BuildResult::to_json() const {
  ojson j;
  j["n_authors"] = stats.n_authors;
  j["n_train"] = stats.n_train;
  j["n_test"] = stats.n_test;
  j["avg_length_words"] = stats.avg_length_words;
  j["pool"] = pool;
  j["generated"] = generated;
  j["generation_failed"] = generation_failed;
  j["verified"] = verified;
  j["dropped"] = dropped;
  j["drop_rate"] = drop_rate;
  j["train_path"] = train_path;
  j["test_path"] = test_path;
  if (!dropped_path.empty()) j["dropped_path"] = dropped_path;
  j["log_path"] = log_path;
  return j.dump(2, ' ', false, nlohmann::json::error_handler_t::replace);
}

std::vector<Demonstration> load_demonstrations(const ToolkitConfig& config) {
  if (!config.demos_path || config.demo_count == 0) return {};
  const auto samples = read_samples(*config.demos_path);
  std::vector<Demonstration> demos;
  for (const auto& s : samples) {
    if (demos.size() == config.demo_count) break;
    if (!s.explanation || is_blank(*s.explanation)) continue;
    demos.push_back(Demonstration{pair_of(s), s.label, *s.explanation});
  }
  if (demos.size() < config.demo_count) {
    throw Error(ErrorCode::kConfig, "not enough demonstrations with explanations",
                {{"path", *config.demos_path},
                 {"wanted", std::to_string(config.demo_count)},
                 {"found", std::to_string(demos.size())}});
  }
  return demos;
}

BuildResult build_dataset(const ToolkitConfig& config, const BuildOptions& options, Backend* backend) {
  if (options.out_prefix.empty()) throw Error(ErrorCode::kUsage, "output prefix is required");
  const auto templates = load_templates(config);
  const Corpus corpus = load_corpus(options.corpus_path, SourceDataset::parse(config.source), options.corpus_name);
  corpus.validate();
  const std::size_t pool = options.pool == 0 ? options.train_n + options.test_n : options.pool;
  const auto pairs = sample_pairs(corpus, pool, options.seed, config.dedup);
  const PromptOptions prompt_options{config.char_budget};

  BuildResult result;
  result.pool = pool;
  std::vector<std::string> log;
  {
    ojson j;
    j["stage"] = "sample";
    j["corpus"] = corpus.name;
    j["entries"] = corpus.entries.size();
    j["authors"] = corpus.author_count();
    j["pairs"] = pairs.size();
    j["seed"] = options.seed;
    log.push_back(dump_line(j));
  }

  std::map<std::string, std::string> explanations;
  if (options.setting == DatasetSetting::kClassificationAndExplanation) {
    const auto demos = load_demonstrations(config);
    std::vector<GenerationRequest> requests;
    requests.reserve(pairs.size());
    for (const auto& p : pairs) {
      requests.push_back(
          make_request(config, build_explanation_prompt(templates, p, p.label, demos, prompt_options), p.id));
    }
    auto owned = backend_for(config, backend);
    Backend& be = backend != nullptr ? *backend : *owned;
    const auto items = generate_batch(requests, be, static_cast<std::size_t>(config.backend.max_in_flight));

    std::vector<VerificationInput> inputs;
    std::vector<std::string> failure_lines;
    for (std::size_t i = 0; i < items.size(); ++i) {
      if (items[i].ok()) {
        inputs.push_back(VerificationInput{pairs[i], pairs[i].label, items[i].result->text});
      } else {
        ojson f;
        f["id"] = pairs[i].id;
        f["label"] = std::string(label_to_wire(pairs[i].label));
        f["reason"] = "GenerationFailed";
        f["error"] = ojson::parse(items[i].error->to_json());
        failure_lines.push_back(dump_line(f));
      }
    }
    result.generated = inputs.size();
    result.generation_failed = failure_lines.size();
    {
      ojson j;
      j["stage"] = "generate";
      j["backend"] = be.name();
      j["requested"] = requests.size();
      j["generated"] = result.generated;
      j["failed"] = result.generation_failed;
      log.push_back(dump_line(j));
    }

    std::vector<std::string> dropped_lines;
    if (!inputs.empty()) {
      const auto outcome = filter_verified(inputs, config.phrases);
      for (const auto& k : outcome.kept) {
        explanations[k.input.pair.id] = strip_leading_answer(k.input.generated_text);
      }
      for (const auto& d : outcome.dropped) dropped_lines.push_back(encode_dropped(d));
      result.verified = outcome.kept.size();
      result.dropped = outcome.dropped.size();
      std::map<std::string, std::size_t> by_reason;
      for (const auto& d : outcome.dropped) ++by_reason[std::string(reason_name(d.result.reason))];
      ojson j;
      j["stage"] = "verify";
      j["verified"] = result.verified;
      j["dropped"] = result.dropped;
      j["dropped_by_reason"] = by_reason;
      log.push_back(dump_line(j));
    }
    dropped_lines.insert(dropped_lines.end(), failure_lines.begin(), failure_lines.end());
    result.drop_rate = pool == 0 ? 0.0
                                 : static_cast<double>(result.dropped + result.generation_failed) /
                                       static_cast<double>(pool);
    result.dropped_path = options.out_prefix + "_dropped.jsonl";
    write_lines(result.dropped_path, dropped_lines);
  }

  DatasetSplit split = build_split(templates, pairs, explanations, options.setting, options.train_n, options.test_n,
                                   options.seed, prompt_options);
  split.stats = compute_stats(corpus, split);
  result.stats = split.stats;
  std::tie(result.train_path, result.test_path) = write_jsonl(split, options.out_prefix);
  {
    ojson j;
    j["stage"] = "split";
    j["setting"] = std::string(setting_to_wire(options.setting));
    j["train"] = split.train.size();
    j["test"] = split.test.size();
    j["n_authors"] = split.stats.n_authors;
    j["avg_length_words"] = split.stats.avg_length_words;
    j["drop_rate"] = result.drop_rate;
    log.push_back(dump_line(j));
  }
  result.log_path = options.out_prefix + "_log.jsonl";
  write_lines(result.log_path, log);
  return result;
}

std::size_t generate_predictions(const ToolkitConfig& config, const std::string& in_path,
                                 const std::string& out_path, Backend* backend) {
  const auto samples = read_samples(in_path);
  if (samples.empty()) throw Error(ErrorCode::kInvalidArgument, "no samples to generate for", {{"path", in_path}});
  std::vector<GenerationRequest> requests;
  for (const auto& s : samples) requests.push_back(make_request(config, s.instruction, s.id));
  auto owned = backend_for(config, backend);
  Backend& be = backend != nullptr ? *backend : *owned;
  const auto items = generate_batch(requests, be, static_cast<std::size_t>(config.backend.max_in_flight));
  std::vector<PredictionRecord> out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!items[i].ok()) {
      auto ctx = items[i].error->context();
      ctx["id"] = samples[i].id;
      throw Error(items[i].error->code(), items[i].error->what(), ctx);
    }
    out.push_back(PredictionRecord{samples[i].id, items[i].result->text});
  }
  write_predictions(out_path, out);
  return out.size();
}

VerifyFileResult verify_file(const ToolkitConfig& config, const std::string& in_path, const std::string& label_field,
                             const std::string& kept_path, const std::string& dropped_path) {
  const auto lines = read_lines(in_path);
  std::vector<VerificationInput> inputs;
  std::vector<std::string> raw;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto j = parse_object(lines[i], i + 1, in_path);
    VerificationInput in;
    in.pair.id = string_field(j, "id", i + 1, in_path);
    const auto label = label_from_wire(string_field(j, label_field, i + 1, in_path));
    if (!label) {
      throw Error(ErrorCode::kMalformedLine, "unrecognised label",
                  {{"path", in_path}, {"line", std::to_string(i + 1)}, {"field", label_field}});
    }
    in.label = *label;
    in.pair.label = *label;
    in.pair.text1 = j.value("text1", "");
    in.pair.text2 = j.value("text2", "");
    in.generated_text = string_field(j, "output_text", i + 1, in_path);
    inputs.push_back(std::move(in));
    raw.push_back(lines[i]);
  }
  const auto outcome = filter_verified(inputs, config.phrases);
  VerifyFileResult r{inputs.size(), outcome.kept.size(), outcome.dropped.size(), outcome.drop_rate};
  if (!kept_path.empty()) {
    std::set<std::string> kept_ids;
    for (const auto& k : outcome.kept) kept_ids.insert(k.input.pair.id);
    std::vector<std::string> kept_lines;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      if (kept_ids.count(inputs[i].pair.id)) kept_lines.push_back(raw[i]);
    }
    write_lines(kept_path, kept_lines);
  }
  if (!dropped_path.empty()) {
    std::vector<std::string> dropped_lines;
    for (const auto& d : outcome.dropped) dropped_lines.push_back(encode_dropped(d));
    write_lines(dropped_path, dropped_lines);
  }
  return r;
}

std::map<std::string, std::string> read_explanation_labels(const std::string& path) {
  const auto lines = read_lines(path);
  std::map<std::string, std::string> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto j = parse_object(lines[i], i + 1, path);
    const auto id = string_field(j, "id", i + 1, path);
    if (!out.emplace(id, string_field(j, "explanation", i + 1, path)).second) {
      throw Error(ErrorCode::kDuplicateId, "duplicate explanation label", {{"path", path}, {"id", id}});
    }
  }
  return out;
}

ScoreReport evaluate_files(const ToolkitConfig& config, const std::string& gold_path, const std::string& pred_path,
                           const std::string& labels_path, const std::string& report_path) {
  const auto gold = read_samples(gold_path);
  const auto preds = read_predictions(pred_path);
  if (preds.empty()) throw Error(ErrorCode::kMissingPrediction, "prediction file is empty", {{"path", pred_path}});
  std::map<std::string, std::string> labels;
  if (!labels_path.empty()) {
    labels = read_explanation_labels(labels_path);
  } else {
    for (const auto& s : gold) {
      if (s.explanation) labels[s.id] = *s.explanation;
    }
  }
  std::unique_ptr<EmbeddingProvider> provider;
  if (config.embeddings_path) {
    provider = std::make_unique<TableEmbeddingProvider>(TableEmbeddingProvider::load(*config.embeddings_path));
  } else {
    provider = std::make_unique<HashEmbeddingProvider>();
  }
  auto report = aggregate_report(preds, gold, labels, *provider, ReportOptions{config.strip_answer});
  if (!report_path.empty()) write_text_file(report_path, report.to_json() + "\n");
  return report;
}

QuartileAccuracy correlate_files(const std::string& scores_path, const std::string& pred_path,
                                 const std::string& gold_path, double fraction) {
  const auto gold = read_samples(gold_path);
  const auto preds = read_predictions(pred_path);
  std::map<std::string, ClassificationLabel> gold_labels;
  for (const auto& s : gold) gold_labels[s.id] = s.label;
  std::map<std::string, bool> correct;
  for (const auto& p : preds) {
    const auto it = gold_labels.find(p.id);
    if (it == gold_labels.end()) throw Error(ErrorCode::kUnknownId, "prediction id not in gold", {{"id", p.id}});
    const auto parsed = parse_answer(p.output_text);
    correct[p.id] = parsed && *parsed == it->second;
  }
  const auto lines = read_lines(scores_path);
  std::vector<ScoredSample> samples;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto j = parse_object(lines[i], i + 1, scores_path);
    const auto id = string_field(j, "id", i + 1, scores_path);
    const auto score_it = j.contains("human_mean") ? j.find("human_mean") : j.find("score");
    if (score_it == j.end() || !score_it->is_number()) {
      throw Error(ErrorCode::kMalformedLine, "missing numeric score",
                  {{"path", scores_path}, {"line", std::to_string(i + 1)}});
    }
    const auto c = correct.find(id);
    if (c == correct.end()) throw Error(ErrorCode::kMissingPrediction, "scored sample has no prediction", {{"id", id}});
    if (!seen.insert(id).second) throw Error(ErrorCode::kDuplicateId, "duplicate scored sample", {{"id", id}});
    samples.push_back(ScoredSample{id, score_it->get<double>(), c->second});
  }
  return quartile_accuracy(samples, fraction);
}

std::size_t fewshot_prompts_file(const ToolkitConfig& config, const std::string& test_path,
                                 const std::string& demos_path, const std::vector<std::size_t>& ks,
                                 const std::string& out_path) {
  const auto templates = load_templates(config);
  const auto test = read_samples(test_path);
  std::vector<AVPair> demos;
  if (!demos_path.empty()) {
    for (const auto& s : read_samples(demos_path)) demos.push_back(pair_of(s));
  }
  const PromptOptions prompt_options{config.char_budget};
  std::vector<std::string> lines;
  for (const std::size_t k : ks) {
    for (const auto& s : test) {
      ojson j;
      j["id"] = s.id;
      j["k"] = k;
      j["label"] = std::string(label_to_wire(s.label));
      j["prompt"] = build_fewshot_eval_prompt(templates, pair_of(s), demos, k, prompt_options);
      lines.push_back(dump_line(j));
    }
  }
  write_lines(out_path, lines);
  return lines.size();
}

}  // namespace instructav
