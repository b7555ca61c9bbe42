#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "instructav/config.hpp"
#include "instructav/core.hpp"
#include "instructav/dataset.hpp"
#include "instructav/genclient.hpp"
#include "instructav/metrics.hpp"

namespace instructav {

struct BuildOptions {
  std::string corpus_path;
  std::string corpus_name;  // empty: file stem
  DatasetSetting setting = DatasetSetting::kClassificationAndExplanation;
  std::size_t pool = 0;
  std::size_t train_n = kDefaultTrainSize;
  std::size_t test_n = kDefaultTestSize;
  std::uint64_t seed = 0;
  std::string out_prefix;
};

struct BuildResult {
  DatasetStats stats;
  std::size_t pool = 0;
  std::size_t generated = 0;
  std::size_t generation_failed = 0;
  std::size_t verified = 0;
  std::size_t dropped = 0;
  // (verification drops + generation failures) / pool; 0 in the cls setting.
  double drop_rate = 0.0;
  std::string train_path;
  std::string test_path;
  std::string dropped_path;  // empty in the cls setting
  std::string log_path;

  std::string to_json() const;
};

// sample -> explanation prompt -> generate -> verify -> split -> write.
// Outputs: <prefix>_train.jsonl, <prefix>_test.jsonl, <prefix>_log.jsonl and,
// with explanations, <prefix>_dropped.jsonl. The cls setting skips
// generation and verification. `backend` overrides the configured backend.
BuildResult build_dataset(const ToolkitConfig& config, const BuildOptions& options, Backend* backend = nullptr);

// Demonstrations from config.demos_path (samples carrying explanations); the
// first config.demo_count are used. None when no path is configured.
std::vector<Demonstration> load_demonstrations(const ToolkitConfig& config);

// Runs each sample's instruction through the backend and writes
// PredictionRecord lines in input order. Failed items abort with their error.
std::size_t generate_predictions(const ToolkitConfig& config, const std::string& in_path,
                                 const std::string& out_path, Backend* backend = nullptr);

struct VerifyFileResult {
  std::size_t total = 0;
  std::size_t passed = 0;
  std::size_t failed = 0;
  double drop_rate = 0.0;
};

// Input lines carry "id", the label under `label_field` and the generated text
// under "output_text"; "text1"/"text2" are optional. Passing records are
// copied to `kept_path`, failures written as audit records to `dropped_path`.
VerifyFileResult verify_file(const ToolkitConfig& config, const std::string& in_path,
                             const std::string& label_field, const std::string& kept_path,
                             const std::string& dropped_path);

// Reads {"id","explanation"} lines.
std::map<std::string, std::string> read_explanation_labels(const std::string& path);

// Without labels, gold explanations serve as references. Writes the JSON
// report when `report_path` is non-empty.
ScoreReport evaluate_files(const ToolkitConfig& config, const std::string& gold_path,
                           const std::string& pred_path, const std::string& labels_path,
                           const std::string& report_path);

// Scores lines are {"id","human_mean"} as written by the annotate subcommand
// (a "score" key is also accepted). Correctness comes from the predictions.
QuartileAccuracy correlate_files(const std::string& scores_path, const std::string& pred_path,
                                 const std::string& gold_path, double fraction = 0.25);

// One {"id","k","label","prompt"} line per test sample and k. Demonstrations
// are read from `demos_path` in file order.
std::size_t fewshot_prompts_file(const ToolkitConfig& config, const std::string& test_path,
                                 const std::string& demos_path, const std::vector<std::size_t>& ks,
                                 const std::string& out_path);

}  // namespace instructav
