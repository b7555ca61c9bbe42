#include "instructav/prompting.hpp"

#include <cstdlib>
#include <filesystem>

#include "instructav/error.hpp"
#include "instructav/jsonl.hpp"

#ifndef INSTRUCTAV_DEFAULT_TEMPLATE_DIR
#define INSTRUCTAV_DEFAULT_TEMPLATE_DIR "templates"
#endif

namespace instructav {

namespace {

bool is_placeholder_char(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '_';
}

// Calls on_text(literal) and on_placeholder(name) in order of appearance.
template <typename OnText, typename OnPlaceholder>
void scan_template(std::string_view body, OnText on_text, OnPlaceholder on_placeholder) {
  std::size_t pos = 0;
  while (pos < body.size()) {
    const std::size_t open = body.find('{', pos);
    if (open == std::string_view::npos) break;
    std::size_t close = open + 1;
    while (close < body.size() && is_placeholder_char(body[close])) ++close;
    if (close < body.size() && body[close] == '}' && close > open + 1) {
      on_text(body.substr(pos, open - pos));
      on_placeholder(std::string(body.substr(open + 1, close - open - 1)));
      pos = close + 1;
    } else {
      on_text(body.substr(pos, open + 1 - pos));
      pos = open + 1;
    }
  }
  on_text(body.substr(pos));
}

std::string demonstration_block(const std::vector<Demonstration>& demos,
                                const PromptOptions& options) {
  if (demos.empty()) return {};
  std::string out = "\n\nPlease follow the format of the analysis method in the demostrations.\n";
  out += "You will be given " + std::to_string(demos.size()) + " demostrations.\n";
  for (const auto& d : demos) {
    out += "### Demostration Start:\n";
    out += "Text 1: " + truncate_text(d.pair.text1, options.char_budget) + "\n";
    out += "Text 2: " + truncate_text(d.pair.text2, options.char_budget) + "\n";
    out += d.explanation;
    if (d.explanation.back() != '\n') out += '\n';
  }
  out.pop_back();
  return out;
}

}  // namespace

PromptTemplate::PromptTemplate(std::string name, std::string body)
    : name_(std::move(name)), body_(std::move(body)) {
  scan_template(
      body_, [](std::string_view) {}, [this](std::string p) { required_.insert(std::move(p)); });
}

PromptTemplate PromptTemplate::load(const std::string& dir, const std::string& file_name) {
  const std::string path = (std::filesystem::path(dir) / file_name).string();
  std::string body;
  try {
    body = read_text_file(path);
  } catch (const Error&) {
    throw Error(ErrorCode::kTemplate, "template asset not found", {{"path", path}});
  }
  if (!body.empty() && body.back() == '\n') body.pop_back();
  return PromptTemplate(file_name, std::move(body));
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& bindings) const {
  for (const auto& p : required_) {
    if (!bindings.count(p)) {
      throw Error(ErrorCode::kTemplate, "unbound placeholder {" + p + "}",
                  {{"template", name_}, {"placeholder", p}});
    }
  }
  std::string out;
  out.reserve(body_.size());
  scan_template(
      body_, [&](std::string_view t) { out += t; },
      [&](const std::string& p) { out += bindings.at(p); });
  return out;
}

TemplateSet TemplateSet::load(const std::string& dir) {
  return TemplateSet{
      PromptTemplate::load(dir, std::string(kExplanationPromptFile)),
      PromptTemplate::load(dir, std::string(kInstructionClsFile)),
      PromptTemplate::load(dir, std::string(kInstructionClsExplFile)),
      PromptTemplate::load(dir, std::string(kFewshotEvalFile)),
  };
}

std::string default_template_dir() {
  if (const char* env = std::getenv("INSTRUCTAV_TEMPLATE_DIR"); env && *env) return env;
  return INSTRUCTAV_DEFAULT_TEMPLATE_DIR;
}

std::string truncate_text(std::string_view text, std::size_t budget) {
  if (budget == 0 || text.size() <= budget) return std::string(text);
  std::size_t cut = budget;
  // Back off over UTF-8 continuation bytes.
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
  return std::string(text.substr(0, cut)) + std::string(kTruncationMarker);
}

std::string label_clause(ClassificationLabel label) {
  const char* who = label == ClassificationLabel::kSameAuthor ? "the same author" : "different authors";
  return std::string("Text1 and Text2 are written by ") + who +
         ". Please analyze their writing styles and explain why they are written by " + who + ".";
}

std::string feature_checklist() {
  std::string out;
  int n = 1;
  for (auto f : kAllLinguisticFeatures) {
    if (n > 1) out += '\n';
    out += std::to_string(n++) + ". " + std::string(feature_checklist_text(f));
  }
  return out;
}

std::string build_explanation_prompt(const TemplateSet& templates, const AVPair& pair,
                                     ClassificationLabel label,
                                     const std::vector<Demonstration>& demos,
                                     const PromptOptions& options) {
  pair.validate();
  for (const auto& d : demos) {
    if (is_blank(d.explanation)) {
      throw Error(ErrorCode::kInvalidArgument, "demonstration explanation is empty",
                  {{"id", d.pair.id}});
    }
  }
  return templates.explanation.render({
      {"LABEL_CLAUSE", label_clause(label)},
      {"FEATURE_CHECKLIST", feature_checklist()},
      {"TEXT1", truncate_text(pair.text1, options.char_budget)},
      {"TEXT2", truncate_text(pair.text2, options.char_budget)},
      {"DEMONSTRATIONS", demonstration_block(demos, options)},
  });
}

std::string build_instruction(const TemplateSet& templates, const AVPair& pair,
                              DatasetSetting setting, const PromptOptions& options) {
  pair.validate();
  const PromptTemplate& t = setting == DatasetSetting::kClassificationOnly
                                ? templates.instruction_cls
                                : templates.instruction_cls_expl;
  return t.render({
      {"TEXT1", truncate_text(pair.text1, options.char_budget)},
      {"TEXT2", truncate_text(pair.text2, options.char_budget)},
  });
}

std::string build_fewshot_eval_prompt(const TemplateSet& templates, const AVPair& pair,
                                      const std::vector<AVPair>& demos, std::size_t k,
                                      const PromptOptions& options) {
  if (k == 0) return build_instruction(templates, pair, DatasetSetting::kClassificationOnly, options);
  if (k % 2 != 0) {
    throw Error(ErrorCode::kInvalidArgument, "shot count must be even for balanced demonstrations",
                {{"k", std::to_string(k)}});
  }
  if (k > demos.size()) {
    throw Error(ErrorCode::kInvalidArgument, "not enough demonstrations",
                {{"k", std::to_string(k)}, {"available", std::to_string(demos.size())}});
  }
  std::vector<const AVPair*> yes;
  std::vector<const AVPair*> no;
  for (const auto& d : demos) {
    auto& bucket = d.label == ClassificationLabel::kSameAuthor ? yes : no;
    if (bucket.size() < k / 2) bucket.push_back(&d);
  }
  if (yes.size() < k / 2 || no.size() < k / 2) {
    throw Error(ErrorCode::kInvalidArgument, "cannot balance demonstrations",
                {{"k", std::to_string(k)},
                 {"yes", std::to_string(yes.size())},
                 {"no", std::to_string(no.size())}});
  }
  std::string block;
  for (std::size_t i = 0; i < k / 2; ++i) {
    for (const AVPair* d : {yes[i], no[i]}) {
      block += build_instruction(templates, *d, DatasetSetting::kClassificationOnly, options);
      block += '\n';
      block += label_to_answer_phrase(d->label);
      block += "\n\n";
    }
  }
  return templates.fewshot_eval.render({
      {"DEMONSTRATIONS", block},
      {"QUERY", build_instruction(templates, pair, DatasetSetting::kClassificationOnly, options)},
  });
}

}  // namespace instructav
