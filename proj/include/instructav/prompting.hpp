#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "instructav/core.hpp"

namespace instructav {

// A text asset with {NAME} placeholders. Placeholder names are upper-case
// letters, digits and underscores.
class PromptTemplate {
 public:
  PromptTemplate(std::string name, std::string body);

  // Reads `<dir>/<file_name>`; a single trailing newline is dropped.
  static PromptTemplate load(const std::string& dir, const std::string& file_name);

  const std::string& name() const noexcept { return name_; }
  const std::string& body() const noexcept { return body_; }
  const std::set<std::string>& required_placeholders() const noexcept { return required_; }

  // Single-pass substitution; bound values are never re-scanned. Throws
  // Error(kTemplate) naming the first unbound placeholder.
  std::string render(const std::map<std::string, std::string>& bindings) const;

 private:
  std::string name_;
  std::string body_;
  std::set<std::string> required_;
};

inline constexpr std::string_view kExplanationPromptFile = "explanation_prompt.txt";
inline constexpr std::string_view kInstructionClsFile = "instruction_cls.txt";
inline constexpr std::string_view kInstructionClsExplFile = "instruction_cls_expl.txt";
inline constexpr std::string_view kFewshotEvalFile = "fewshot_eval.txt";

struct TemplateSet {
  PromptTemplate explanation;
  PromptTemplate instruction_cls;
  PromptTemplate instruction_cls_expl;
  PromptTemplate fewshot_eval;

  static TemplateSet load(const std::string& dir);
};

// Directory holding the bundled templates: $INSTRUCTAV_TEMPLATE_DIR if set,
// otherwise the build-time default.
std::string default_template_dir();

struct Demonstration {
  AVPair pair;
  ClassificationLabel label = ClassificationLabel::kSameAuthor;
  std::string explanation;
};

struct PromptOptions {
  // Maximum bytes of each text embedded in a prompt; 0 disables truncation.
  std::size_t char_budget = 0;
};

inline constexpr std::string_view kTruncationMarker = "......[Truncated due to length restriction]";

// Cuts `text` to at most `budget` bytes on a UTF-8 boundary and appends the
// truncation marker. Unchanged when budget is 0 or the text already fits.
std::string truncate_text(std::string_view text, std::size_t budget);

// "Text1 and Text2 are written by the same author. Please analyze ..."
std::string label_clause(ClassificationLabel label);

// The numbered "1. writing style." ... "11. any other relevant aspect." lines.
std::string feature_checklist();

std::string build_explanation_prompt(const TemplateSet& templates, const AVPair& pair,
                                     ClassificationLabel label,
                                     const std::vector<Demonstration>& demos,
                                     const PromptOptions& options = {});

std::string build_instruction(const TemplateSet& templates, const AVPair& pair,
                              DatasetSetting setting, const PromptOptions& options = {});

// k demonstrations (k/2 per class, alternating yes/no starting with yes), each
// followed by its answer phrase, then the unanswered query. Demonstrations are
// taken in list order within each class; the label of each is `pair.label`.
std::string build_fewshot_eval_prompt(const TemplateSet& templates, const AVPair& pair,
                                      const std::vector<AVPair>& demos, std::size_t k,
                                      const PromptOptions& options = {});

}  // namespace instructav
