#pragma once

#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lcsynth {

/// Bumped whenever a template body changes; recorded in run manifests.
inline constexpr std::string_view kPromptTemplateVersion = "1";

enum class TemplateName { instruction_generation, qfs, answer_generation, backtranslation };

std::string_view to_string(TemplateName name);

class TemplateError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Bindings = std::map<std::string, std::string>;

/// A prompt body with `{{name}}` placeholders. Single braces are literal
/// text (the instruction prompt contains a JSON example).
class PromptTemplate {
 public:
  PromptTemplate(TemplateName name, std::string body);

  TemplateName name() const { return name_; }
  const std::string& body() const { return body_; }

  /// Distinct placeholder names in order of first appearance.
  const std::vector<std::string>& placeholders() const { return placeholders_; }

  /// Substitutes every placeholder. Throws TemplateError naming the first
  /// missing or unexpected binding. Empty strings are legal values.
  std::string render(const Bindings& bindings) const;

  /// Inverse of render: recovers the bindings from a rendered prompt by
  /// matching the literal text around each placeholder. Throws when the
  /// text does not match the template.
  Bindings extract(std::string_view rendered) const;

 private:
  struct Piece {
    bool is_placeholder;
    std::string text;  // literal text or placeholder name
  };

  TemplateName name_;
  std::string body_;
  std::vector<Piece> pieces_;
  std::vector<std::string> placeholders_;
};

const PromptTemplate& prompt_template(TemplateName name);

inline std::string render_prompt(TemplateName name, const Bindings& bindings) {
  return prompt_template(name).render(bindings);
}

// Placeholder names used by the stored templates.
namespace placeholder {
inline constexpr const char* kRandomTextChunk = "random_text_chunk";
inline constexpr const char* kTaskOrQuestion = "task_or_question";
inline constexpr const char* kEducationLevel = "education_level";
inline constexpr const char* kReasoningType = "reasoning_type";
inline constexpr const char* kContext = "context";
inline constexpr const char* kQuery = "query";
inline constexpr const char* kWordLimit = "word_limit";
inline constexpr const char* kDocument = "document";
inline constexpr const char* kWordBudget = "word_budget";
inline constexpr const char* kTokenCount = "token_count";
}  // namespace placeholder

// Option sets drawn by callers for the choice placeholders.
inline constexpr std::array<std::string_view, 2> kTaskOrQuestionOptions{"task", "question"};
inline constexpr std::array<std::string_view, 3> kEducationLevelOptions{"high school", "college",
                                                                        "PhD"};
inline constexpr std::array<std::string_view, 3> kReasoningTypeOptions{"mathematical", "logical",
                                                                       "common sense"};
inline constexpr std::array<int, 4> kAnswerWordLimits{200, 300, 400, 500};
inline constexpr std::array<int, 4> kBacktranslationWordBudgets{20, 50, 100, 200};

inline constexpr std::string_view kNoRelevantInformation = "No relevant information found.";
inline constexpr int kQfsSummaryWordCap = 300;

}  // namespace lcsynth
