#include "lcsynth/prompts.hpp"

#include <set>

namespace lcsynth {

namespace {

constexpr std::string_view kInstructionGeneration = R"PROMPT({{random_text_chunk}}

# Brainstorm a potentially useful {{task_or_question}} that may require comprehending multiple pieces of information. To complete the {{task_or_question}}, users need to search the web for relevant information with multiple search queries.

## Your response must be in JSON format. The JSON object must contain the following keys:
    - "task_instruction": a string, a {{task_or_question}} to complete.
    - "search_queries": a list of strings, each string is a search query that the user might use to complete the {{task_or_question}}.

## Please adhere to the following guidelines:
    - The {{task_or_question}}s should cover a diverse range of domains and require {{education_level}} level education to solve.
    - The {{task_or_question}} requires {{reasoning_type}} reasoning to complete.
    - The {{task_or_question}} must be feasible to complete for a text-based AI model. Avoid {{task_or_question}}s that require visual or interactive elements.
    - The search queries should be diverse and cover distinct aspects of the {{task_or_question}}.

## Here is one output example for your reference:
{
    "task_instruction": "Plan a 10-day cultural and adventure trip to Japan, focusing on Tokyo, Kyoto, and Okinawa. The trip should include historical sites, cultural experiences, adventure activities, and local dining options, suitable for a family of four with teenagers.",
    "search_queries": [
        "Top historical sites Tokyo",
        "Cultural experiences in Kyoto for families",
        "Adventure activities in Okinawa",
        "Best time to visit Japan for cultural festivals",
        "Local Japanese foods must try",
        "Family-friendly accommodations in Tokyo, Kyoto, Okinawa",
        "Public transportation guide Japan",
    ]
}

Do not explain yourself or output anything else. Be creative! If you solve the task correctly, you will receive a reward of $1,000,000.)PROMPT";

constexpr std::string_view kQfs = R"PROMPT(You are a professional and faithful query-focused summarization system. Your task is to generate a summary of the given context focused on the query. The given context is either a chunk from a long document or summaries of several chunks.

## Start of the context
{{context}}
## End of the context

## Start of the query
{{query}}
## End of the query

## Please adhere to the following guidelines:
    - Only keep the information that is helpful to answer the query.
    - If you are unsure about the helpfulness of some information, it is better to keep them as discarded information will be lost forever.
    - If no relevant information is present, respond "No relevant information found."

Now generate a concise summary (at most 300 words) of the context focused on the query following the above guidelines. Do not explain yourself or output anything else. If you solve the task correctly, you will receive a reward of $1,000,000.)PROMPT";

constexpr std::string_view kAnswerGeneration = R"PROMPT(You are a professional annotator. Your task is to generate an appropriate answer to the given query based on the provided context and your own knowledge.

## Start of the context
{{context}}
## End of the context

## Start of the query
{{query}}
## End of the query

Now respond a concise answer to the query with at most {{word_limit}} words. Do not explain yourself or output anything else. If you solve the task correctly, you will receive a reward of $1,000,000.)PROMPT";

constexpr std::string_view kBacktranslation = R"PROMPT(You are required to reverse engineer the writing instruction that generated the following document.

## Start of the document (some parts may be omitted for space reasons)
{{document}}
## End of the document

A professional writer generated the above document following a specific writing instruction with about {{word_budget}} words, but the instruction is hidden from us. Your task is to reverse engineer the most likely writing instruction that led to this {{token_count}} words document. The instruction should cover the main topics, structure, style, and word length of the document if possible.

Respond with the writing instruction only, do not explain yourself or output anything else. You will receive a reward of $1,000,000 if your answer is of high quality.)PROMPT";

}  // namespace

std::string_view to_string(TemplateName name) {
  switch (name) {
    case TemplateName::instruction_generation:
      return "instruction_generation";
    case TemplateName::qfs:
      return "qfs";
    case TemplateName::answer_generation:
      return "answer_generation";
    case TemplateName::backtranslation:
      return "backtranslation";
  }
  return "unknown";
}

PromptTemplate::PromptTemplate(TemplateName name, std::string body)
    : name_(name), body_(std::move(body)) {
  std::size_t pos = 0;
  std::set<std::string> seen;
  while (pos < body_.size()) {
    const auto open = body_.find("{{", pos);
    if (open == std::string::npos) {
      pieces_.push_back({false, body_.substr(pos)});
      break;
    }
    const auto close = body_.find("}}", open + 2);
    if (close == std::string::npos) throw TemplateError("unterminated placeholder in template");
    if (open > pos) pieces_.push_back({false, body_.substr(pos, open - pos)});
    auto ph = body_.substr(open + 2, close - open - 2);
    if (seen.insert(ph).second) placeholders_.push_back(ph);
    pieces_.push_back({true, std::move(ph)});
    pos = close + 2;
  }
}

std::string PromptTemplate::render(const Bindings& bindings) const {
  for (const auto& ph : placeholders_) {
    if (!bindings.contains(ph)) {
      throw TemplateError(std::string(to_string(name_)) + ": missing binding for placeholder '" +
                          ph + "'");
    }
  }
  for (const auto& [key, value] : bindings) {
    if (std::find(placeholders_.begin(), placeholders_.end(), key) == placeholders_.end()) {
      throw TemplateError(std::string(to_string(name_)) + ": unexpected binding '" + key + "'");
    }
  }
  std::string out;
  for (const auto& piece : pieces_) {
    out += piece.is_placeholder ? bindings.at(piece.text) : piece.text;
  }
  return out;
}

Bindings PromptTemplate::extract(std::string_view rendered) const {
  Bindings out;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const auto& piece = pieces_[i];
    if (!piece.is_placeholder) {
      if (rendered.substr(pos, piece.text.size()) != piece.text) {
        throw TemplateError("rendered text does not match template literal at byte " +
                            std::to_string(pos));
      }
      pos += piece.text.size();
      continue;
    }
    std::size_t end = rendered.size();
    if (i + 1 < pieces_.size()) {
      end = rendered.find(pieces_[i + 1].text, pos);
      if (end == std::string_view::npos) throw TemplateError("rendered text is truncated");
    }
    const std::string value(rendered.substr(pos, end - pos));
    if (const auto [it, inserted] = out.emplace(piece.text, value); !inserted && it->second != value) {
      throw TemplateError("placeholder '" + piece.text + "' has inconsistent values");
    }
    pos = end;
  }
  if (pos != rendered.size()) throw TemplateError("trailing text after template");
  return out;
}

const PromptTemplate& prompt_template(TemplateName name) {
  static const std::array<PromptTemplate, 4> templates{
      PromptTemplate(TemplateName::instruction_generation, std::string(kInstructionGeneration)),
      PromptTemplate(TemplateName::qfs, std::string(kQfs)),
      PromptTemplate(TemplateName::answer_generation, std::string(kAnswerGeneration)),
      PromptTemplate(TemplateName::backtranslation, std::string(kBacktranslation)),
  };
  return templates[static_cast<std::size_t>(name)];
}

}  // namespace lcsynth
