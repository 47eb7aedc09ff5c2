#include "lcsynth/mock_backends.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "lcsynth/random.hpp"
#include "lcsynth/text.hpp"

namespace lcsynth {

using nlohmann::json;

ReplayBackend::ReplayBackend(const std::vector<LlmExchange>& exchanges) {
  for (const auto& ex : exchanges) responses_.emplace(ex.request.prompt, ex.response);
}

std::string ReplayBackend::chat(const ChatRequest& request) {
  const auto it = responses_.find(request.prompt);
  if (it == responses_.end()) throw LlmError("replay log has no exchange for this prompt", false);
  return it->second;
}

std::optional<DetectedPrompt> detect_prompt(const std::string& prompt) {
  for (const auto name : {TemplateName::qfs, TemplateName::answer_generation,
                          TemplateName::backtranslation, TemplateName::instruction_generation}) {
    try {
      return DetectedPrompt{name, prompt_template(name).extract(prompt)};
    } catch (const TemplateError&) {
    }
  }
  return std::nullopt;
}

namespace {

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words{
      "a",     "an",   "and",  "are",  "as",    "at",   "be",    "by",    "for",  "from",
      "has",   "have", "how",  "in",   "is",    "it",   "its",   "of",    "on",   "or",
      "that",  "the",  "this", "to",   "was",   "were", "what",  "when",  "where", "which",
      "who",   "why",  "will", "with", "would", "do",   "does",  "did",   "can",  "could",
      "about", "into", "than", "then", "there", "these", "those", "their", "they", "them"};
  return words;
}

std::vector<std::string> content_words(std::string_view text) {
  std::vector<std::string> out;
  for (const auto w : split_words(text)) {
    auto n = normalize_word(w);
    if (n.size() >= 3 && !stopwords().contains(n)) out.push_back(std::move(n));
  }
  return out;
}

std::vector<std::string_view> split_sentences(std::string_view text) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    const bool terminal = c == '.' || c == '!' || c == '?' || c == '\n';
    if (terminal && (i + 1 == text.size() || is_space(text[i + 1]))) {
      const auto s = trim(text.substr(start, i + 1 - start));
      if (!s.empty()) out.push_back(s);
      start = i + 1;
    }
  }
  const auto tail = trim(text.substr(std::min(start, text.size())));
  if (!tail.empty()) out.push_back(tail);
  return out;
}

std::string first_words(std::string_view text, std::size_t n) {
  std::string out;
  std::size_t taken = 0;
  for (const auto w : split_words(text)) {
    if (taken == n) break;
    if (!out.empty()) out.push_back(' ');
    out.append(w);
    ++taken;
  }
  return out;
}

}  // namespace

std::string ScriptedMockBackend::chat(const ChatRequest& request) {
  const auto h = fnv1a64(request.prompt) ^ mix64(options_.seed);
  const auto detected = detect_prompt(request.prompt);
  if (!detected) return "OK";
  switch (detected->name) {
    case TemplateName::instruction_generation:
      return instruction_reply(detected->bindings, h);
    case TemplateName::qfs:
      return qfs_reply(detected->bindings, h);
    case TemplateName::answer_generation:
      return answer_reply(detected->bindings);
    case TemplateName::backtranslation:
      return backtranslation_reply(detected->bindings, h);
  }
  return "OK";
}

std::string ScriptedMockBackend::instruction_reply(const Bindings& b, std::uint64_t h) const {
  Rng rng(h);
  auto words = content_words(b.at(placeholder::kRandomTextChunk));
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  for (const char* fallback : {"history", "science", "economics", "culture"}) {
    if (words.size() >= 4) break;
    words.emplace_back(fallback);
  }
  rng.shuffle(words);
  const auto& kind = b.at(placeholder::kTaskOrQuestion);
  std::string instruction =
      kind == "question"
          ? "How do " + words[0] + " and " + words[1] + " shape " + words[2] + "?"
          : "Write a report connecting " + words[0] + ", " + words[1] + " and " + words[2] + ".";
  instruction += " Use " + b.at(placeholder::kReasoningType) + " reasoning at a " +
                 b.at(placeholder::kEducationLevel) + " level.";
  json queries = json::array();
  for (std::size_t q = 0; q < std::max<std::size_t>(options_.queries_per_instruction, 1); ++q) {
    queries.push_back(words[q % words.size()] + " " + words[(q + 3) % words.size()]);
  }
  return json{{"task_instruction", instruction}, {"search_queries", queries}}.dump();
}

std::string ScriptedMockBackend::qfs_reply(const Bindings& b, std::uint64_t h) const {
  const auto& context = b.at(placeholder::kContext);
  if (options_.summary_words > 0) {
    const auto words = split_words(context);
    std::string out;
    for (std::size_t i = 0; i < options_.summary_words; ++i) {
      if (!out.empty()) out.push_back(' ');
      if (words.empty()) {
        out += "summary";
      } else {
        out.append(words[(h + i) % words.size()]);
      }
    }
    return out;
  }
  const auto query_words = content_words(b.at(placeholder::kQuery));
  const std::set<std::string> wanted(query_words.begin(), query_words.end());
  std::string out;
  for (const auto sentence : split_sentences(context)) {
    const auto sw = content_words(sentence);
    if (std::none_of(sw.begin(), sw.end(), [&](const auto& w) { return wanted.contains(w); })) {
      continue;
    }
    if (!out.empty()) out.push_back(' ');
    out.append(sentence);
  }
  if (out.empty()) return std::string(kNoRelevantInformation);
  if (count_words(out) > kQfsSummaryWordCap) out = first_words(out, kQfsSummaryWordCap);
  return out;
}

std::string ScriptedMockBackend::answer_reply(const Bindings& b) const {
  const auto& query = b.at(placeholder::kQuery);
  const auto limit = static_cast<std::size_t>(std::stoul(b.at(placeholder::kWordLimit)));
  const auto used = count_words(query) + 1;
  std::string out = "Answer: " + query;
  if (limit > used) {
    const auto body = first_words(b.at(placeholder::kContext), limit - used);
    if (!body.empty()) out += "\n" + body;
  }
  return out;
}

std::string ScriptedMockBackend::backtranslation_reply(const Bindings& b, std::uint64_t h) const {
  Rng rng(h);
  auto words = content_words(b.at(placeholder::kDocument));
  std::sort(words.begin(), words.end());
  words.erase(std::unique(words.begin(), words.end()), words.end());
  rng.shuffle(words);
  const auto budget = static_cast<std::size_t>(std::stoul(b.at(placeholder::kWordBudget)));
  std::string out = "Write a document of about " + b.at(placeholder::kTokenCount) +
                    " words covering the following topics:";
  for (std::size_t i = 0; i < words.size() && count_words(out) < budget; ++i) {
    out += (i == 0 ? " " : ", ") + words[i];
  }
  return out + ".";
}

}  // namespace lcsynth
