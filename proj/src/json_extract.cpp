#include "lcsynth/json_extract.hpp"

#include <optional>

namespace lcsynth {

using nlohmann::json;

const JsonSchema& instruction_schema() {
  static const JsonSchema schema{{{"task_instruction", JsonField::string},
                                  {"search_queries", JsonField::non_empty_string_list}}};
  return schema;
}

namespace {

// End (exclusive) of the balanced {...} starting at `open`, honoring
// string literals; nullopt when unbalanced.
std::optional<std::size_t> balanced_end(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{' || c == '[') {
      ++depth;
    } else if (c == '}' || c == ']') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::nullopt;
}

std::string strip_trailing_commas(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      out.push_back(c);
      if (c == '\\' && i + 1 < text.size()) {
        out.push_back(text[++i]);
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') in_string = true;
    if (c == ',') {
      std::size_t j = i + 1;
      while (j < text.size() && (text[j] == ' ' || text[j] == '\n' || text[j] == '\t' ||
                                 text[j] == '\r')) {
        ++j;
      }
      if (j < text.size() && (text[j] == ']' || text[j] == '}')) continue;
    }
    out.push_back(c);
  }
  return out;
}

std::optional<json> try_parse_object(std::string_view candidate) {
  auto parsed = json::parse(candidate, nullptr, false);
  if (parsed.is_discarded()) parsed = json::parse(strip_trailing_commas(candidate), nullptr, false);
  if (parsed.is_discarded() || !parsed.is_object()) return std::nullopt;
  return parsed;
}

void validate(const json& value, const JsonSchema& schema) {
  for (const auto& [key, field] : schema.required) {
    if (!value.contains(key)) {
      throw JsonPayloadError("missing required key \"" + key + "\"",
                             JsonPayloadError::Kind::schema_violation, key);
    }
    const auto& v = value.at(key);
    bool ok = false;
    switch (field) {
      case JsonField::string:
        ok = v.is_string();
        break;
      case JsonField::non_empty_string_list:
        ok = v.is_array() && !v.empty() &&
             std::all_of(v.begin(), v.end(), [](const json& e) { return e.is_string(); });
        break;
    }
    if (!ok) {
      throw JsonPayloadError("key \"" + key + "\" has the wrong type",
                             JsonPayloadError::Kind::schema_violation, key);
    }
  }
}

}  // namespace

json extract_json_payload(std::string_view text, const JsonSchema* schema) {
  for (auto open = text.find('{'); open != std::string_view::npos;
       open = text.find('{', open + 1)) {
    const auto end = balanced_end(text, open);
    if (!end) continue;
    if (auto parsed = try_parse_object(text.substr(open, *end - open))) {
      if (schema != nullptr) validate(*parsed, *schema);
      return std::move(*parsed);
    }
  }
  throw JsonPayloadError("no parseable JSON object in completion; regenerate",
                         JsonPayloadError::Kind::no_object);
}

}  // namespace lcsynth
