#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace lcsynth {

/// The caller should regenerate the completion when this is thrown.
class JsonPayloadError : public std::runtime_error {
 public:
  enum class Kind { no_object, schema_violation };

  JsonPayloadError(const std::string& what, Kind kind, std::string key = {})
      : std::runtime_error(what), kind_(kind), key_(std::move(key)) {}
  Kind kind() const { return kind_; }
  /// Offending key for schema violations.
  const std::string& key() const { return key_; }

 private:
  Kind kind_;
  std::string key_;
};

enum class JsonField { string, non_empty_string_list };

struct JsonSchema {
  std::vector<std::pair<std::string, JsonField>> required;
};

/// task_instruction: string; search_queries: non-empty list of strings.
const JsonSchema& instruction_schema();

/// First well-formed JSON object in `text`. Surrounding prose and code
/// fences are ignored, and a trailing comma before a closing bracket is
/// tolerated. Throws JsonPayloadError.
nlohmann::json extract_json_payload(std::string_view text, const JsonSchema* schema = nullptr);

}  // namespace lcsynth
