#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lcsynth/llm.hpp"
#include "lcsynth/prompts.hpp"

namespace lcsynth {

/// Returns the prompt unchanged.
class EchoBackend final : public LlmBackend {
 public:
  std::string chat(const ChatRequest& request) override { return request.prompt; }
  std::string id() const override { return "mock:echo"; }
};

/// Always the same reply, e.g. a refusal.
class FixedReplyBackend final : public LlmBackend {
 public:
  explicit FixedReplyBackend(std::string reply) : reply_(std::move(reply)) {}
  std::string chat(const ChatRequest&) override { return reply_; }
  std::string id() const override { return "mock:fixed"; }

 private:
  std::string reply_;
};

class FunctionBackend final : public LlmBackend {
 public:
  explicit FunctionBackend(std::function<std::string(const ChatRequest&)> fn,
                           std::string id = "mock:function")
      : fn_(std::move(fn)), id_(std::move(id)) {}
  std::string chat(const ChatRequest& request) override { return fn_(request); }
  std::string id() const override { return id_; }

 private:
  std::function<std::string(const ChatRequest&)> fn_;
  std::string id_;
};

/// Answers from a recorded exchange log, keyed by prompt text.
class ReplayBackend final : public LlmBackend {
 public:
  explicit ReplayBackend(const std::vector<LlmExchange>& exchanges);
  std::string chat(const ChatRequest& request) override;
  std::string id() const override { return "replay"; }

 private:
  std::unordered_map<std::string, std::string> responses_;
};

/// Which stored template produced `prompt`, with its bindings.
struct DetectedPrompt {
  TemplateName name;
  Bindings bindings;
};
std::optional<DetectedPrompt> detect_prompt(const std::string& prompt);

struct ScriptedMockOptions {
  std::uint64_t seed = 0;
  // 0: extractive summaries (sentences sharing a content word with the
  // query, capped at the prompt's word limit). >0: every summary has
  // exactly this many words.
  std::size_t summary_words = 0;
  std::size_t queries_per_instruction = 3;
};

/// Deterministic stand-in for a chat model that understands the four
/// stored templates. Each reply is a pure function of (prompt, seed).
class ScriptedMockBackend final : public LlmBackend {
 public:
  explicit ScriptedMockBackend(ScriptedMockOptions options = {}) : options_(options) {}
  std::string chat(const ChatRequest& request) override;
  std::string id() const override { return "mock:scripted"; }

 private:
  std::string instruction_reply(const Bindings& b, std::uint64_t h) const;
  std::string qfs_reply(const Bindings& b, std::uint64_t h) const;
  std::string answer_reply(const Bindings& b) const;
  std::string backtranslation_reply(const Bindings& b, std::uint64_t h) const;

  ScriptedMockOptions options_;
};

}  // namespace lcsynth
