#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace lcsynth {

/// What a call is for; the ledger counts calls per kind.
enum class StepKind { instruction, qfs, answer, backtranslation, needle, other };
inline constexpr std::size_t kStepKindCount = 6;

std::string_view to_string(StepKind kind);

struct ChatRequest {
  std::string prompt;
  double temperature = 0.0;
  int max_output_tokens = 1024;
  StepKind step = StepKind::other;
};

/// Decoding defaults per step: sampling for instruction brainstorming,
/// greedy everywhere else.
ChatRequest make_request(StepKind step, std::string prompt);

class LlmError : public std::runtime_error {
 public:
  LlmError(const std::string& what, bool retryable, int status = 0)
      : std::runtime_error(what), retryable_(retryable), status_(status) {}
  bool retryable() const { return retryable_; }
  int status() const { return status_; }

 private:
  bool retryable_;
  int status_;
};

class LlmBackend {
 public:
  virtual ~LlmBackend() = default;
  /// Returns the completion text or throws LlmError.
  virtual std::string chat(const ChatRequest& request) = 0;
  virtual std::string id() const = 0;
};

struct LlmExchange {
  ChatRequest request;
  std::string response;
  int attempt_count = 0;
  std::string backend_id;
};

nlohmann::json to_json(const LlmExchange& exchange);
LlmExchange exchange_from_json(const nlohmann::json& j);

struct LedgerSnapshot {
  std::uint64_t total = 0;
  std::uint64_t attempts = 0;
  std::array<std::uint64_t, kStepKindCount> per_kind{};

  std::uint64_t count(StepKind kind) const { return per_kind[static_cast<std::size_t>(kind)]; }
  nlohmann::json to_json() const;
  bool operator==(const LedgerSnapshot&) const = default;
};

/// Thread-safe call counters. A ledger may forward every record to a
/// parent, so a per-sample ledger and the run-wide ledger stay in sync.
class CallLedger {
 public:
  explicit CallLedger(CallLedger* parent = nullptr) : parent_(parent) {}
  CallLedger(const CallLedger&) = delete;
  CallLedger& operator=(const CallLedger&) = delete;

  void record(StepKind kind, int attempts);

  std::uint64_t total() const { return total_.load(); }
  std::uint64_t attempts() const { return attempts_.load(); }
  std::uint64_t count(StepKind kind) const {
    return per_kind_[static_cast<std::size_t>(kind)].load();
  }
  LedgerSnapshot snapshot() const;

 private:
  CallLedger* parent_;
  std::atomic<std::uint64_t> total_{0};
  std::atomic<std::uint64_t> attempts_{0};
  std::array<std::atomic<std::uint64_t>, kStepKindCount> per_kind_{};
};

/// Appends exchanges as JSONL; safe to share across threads.
class ExchangeLog {
 public:
  explicit ExchangeLog(std::ostream& out) : out_(out) {}
  void append(const LlmExchange& exchange);

 private:
  std::mutex mutex_;
  std::ostream& out_;
};

std::vector<LlmExchange> read_exchange_log(std::istream& in);

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30000};
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to sleeping the thread
};

/// Backend plus retry policy, optional exchange log, and an in-flight cap
/// shared by every caller.
class LlmGateway {
 public:
  LlmGateway(LlmBackend& backend, RetryPolicy retry = {}, std::size_t max_in_flight = 8,
             ExchangeLog* log = nullptr);

  /// Runs one call with retries. Every invocation adds exactly one call to
  /// `ledger`, whatever the outcome; attempts are counted separately.
  LlmExchange complete(const ChatRequest& request, CallLedger& ledger);

  std::string backend_id() const { return backend_.id(); }
  std::size_t max_in_flight() const { return max_in_flight_; }

 private:
  LlmBackend& backend_;
  RetryPolicy retry_;
  std::size_t max_in_flight_;
  std::counting_semaphore<1024> in_flight_;
  ExchangeLog* log_;
};

struct HttpChatConfig {
  std::string base_url;  // e.g. https://api.openai.com/v1
  std::string model;
  std::string api_key_env = "LLM_API_KEY";
  std::chrono::milliseconds timeout{120000};
};

/// Chat-completions endpoint with the messages/choices schema.
class HttpChatBackend final : public LlmBackend {
 public:
  explicit HttpChatBackend(HttpChatConfig config) : config_(std::move(config)) {}
  std::string chat(const ChatRequest& request) override;
  std::string id() const override { return "http:" + config_.model; }

  static nlohmann::json request_body(const HttpChatConfig& config, const ChatRequest& request);
  /// choices[0].message.content; throws LlmError when absent.
  static std::string parse_response(const std::string& body);

 private:
  HttpChatConfig config_;
};

}  // namespace lcsynth
