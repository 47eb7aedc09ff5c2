#include "lcsynth/llm.hpp"

#include <algorithm>
#include <istream>
#include <ostream>
#include <thread>

#include "lcsynth/http_client.hpp"
#include "lcsynth/text.hpp"

namespace lcsynth {

using nlohmann::json;

std::string_view to_string(StepKind kind) {
  switch (kind) {
    case StepKind::instruction:
      return "instruction";
    case StepKind::qfs:
      return "qfs";
    case StepKind::answer:
      return "answer";
    case StepKind::backtranslation:
      return "backtranslation";
    case StepKind::needle:
      return "needle";
    case StepKind::other:
      return "other";
  }
  return "other";
}

namespace {

StepKind step_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kStepKindCount; ++i) {
    const auto kind = static_cast<StepKind>(i);
    if (to_string(kind) == s) return kind;
  }
  return StepKind::other;
}

}  // namespace

ChatRequest make_request(StepKind step, std::string prompt) {
  ChatRequest req;
  req.prompt = std::move(prompt);
  req.step = step;
  req.temperature = step == StepKind::instruction ? 1.0 : 0.0;
  req.max_output_tokens = step == StepKind::answer ? 2048 : 1024;
  return req;
}

json to_json(const LlmExchange& exchange) {
  return json{{"step", to_string(exchange.request.step)},
              {"prompt", exchange.request.prompt},
              {"temperature", exchange.request.temperature},
              {"max_output_tokens", exchange.request.max_output_tokens},
              {"response", exchange.response},
              {"attempt_count", exchange.attempt_count},
              {"backend_id", exchange.backend_id}};
}

LlmExchange exchange_from_json(const json& j) {
  LlmExchange ex;
  ex.request.step = step_from_string(j.at("step").get<std::string>());
  ex.request.prompt = j.at("prompt").get<std::string>();
  ex.request.temperature = j.at("temperature").get<double>();
  ex.request.max_output_tokens = j.at("max_output_tokens").get<int>();
  ex.response = j.at("response").get<std::string>();
  ex.attempt_count = j.at("attempt_count").get<int>();
  ex.backend_id = j.at("backend_id").get<std::string>();
  return ex;
}

json LedgerSnapshot::to_json() const {
  json kinds = json::object();
  for (std::size_t i = 0; i < kStepKindCount; ++i) {
    kinds[std::string(lcsynth::to_string(static_cast<StepKind>(i)))] = per_kind[i];
  }
  return json{{"total_calls", total}, {"attempts", attempts}, {"calls_per_step", kinds}};
}

void CallLedger::record(StepKind kind, int attempts) {
  per_kind_[static_cast<std::size_t>(kind)].fetch_add(1);
  total_.fetch_add(1);
  attempts_.fetch_add(static_cast<std::uint64_t>(std::max(attempts, 0)));
  if (parent_ != nullptr) parent_->record(kind, attempts);
}

LedgerSnapshot CallLedger::snapshot() const {
  LedgerSnapshot s;
  for (std::size_t i = 0; i < kStepKindCount; ++i) s.per_kind[i] = per_kind_[i].load();
  s.attempts = attempts_.load();
  // Derived from the per-kind counters so the snapshot is self-consistent
  // even while other threads are recording.
  s.total = 0;
  for (const auto c : s.per_kind) s.total += c;
  return s;
}

void ExchangeLog::append(const LlmExchange& exchange) {
  const auto line = to_json(exchange).dump();
  std::lock_guard lock(mutex_);
  out_ << line << '\n';
}

std::vector<LlmExchange> read_exchange_log(std::istream& in) {
  std::vector<LlmExchange> out;
  std::string line;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    out.push_back(exchange_from_json(json::parse(line)));
  }
  return out;
}

LlmGateway::LlmGateway(LlmBackend& backend, RetryPolicy retry, std::size_t max_in_flight,
                       ExchangeLog* log)
    : backend_(backend),
      retry_(std::move(retry)),
      max_in_flight_(std::clamp<std::size_t>(max_in_flight, 1, 1024)),
      in_flight_(static_cast<std::ptrdiff_t>(max_in_flight_)),
      log_(log) {
  if (!retry_.sleep) {
    retry_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }
}

LlmExchange LlmGateway::complete(const ChatRequest& request, CallLedger& ledger) {
  LlmExchange exchange{request, {}, 0, backend_.id()};
  auto backoff = retry_.initial_backoff;
  const int max_attempts = std::max(retry_.max_attempts, 1);
  for (;;) {
    ++exchange.attempt_count;
    try {
      in_flight_.acquire();
      struct Release {
        std::counting_semaphore<1024>& s;
        ~Release() { s.release(); }
      } release{in_flight_};
      exchange.response = backend_.chat(request);
      break;
    } catch (const LlmError& e) {
      if (!e.retryable() || exchange.attempt_count >= max_attempts) {
        ledger.record(request.step, exchange.attempt_count);
        throw;
      }
    }
    retry_.sleep(backoff);
    backoff = std::min(std::chrono::duration_cast<std::chrono::milliseconds>(
                           backoff * retry_.multiplier),
                       retry_.max_backoff);
  }
  ledger.record(request.step, exchange.attempt_count);
  if (log_ != nullptr) log_->append(exchange);
  return exchange;
}

json HttpChatBackend::request_body(const HttpChatConfig& config, const ChatRequest& request) {
  return json{{"model", config.model},
              {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})},
              {"temperature", request.temperature},
              {"max_tokens", request.max_output_tokens}};
}

std::string HttpChatBackend::parse_response(const std::string& body) {
  try {
    const auto j = json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw LlmError(std::string("malformed chat response: ") + e.what(), false);
  }
}

std::string HttpChatBackend::chat(const ChatRequest& request) {
  std::map<std::string, std::string> headers;
  if (const auto key = env_secret(config_.api_key_env); !key.empty()) {
    headers["Authorization"] = "Bearer " + key;
  }
  std::string url = config_.base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  url += "/chat/completions";
  const auto res = http_post_json(url, request_body(config_, request).dump(), headers,
                                  config_.timeout);
  if (res.status != 200) {
    const auto what = res.status == 0 ? res.error : "HTTP " + std::to_string(res.status);
    throw LlmError("chat request failed: " + what, is_retryable_status(res.status), res.status);
  }
  return parse_response(res.body);
}

}  // namespace lcsynth
