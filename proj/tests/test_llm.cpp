#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "lcsynth/json_extract.hpp"
#include "lcsynth/llm.hpp"
#include "lcsynth/mock_backends.hpp"
#include "lcsynth/parallel.hpp"
#include "lcsynth/prompts.hpp"
#include "oracles.hpp"

using namespace lcsynth;

namespace {

std::string read_golden(const std::string& name) {
  std::ifstream in(std::string(LCSYNTH_GOLDEN_DIR) + "/" + name, std::ios::binary);
  REQUIRE(in);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

const std::string kContext = "<<CONTEXT line one\nline two>>";
const std::string kQuery = "<<QUERY?>>";

Bindings golden_bindings(TemplateName name) {
  switch (name) {
    case TemplateName::instruction_generation:
      return {{"random_text_chunk", "<<CHUNK text with {braces} and $1>>"},
              {"task_or_question", "question"},
              {"education_level", "college"},
              {"reasoning_type", "logical"}};
    case TemplateName::qfs:
      return {{"context", kContext}, {"query", kQuery}};
    case TemplateName::answer_generation:
      return {{"context", kContext}, {"query", kQuery}, {"word_limit", "400"}};
    case TemplateName::backtranslation:
      return {{"document", "<<DOCUMENT body>>"}, {"word_budget", "50"}, {"token_count", "1234"}};
  }
  return {};
}

RetryPolicy no_sleep(int attempts, std::vector<std::chrono::milliseconds>* sleeps = nullptr) {
  RetryPolicy p;
  p.max_attempts = attempts;
  p.initial_backoff = std::chrono::milliseconds(100);
  p.sleep = [sleeps](std::chrono::milliseconds d) {
    if (sleeps) sleeps->push_back(d);
  };
  return p;
}

}  // namespace

TEST_SUITE("llm") {

TEST_CASE("stored prompts render byte for byte") {
  const std::pair<TemplateName, const char*> cases[] = {
      {TemplateName::instruction_generation, "instruction_generation.txt"},
      {TemplateName::qfs, "qfs.txt"},
      {TemplateName::answer_generation, "answer_generation.txt"},
      {TemplateName::backtranslation, "backtranslation.txt"}};
  for (const auto& [name, file] : cases) {
    CAPTURE(file);
    CHECK(render_prompt(name, golden_bindings(name)) == read_golden(file));
  }
}

TEST_CASE("extract inverts render") {
  for (auto name : {TemplateName::instruction_generation, TemplateName::qfs,
                    TemplateName::answer_generation, TemplateName::backtranslation}) {
    const auto b = golden_bindings(name);
    CHECK(prompt_template(name).extract(render_prompt(name, b)) == b);
  }
  CHECK_THROWS_AS(prompt_template(TemplateName::qfs).extract("not a prompt"), TemplateError);
}

TEST_CASE("render validates bindings") {
  auto b = golden_bindings(TemplateName::qfs);
  b.erase("query");
  CHECK_THROWS_AS(render_prompt(TemplateName::qfs, b), TemplateError);
  auto extra = golden_bindings(TemplateName::qfs);
  extra["bogus"] = "x";
  CHECK_THROWS_AS(render_prompt(TemplateName::qfs, extra), TemplateError);
  auto empty = golden_bindings(TemplateName::qfs);
  empty["context"] = "";
  CHECK_NOTHROW(render_prompt(TemplateName::qfs, empty));
}

TEST_CASE("template placeholders are listed in order") {
  const PromptTemplate t(TemplateName::qfs, "a {{x}} b {{y}} {{x}} {literal}");
  CHECK(t.placeholders() == std::vector<std::string>{"x", "y"});
  CHECK(t.render({{"x", "1"}, {"y", "2"}}) == "a 1 b 2 1 {literal}");
  CHECK_THROWS_AS(PromptTemplate(TemplateName::qfs, "a {{x"), TemplateError);
}

TEST_CASE("detect_prompt identifies each stored template") {
  for (auto name : {TemplateName::instruction_generation, TemplateName::qfs,
                    TemplateName::answer_generation, TemplateName::backtranslation}) {
    const auto d = detect_prompt(render_prompt(name, golden_bindings(name)));
    REQUIRE(d.has_value());
    CHECK(d->name == name);
  }
  CHECK_FALSE(detect_prompt("hello").has_value());
}

TEST_CASE("json payload extraction tolerates prose, fences and trailing commas") {
  const auto j = extract_json_payload(
      "Sure! ```json\n{\"task_instruction\": \"Do X\", \"search_queries\": [\"a\", \"b\",]}\n```",
      &instruction_schema());
  CHECK(j["task_instruction"] == "Do X");
  CHECK(j["search_queries"].size() == 2);
  const auto nested = extract_json_payload("x {\"a\": {\"b\": \"}\"}} y");
  CHECK(nested["a"]["b"] == "}");
  const auto second = extract_json_payload("{broken {\"k\": 1}");
  CHECK(second["k"] == 1);
}

TEST_CASE("json payload errors say what went wrong") {
  try {
    extract_json_payload("no json here");
    FAIL("expected JsonPayloadError");
  } catch (const JsonPayloadError& e) {
    CHECK(e.kind() == JsonPayloadError::Kind::no_object);
  }
  try {
    extract_json_payload("{\"task_instruction\": \"x\", \"search_queries\": []}", &instruction_schema());
    FAIL("expected JsonPayloadError");
  } catch (const JsonPayloadError& e) {
    CHECK(e.kind() == JsonPayloadError::Kind::schema_violation);
    CHECK(e.key() == "search_queries");
  }
  try {
    extract_json_payload("{\"search_queries\": [\"a\"]}", &instruction_schema());
    FAIL("expected JsonPayloadError");
  } catch (const JsonPayloadError& e) {
    CHECK(e.key() == "task_instruction");
  }
}

TEST_CASE("decoding defaults per step") {
  CHECK(make_request(StepKind::instruction, "p").temperature > 0.0);
  CHECK(make_request(StepKind::qfs, "p").temperature == 0.0);
  CHECK(make_request(StepKind::answer, "p").step == StepKind::answer);
}

TEST_CASE("gateway retries retryable failures with exponential backoff") {
  int calls = 0;
  FunctionBackend backend([&](const ChatRequest&) -> std::string {
    if (++calls < 3) throw LlmError("busy", true, 503);
    return "ok";
  });
  std::vector<std::chrono::milliseconds> sleeps;
  LlmGateway gw(backend, no_sleep(3, &sleeps));
  CallLedger ledger;
  const auto ex = gw.complete(make_request(StepKind::qfs, "p"), ledger);
  CHECK(ex.response == "ok");
  CHECK(ex.attempt_count == 3);
  CHECK(ledger.total() == 1);
  CHECK(ledger.attempts() == 3);
  CHECK(ledger.count(StepKind::qfs) == 1);
  REQUIRE(sleeps.size() == 2);
  CHECK(sleeps[0].count() == 100);
  CHECK(sleeps[1].count() == 200);
}

TEST_CASE("gateway gives up and still records one call") {
  FunctionBackend always([](const ChatRequest&) -> std::string { throw LlmError("busy", true, 500); });
  LlmGateway gw(always, no_sleep(2));
  CallLedger ledger;
  CHECK_THROWS_AS(gw.complete(make_request(StepKind::answer, "p"), ledger), LlmError);
  CHECK(ledger.total() == 1);
  CHECK(ledger.attempts() == 2);

  int calls = 0;
  FunctionBackend fatal([&](const ChatRequest&) -> std::string {
    ++calls;
    throw LlmError("bad request", false, 400);
  });
  LlmGateway gw2(fatal, no_sleep(5));
  CHECK_THROWS_AS(gw2.complete(make_request(StepKind::answer, "p"), ledger), LlmError);
  CHECK(calls == 1);
  CHECK(ledger.total() == 2);
}

TEST_CASE("ledger forwards to its parent") {
  CallLedger run;
  CallLedger sample(&run);
  sample.record(StepKind::qfs, 2);
  sample.record(StepKind::answer, 1);
  CHECK(run.total() == 2);
  CHECK(run.attempts() == 3);
  CHECK(run.snapshot() == sample.snapshot());
  const auto j = run.snapshot().to_json();
  CHECK(j["total_calls"] == 2);
}

TEST_CASE("gateway caps concurrent calls") {
  std::atomic<int> active{0};
  std::atomic<int> peak{0};
  FunctionBackend slow([&](const ChatRequest&) {
    const int now = ++active;
    int p = peak.load();
    while (now > p && !peak.compare_exchange_weak(p, now)) {
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
    --active;
    return std::string("ok");
  });
  LlmGateway gw(slow, no_sleep(1), 2);
  CallLedger ledger;
  parallel_for(24, 8, [&](std::size_t) { gw.complete(make_request(StepKind::other, "p"), ledger); });
  CHECK(ledger.total() == 24);
  CHECK(peak.load() <= 2);
}

TEST_CASE("exchange log round trips into a replay backend") {
  std::stringstream log_stream;
  ExchangeLog log(log_stream);
  FunctionBackend upper([](const ChatRequest& r) { return "reply to " + r.prompt; });
  LlmGateway gw(upper, no_sleep(1), 4, &log);
  CallLedger ledger;
  gw.complete(make_request(StepKind::qfs, "first\nline"), ledger);
  gw.complete(make_request(StepKind::answer, "second"), ledger);
  const auto exchanges = read_exchange_log(log_stream);
  REQUIRE(exchanges.size() == 2);
  CHECK(exchanges[0].request.step == StepKind::qfs);
  ReplayBackend replay(exchanges);
  CHECK(replay.chat(make_request(StepKind::answer, "second")) == "reply to second");
  CHECK_THROWS_AS(replay.chat(make_request(StepKind::answer, "unknown")), LlmError);
}

TEST_CASE("http chat schema") {
  HttpChatConfig cfg{"http://example.invalid/v1", "m", "", std::chrono::milliseconds(1000)};
  const auto body = HttpChatBackend::request_body(cfg, make_request(StepKind::qfs, "hi"));
  CHECK(body["model"] == "m");
  CHECK(body["messages"][0]["role"] == "user");
  CHECK(body["messages"][0]["content"] == "hi");
  CHECK(HttpChatBackend::parse_response(R"({"choices":[{"message":{"content":"yo"}}]})") == "yo");
  CHECK_THROWS_AS(HttpChatBackend::parse_response("{}"), LlmError);
}

TEST_CASE("http chat backend against a local server") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    if (++hits == 1) {
      res.status = 503;
      return;
    }
    const auto j = nlohmann::json::parse(req.body);
    res.set_content(nlohmann::json{{"choices", {{{"message", {{"content", "echo:" + j["messages"][0]["content"].get<std::string>()}}}}}}}.dump(),
                    "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  HttpChatBackend backend({"http://127.0.0.1:" + std::to_string(port) + "/v1/", "m", "",
                           std::chrono::milliseconds(5000)});
  LlmGateway gw(backend, no_sleep(3));
  CallLedger ledger;
  const auto ex = gw.complete(make_request(StepKind::qfs, "ping"), ledger);
  server.stop();
  t.join();
  CHECK(ex.response == "echo:ping");
  CHECK(ex.attempt_count == 2);
}

TEST_CASE("scripted mock replies follow the templates") {
  ScriptedMockBackend mock;
  const auto instr = mock.chat(make_request(
      StepKind::instruction,
      render_prompt(TemplateName::instruction_generation,
                    {{"random_text_chunk", "Volcanic soils support vineyards across Sicily."},
                     {"task_or_question", "task"},
                     {"education_level", "PhD"},
                     {"reasoning_type", "mathematical"}})));
  const auto j = extract_json_payload(instr, &instruction_schema());
  CHECK(j["search_queries"].size() == 3);
  CHECK(mock.chat(make_request(StepKind::other, "free text")) == "OK");

  const auto qfs = mock.chat(make_request(
      StepKind::qfs, render_prompt(TemplateName::qfs, {{"context", "Cats purr. Dogs bark."},
                                                       {"query", "Why do dogs bark?"}})));
  CHECK(qfs == "Dogs bark.");
  const auto none = mock.chat(make_request(
      StepKind::qfs, render_prompt(TemplateName::qfs, {{"context", "Cats purr."},
                                                       {"query", "Why do dogs bark?"}})));
  CHECK(none == kNoRelevantInformation);

  ScriptedMockBackend fixed({0, 7, 3});
  const auto seven = fixed.chat(make_request(
      StepKind::qfs, render_prompt(TemplateName::qfs, {{"context", "a b c"}, {"query", "q"}})));
  CHECK(oracle::word_count(seven) == 7);

  const auto answer = mock.chat(make_request(
      StepKind::answer,
      render_prompt(TemplateName::answer_generation,
                    {{"context", oracle::words(1000)}, {"query", "q"}, {"word_limit", "200"}})));
  CHECK(oracle::word_count(answer) <= 200);
}

}  // TEST_SUITE
