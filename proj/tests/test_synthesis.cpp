#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "lcsynth/mock_backends.hpp"
#include "lcsynth/prompts.hpp"
#include "lcsynth/synthesis.hpp"
#include "oracles.hpp"

using namespace lcsynth;

namespace {

std::shared_ptr<const Tokenizer> ws() { return std::make_shared<WhitespaceTokenizer>(); }

RetryPolicy no_sleep() {
  RetryPolicy p;
  p.max_attempts = 1;
  p.sleep = [](std::chrono::milliseconds) {};
  return p;
}

const char* kTopics[] = {"volcano", "glacier", "orchard", "harbor", "satellite", "enzyme",
                         "railway", "violin", "desert", "coral", "printing", "vaccine"};

Corpus topic_corpus(std::size_t n_docs, std::size_t sentences_each) {
  std::vector<Document> docs;
  for (std::size_t i = 0; i < n_docs; ++i) {
    const std::string topic = kTopics[i % 12];
    const std::string other = kTopics[(i * 5 + 3) % 12];
    std::string text;
    for (std::size_t s = 0; s < sentences_each; ++s) {
      text += "The " + topic + " study " + std::to_string(i) + " notes " + other + " effects in sample " +
              std::to_string(s) + ". ";
    }
    docs.push_back({"doc" + std::to_string(i), text, "", 0});
  }
  return Corpus(std::move(docs), ws());
}

VectorIndex index_for(const Corpus& corpus, EmbeddingBackend& embedder) {
  std::vector<std::string> ids;
  std::vector<std::string> texts;
  for (const auto& d : corpus.documents()) {
    ids.push_back(d.id);
    texts.push_back(d.text);
  }
  return build_index(ids, texts, embedder);
}

std::vector<Document> word_docs(const std::vector<std::size_t>& lengths) {
  std::vector<Document> docs;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    docs.push_back({"d" + std::to_string(i), oracle::words(lengths[i]), "", lengths[i]});
  }
  return docs;
}

FunctionBackend fixed_summaries(std::size_t words) {
  return FunctionBackend([words](const ChatRequest& r) {
    return r.step == StepKind::qfs ? oracle::words(words, "s") : std::string("final answer");
  });
}

}  // namespace

TEST_SUITE("synthesis") {

TEST_CASE("knob and word-limit draws come from the option sets") {
  Rng r(1);
  std::set<std::string> tq;
  std::set<std::string> edu;
  std::set<std::string> reasoning;
  std::set<int> limits;
  for (int i = 0; i < 400; ++i) {
    const auto k = draw_knobs(r);
    tq.insert(k.task_or_question);
    edu.insert(k.education_level);
    reasoning.insert(k.reasoning_type);
    limits.insert(draw_word_limit(r));
  }
  CHECK(tq == std::set<std::string>{"task", "question"});
  CHECK(edu == std::set<std::string>{"high school", "college", "PhD"});
  CHECK(reasoning == std::set<std::string>{"mathematical", "logical", "common sense"});
  CHECK(limits == std::set<int>{200, 300, 400, 500});
}

TEST_CASE("instruction generation parses the reply and records provenance") {
  const auto corpus = topic_corpus(6, 20);
  ScriptedMockBackend mock;
  LlmGateway gw(mock, no_sleep());
  CallLedger ledger;
  const auto rec = generate_instruction(corpus, gw, ledger, 5);
  CHECK_FALSE(rec.task_instruction.empty());
  CHECK(rec.search_queries.size() == 3);
  CHECK(corpus.find(rec.seed_chunk_id) != nullptr);
  CHECK(ledger.count(StepKind::instruction) == 1);
  const auto again = generate_instruction(corpus, gw, ledger, 5);
  CHECK(again.task_instruction == rec.task_instruction);
  CHECK(again.knobs == rec.knobs);
}

TEST_CASE("malformed instruction replies are regenerated, then skipped") {
  const auto corpus = topic_corpus(2, 5);
  int calls = 0;
  FunctionBackend flaky([&](const ChatRequest&) -> std::string {
    return ++calls < 3 ? "not json"
                       : R"({"task_instruction": "Explain tides", "search_queries": ["tides"]})";
  });
  LlmGateway gw(flaky, no_sleep());
  CallLedger ledger;
  const auto rec = generate_instruction(corpus, gw, ledger, 1, {128, 2});
  CHECK(rec.task_instruction == "Explain tides");
  CHECK(ledger.total() == 3);

  FunctionBackend broken([](const ChatRequest&) { return std::string("{\"task_instruction\": 3}"); });
  LlmGateway gw2(broken, no_sleep());
  CallLedger ledger2;
  try {
    generate_instruction(corpus, gw2, ledger2, 1, {128, 1});
    FAIL("expected SampleSkipped");
  } catch (const SampleSkipped& e) {
    CHECK(e.stage() == "instruction");
  }
  CHECK(ledger2.total() == 2);
}

TEST_CASE("qfs chunk summary flags") {
  FunctionBackend wordy([](const ChatRequest&) { return oracle::words(301); });
  LlmGateway long_gw(wordy, no_sleep());
  CallLedger ledger;
  const TextChunk chunk{"p", 0, "text", 1};
  const auto s = qfs_summarize_chunk(chunk, "q", long_gw, ledger);
  CHECK(s.over_cap);
  CHECK(s.words == 301);
  FunctionBackend none([](const ChatRequest&) { return std::string("  No relevant information found.\n"); });
  LlmGateway none_gw(none, no_sleep());
  const auto n = qfs_summarize_chunk(chunk, "q", none_gw, ledger);
  CHECK(n.no_relevant);
  CHECK_FALSE(n.over_cap);
}

TEST_CASE("qfs worked example: 32 chunks of 4k with 100-word summaries take one round") {
  const auto docs = word_docs({32 * 4096});
  auto backend = fixed_summaries(100);
  LlmGateway gw(backend, no_sleep());
  CallLedger ledger;
  WhitespaceTokenizer tok;
  const auto res = recursive_qfs(docs, "q", tok, gw, ledger, {4096, 8192, 0, true});
  CHECK(res.rounds.size() == 1);
  CHECK(res.rounds[0].inputs.size() == 32);
  CHECK(res.rounds[0].total_output_tokens == 3200);
  CHECK(ledger.count(StepKind::qfs) == 32);
  CHECK(oracle::word_count(res.context) == 3200);
  CHECK_FALSE(res.truncated);
}

TEST_CASE("qfs recursion follows the closed-form round arithmetic") {
  WhitespaceTokenizer tok;
  Rng r(4);
  for (int trial = 0; trial < 60; ++trial) {
    std::vector<std::size_t> lengths;
    const auto n_docs = r.between(1, 6);
    for (int i = 0; i < n_docs; ++i) lengths.push_back(static_cast<std::size_t>(r.between(1, 5000)));
    const auto chunk = static_cast<std::size_t>(r.between(100, 1000));
    const auto budget = static_cast<std::size_t>(r.between(512, 2000));
    const auto s = static_cast<std::size_t>(r.between(1, chunk / 2));
    auto backend = fixed_summaries(s);
    LlmGateway gw(backend, no_sleep());
    CallLedger ledger;
    const auto res = recursive_qfs(word_docs(lengths), "q", tok, gw, ledger, {chunk, budget, 0, true});

    std::size_t total = 0;
    std::size_t n_chunks = 0;
    for (auto l : lengths) {
      total += l;
      n_chunks += (l + chunk - 1) / chunk;
    }
    std::size_t rounds = 0;
    std::size_t calls = 0;
    while (total > budget) {
      calls += n_chunks;
      total = n_chunks * s;
      n_chunks = (total + chunk - 1) / chunk;
      ++rounds;
    }
    CHECK(res.rounds.size() == rounds);
    CHECK(ledger.total() == calls);
    CHECK(oracle::word_count(res.context) == total);
  }
}

TEST_CASE("qfs with an input that already fits makes no calls unless forced") {
  WhitespaceTokenizer tok;
  auto backend = fixed_summaries(5);
  LlmGateway gw(backend, no_sleep());
  CallLedger ledger;
  const auto docs = word_docs({10, 20});
  const auto res = recursive_qfs(docs, "q", tok, gw, ledger, {4096, 8192, 0, true});
  CHECK(res.rounds.empty());
  CHECK(res.context == oracle::words(10) + "\n\n" + oracle::words(20));
  CHECK(ledger.total() == 0);
  const auto forced = recursive_qfs(docs, "q", tok, gw, ledger, {4096, 8192, 1, true});
  CHECK(forced.rounds.size() == 1);
  CHECK(ledger.total() == 2);
}

TEST_CASE("qfs that stops shrinking truncates or throws") {
  WhitespaceTokenizer tok;
  FunctionBackend verbose([](const ChatRequest& r) {
    const auto& ctx = prompt_template(TemplateName::qfs).extract(r.prompt).at("context");
    return ctx + " extra";
  });
  LlmGateway gw(verbose, no_sleep());
  CallLedger ledger;
  const auto docs = word_docs({2000});
  const auto res = recursive_qfs(docs, "q", tok, gw, ledger, {1000, 600, 0, true});
  CHECK(res.truncated);
  CHECK(oracle::word_count(res.context) == 600);
  CHECK(res.warnings.size() == 1);
  CHECK_THROWS_AS(recursive_qfs(docs, "q", tok, gw, ledger, {1000, 600, 0, false}), SynthesisError);
  CHECK_THROWS_AS(recursive_qfs(docs, "q", tok, gw, ledger, {1000, 511, 0, true}), SynthesisError);
}

TEST_CASE("answer prompt carries the word limit") {
  std::string seen;
  FunctionBackend spy([&](const ChatRequest& r) {
    seen = r.prompt;
    return std::string(" the answer ");
  });
  LlmGateway gw(spy, no_sleep());
  CallLedger ledger;
  CHECK(generate_answer("ctx", "why?", 300, gw, ledger) == "the answer");
  const auto b = prompt_template(TemplateName::answer_generation).extract(seen);
  CHECK(b.at("word_limit") == "300");
  CHECK(b.at("query") == "why?");
  CHECK(ledger.count(StepKind::answer) == 1);
}

TEST_CASE("assembly keeps relevant documents and adds distinct distractors") {
  const auto corpus = topic_corpus(30, 2);
  const RetrievalResult relevant{{"doc3", 0.9}, {"doc7", 0.8}, {"doc11", 0.7}};
  Rng r(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto n = static_cast<std::size_t>(r.between(1, 40));
    const auto seed = r.next_u64();
    const auto a = assemble_long_input(relevant, corpus, n, seed);
    const std::set<std::string> ids(a.doc_ids.begin(), a.doc_ids.end());
    CHECK(ids.size() == a.doc_ids.size());
    CHECK(a.doc_ids.size() == std::min<std::size_t>(n, 30));
    CHECK(a.texts.size() == a.doc_ids.size());
    const auto keep_rel = std::min<std::size_t>(n, 3);
    CHECK(a.relevant_ids.size() == keep_rel);
    for (std::size_t i = 0; i < keep_rel; ++i) CHECK(ids.contains(relevant[i].id));
    for (const auto& d : a.distractor_ids) CHECK(d != "doc3");
    CHECK(a.relevant_truncated == (n < 3));
    CHECK(a.warnings.empty() == (n <= 30));
    const auto b = assemble_long_input(relevant, corpus, n, seed);
    CHECK(a.doc_ids == b.doc_ids);
  }
  CHECK_THROWS_AS(assemble_long_input(relevant, corpus, 0, 1), SynthesisError);
  const RetrievalResult ghost{{"missing", 1.0}};
  const auto g = assemble_long_input(ghost, corpus, 2, 1);
  CHECK(g.warnings.size() == 1);
  CHECK(g.doc_ids.size() == 2);
}

TEST_CASE("truncate_middle keeps head and tail") {
  WhitespaceTokenizer tok;
  bool truncated = false;
  CHECK(truncate_middle("a b c d e f g", 4, tok, &truncated) == "a b\n\n...\n\nf g");
  CHECK(truncated);
  CHECK(truncate_middle("a b c d e", 3, tok) == "a b\n\n...\n\ne");
  CHECK(truncate_middle("a b", 3, tok, &truncated) == "a b");
  CHECK_FALSE(truncated);
}

TEST_CASE("backtranslation pairs the reply with the untouched document") {
  WhitespaceTokenizer tok;
  ScriptedMockBackend mock;
  LlmGateway gw(mock, no_sleep());
  CallLedger ledger;
  const Document doc{"long", oracle::words(3000, "topic"), "", 3000};
  const auto s = backtranslate_document(doc, tok, gw, ledger, 9, {2048, 32768, 1000});
  CHECK(s.target_document.text == doc.text);
  CHECK_FALSE(s.instruction.empty());
  CHECK(std::set<int>{20, 50, 100, 200}.contains(s.instruction_word_budget));
  CHECK(s.meta["prompt_truncated"] == true);
  CHECK(ledger.count(StepKind::backtranslation) == 1);
  const auto j = to_json(s);
  CHECK(j["kind"] == "long_output");
  CHECK(j["response"] == doc.text);
  const Document short_doc{"short", "few words", "", 2};
  CHECK_THROWS_AS(backtranslate_document(short_doc, tok, gw, ledger, 1), SynthesisError);
}

TEST_CASE("solve counts one call per chunk plus the answer") {
  WhitespaceTokenizer tok;
  auto backend = fixed_summaries(50);
  LlmGateway gw(backend, no_sleep());
  CallLedger parent;
  const auto res = solve_with_workflow(oracle::words(10 * 1000), "q", tok, gw, &parent,
                                       {1000, 8192, 0, true}, 300);
  CHECK(res.n_chunks == 10);
  CHECK(res.calls.total == 11);
  CHECK(res.calls.count(StepKind::qfs) == 10);
  CHECK(res.calls.count(StepKind::answer) == 1);
  CHECK(parent.total() == 11);
  CHECK(res.answer == "final answer");
  CHECK_THROWS_AS(solve_with_workflow("  ", "q", tok, gw), SynthesisError);
}

TEST_CASE("synthesis run is deterministic and independent of concurrency") {
  const auto corpus = topic_corpus(24, 40);
  HashingEmbedder embedder(64, 0);
  const auto index = index_for(corpus, embedder);
  SynthesisConfig cfg;
  cfg.qfs = {64, 512, 0, true};
  cfg.max_docs = 10;

  auto run_with = [&](std::size_t in_flight) {
    ScriptedMockBackend mock({3, 0, 3});
    LlmGateway gw(mock, no_sleep(), in_flight);
    CallLedger ledger;
    const SynthesisInputs inputs{corpus, index, embedder, gw};
    auto run = run_synthesis(inputs, ledger, cfg, 77, 6, 0.85);
    std::string dump;
    for (const auto& s : run.samples) dump += to_json(s).dump() + "\n";
    for (const auto& s : run.skipped) dump += s.stage + ":" + std::to_string(s.sample_index) + "\n";
    return std::pair{dump, ledger.snapshot()};
  };
  const auto [a, la] = run_with(1);
  const auto [b, lb] = run_with(8);
  CHECK(a == b);
  CHECK(la == lb);
  CHECK(la.count(StepKind::instruction) == 6);
  CHECK(la.count(StepKind::qfs) > 0);
}

TEST_CASE("synthesized samples carry provenance") {
  const auto corpus = topic_corpus(24, 40);
  HashingEmbedder embedder(64, 0);
  const auto index = index_for(corpus, embedder);
  ScriptedMockBackend mock;
  LlmGateway gw(mock, no_sleep());
  CallLedger run_ledger;
  SynthesisConfig cfg;
  cfg.min_docs = 4;
  cfg.max_docs = 8;
  const SynthesisInputs inputs{corpus, index, embedder, gw};
  const auto s = synthesize_long_input_sample(inputs, run_ledger, cfg, 3, 2);
  CHECK(s.meta["sample_index"] == 2);
  const auto n = s.meta["n_docs"].get<std::size_t>();
  CHECK(n >= 4);
  CHECK(n <= 8);
  CHECK(s.context_documents.size() == n);
  CHECK(s.meta["calls"]["total_calls"].get<std::uint64_t>() == run_ledger.total());
  const auto retrieved = s.meta["retrieved"];
  CHECK(retrieved.size() <= 5);
  const auto j = to_json(s);
  CHECK(j["kind"] == "long_input");
  CHECK(j["instruction"] == s.instruction);
}

TEST_CASE("duplicate instructions are removed before the expensive steps") {
  const auto corpus = topic_corpus(12, 10);
  HashingEmbedder embedder(64, 0);
  const auto index = index_for(corpus, embedder);
  FunctionBackend same([](const ChatRequest& r) -> std::string {
    if (r.step == StepKind::instruction) {
      return R"({"task_instruction": "Compare volcano and glacier studies", "search_queries": ["volcano", "glacier"]})";
    }
    return r.step == StepKind::qfs ? "volcano summary" : "answer";
  });
  LlmGateway gw(same, no_sleep());
  CallLedger ledger;
  const SynthesisInputs inputs{corpus, index, embedder, gw};
  const auto run = run_synthesis(inputs, ledger, {}, 1, 4, 0.85);
  CHECK(run.instructions_generated == 4);
  CHECK(run.instructions_after_dedup == 1);
  CHECK(run.samples.size() == 1);
  REQUIRE(run.skipped.size() == 3);
  for (const auto& s : run.skipped) CHECK(s.stage == "dedup");
}

}  // TEST_SUITE
