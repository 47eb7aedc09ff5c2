#include "lcsynth/synthesis.hpp"

#include <algorithm>
#include <memory>
#include <unordered_set>

#include "lcsynth/json_extract.hpp"
#include "lcsynth/parallel.hpp"
#include "lcsynth/prompts.hpp"
#include "lcsynth/text.hpp"

namespace lcsynth {

using nlohmann::json;

namespace {

constexpr std::string_view kJoiner = "\n\n";

// Sub-stream ids under a sample seed.
enum SeedStream : std::uint64_t {
  kSeedChunk = 0,
  kSeedInstruction = 1,
  kSeedDocCount = 2,
  kSeedWordLimit = 3,
  kSeedAssembly = 4,
};

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  std::size_t size = 0;
  for (const auto& p : parts) size += p.size() + sep.size();
  out.reserve(size);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

InstructionKnobs draw_knobs(Rng& rng) {
  InstructionKnobs k;
  k.task_or_question = std::string(rng.pick(kTaskOrQuestionOptions));
  k.education_level = std::string(rng.pick(kEducationLevelOptions));
  k.reasoning_type = std::string(rng.pick(kReasoningTypeOptions));
  return k;
}

int draw_word_limit(Rng& rng) { return rng.pick(kAnswerWordLimits); }

InstructionRecord generate_instruction(const Corpus& corpus, LlmGateway& gateway,
                                       CallLedger& ledger, std::uint64_t seed,
                                       const InstructionOptions& options) {
  if (corpus.empty()) throw SynthesisError("generate_instruction: corpus is empty");
  const auto chunk = sample_random_chunk(corpus, options.chunk_tokens, derive_seed(seed, kSeedChunk));
  Rng rng(derive_seed(seed, kSeedInstruction));
  InstructionRecord record;
  record.knobs = draw_knobs(rng);
  record.seed_chunk_id = chunk.parent_id;
  record.seed_chunk_offset = chunk.index;

  const auto prompt = render_prompt(TemplateName::instruction_generation,
                                    {{placeholder::kRandomTextChunk, chunk.text},
                                     {placeholder::kTaskOrQuestion, record.knobs.task_or_question},
                                     {placeholder::kEducationLevel, record.knobs.education_level},
                                     {placeholder::kReasoningType, record.knobs.reasoning_type}});
  const auto request = make_request(StepKind::instruction, prompt);
  std::string last_error;
  for (int attempt = 0; attempt <= options.max_regenerations; ++attempt) {
    const auto exchange = gateway.complete(request, ledger);
    try {
      const auto payload = extract_json_payload(exchange.response, &instruction_schema());
      record.task_instruction = std::string(trim(payload.at("task_instruction").get<std::string>()));
      for (const auto& q : payload.at("search_queries")) {
        const auto query = std::string(trim(q.get<std::string>()));
        if (!query.empty()) record.search_queries.push_back(query);
      }
      if (record.task_instruction.empty() || record.search_queries.empty()) {
        throw JsonPayloadError("empty instruction or queries",
                               JsonPayloadError::Kind::schema_violation, "task_instruction");
      }
      return record;
    } catch (const JsonPayloadError& e) {
      last_error = e.what();
      record.search_queries.clear();
    }
  }
  throw SampleSkipped("instruction",
                      "no valid JSON after " + std::to_string(options.max_regenerations + 1) +
                          " attempts (" + last_error + ")");
}

QfsSummary qfs_summarize_chunk(const TextChunk& chunk, std::string_view query,
                               LlmGateway& gateway, CallLedger& ledger) {
  const auto prompt = render_prompt(
      TemplateName::qfs, {{placeholder::kContext, chunk.text}, {placeholder::kQuery, std::string(query)}});
  auto response = gateway.complete(make_request(StepKind::qfs, prompt), ledger).response;
  QfsSummary s;
  s.text = std::string(trim(response));
  s.words = count_words(s.text);
  s.over_cap = s.words > static_cast<std::size_t>(kQfsSummaryWordCap);
  s.no_relevant = s.text == kNoRelevantInformation;
  return s;
}

QfsResult recursive_qfs(std::span<const Document> docs, std::string_view query,
                        const Tokenizer& tok, LlmGateway& gateway, CallLedger& ledger,
                        const QfsOptions& options) {
  if (options.budget_tokens < 512) throw SynthesisError("recursive_qfs: budget_tokens must be >= 512");
  if (options.chunk_tokens < 1) throw SynthesisError("recursive_qfs: chunk_tokens must be >= 1");
  QfsResult result;

  std::vector<std::string> texts;
  texts.reserve(docs.size());
  for (const auto& d : docs) texts.push_back(d.text);
  std::string current = join(texts, kJoiner);
  std::size_t current_tokens = tok.count(current);

  std::vector<TextChunk> inputs;
  for (const auto& d : docs) {
    auto chunks = chunk_text(d.text, options.chunk_tokens, tok, d.id);
    std::move(chunks.begin(), chunks.end(), std::back_inserter(inputs));
  }

  while (current_tokens > options.budget_tokens || result.rounds.size() < options.min_rounds) {
    if (inputs.empty()) break;
    SummaryRound round;
    round.round_index = result.rounds.size();
    round.outputs.resize(inputs.size());
    parallel_for(inputs.size(), gateway.max_in_flight(), [&](std::size_t i) {
      round.outputs[i] = qfs_summarize_chunk(inputs[i], query, gateway, ledger);
    });
    std::vector<std::string> summaries;
    summaries.reserve(round.outputs.size());
    for (const auto& s : round.outputs) {
      if (s.over_cap) ++result.over_cap_count;
      summaries.push_back(s.text);
    }
    std::string next = join(summaries, kJoiner);
    const std::size_t next_tokens = tok.count(next);
    round.total_output_tokens = next_tokens;
    round.inputs = std::move(inputs);
    result.rounds.push_back(std::move(round));

    const bool shrank = next_tokens < current_tokens;
    current = std::move(next);
    current_tokens = next_tokens;
    if (current_tokens <= options.budget_tokens) {
      if (result.rounds.size() >= options.min_rounds) break;
    } else if (!shrank) {
      if (!options.allow_truncation) {
        throw SynthesisError("recursive_qfs: round " + std::to_string(result.rounds.size() - 1) +
                             " did not reduce the token count");
      }
      result.warnings.push_back("summaries stopped shrinking at round " +
                                std::to_string(result.rounds.size() - 1) + "; truncated to " +
                                std::to_string(options.budget_tokens) + " tokens");
      current = std::string(first_tokens(current, options.budget_tokens, tok));
      result.truncated = true;
      break;
    }
    inputs = chunk_text(current, options.chunk_tokens, tok,
                        "round-" + std::to_string(result.rounds.size()));
  }
  result.context = std::move(current);
  return result;
}

std::string generate_answer(std::string_view context, std::string_view query, int word_limit,
                            LlmGateway& gateway, CallLedger& ledger) {
  const auto prompt = render_prompt(TemplateName::answer_generation,
                                    {{placeholder::kContext, std::string(context)},
                                     {placeholder::kQuery, std::string(query)},
                                     {placeholder::kWordLimit, std::to_string(word_limit)}});
  return std::string(trim(gateway.complete(make_request(StepKind::answer, prompt), ledger).response));
}

AssembledContext assemble_long_input(const RetrievalResult& relevant, const Corpus& corpus,
                                     std::size_t n_docs, std::uint64_t seed) {
  if (n_docs < 1) throw SynthesisError("assemble_long_input: n_docs must be >= 1");
  AssembledContext out;
  std::vector<std::string> relevant_ids;
  for (const auto& hit : relevant) {
    if (corpus.find(hit.id) == nullptr) {
      out.warnings.push_back("relevant id '" + hit.id + "' is not in the corpus");
      continue;
    }
    relevant_ids.push_back(hit.id);
  }
  Rng rng(seed);
  std::vector<std::string> chosen;
  if (n_docs <= relevant_ids.size()) {
    out.relevant_truncated = n_docs < relevant_ids.size();
    chosen.assign(relevant_ids.begin(), relevant_ids.begin() + static_cast<std::ptrdiff_t>(n_docs));
    out.relevant_ids = chosen;
  } else {
    out.relevant_ids = relevant_ids;
    chosen = relevant_ids;
    const std::unordered_set<std::string> taken(relevant_ids.begin(), relevant_ids.end());
    const std::size_t available = corpus.size() - taken.size();
    std::size_t need = n_docs - relevant_ids.size();
    if (need > available) {
      out.warnings.push_back("corpus has " + std::to_string(corpus.size()) +
                             " documents, fewer than n_docs=" + std::to_string(n_docs) +
                             "; using the whole corpus");
      need = available;
    }
    // Draw extra indices so the relevant ones can be filtered out; the
    // survivors are still a uniform sample of the non-relevant documents.
    for (const auto idx : rng.sample_indices(corpus.size(), need + taken.size())) {
      if (out.distractor_ids.size() == need) break;
      const auto& id = corpus[idx].id;
      if (!taken.contains(id)) out.distractor_ids.push_back(id);
    }
    chosen.insert(chosen.end(), out.distractor_ids.begin(), out.distractor_ids.end());
  }
  rng.shuffle(chosen);
  out.doc_ids = chosen;
  for (const auto& id : chosen) out.texts.push_back(corpus.find(id)->text);
  return out;
}

json to_json(const LongInputSample& sample) {
  return json{{"kind", "long_input"},
              {"instruction", sample.instruction},
              {"context_docs", sample.context_documents},
              {"response", sample.response},
              {"meta", sample.meta}};
}

json to_json(const LongOutputSample& sample) {
  return json{{"kind", "long_output"},
              {"instruction", sample.instruction},
              {"context_docs", json::array()},
              {"response", sample.target_document.text},
              {"meta", sample.meta}};
}

LongInputSample synthesize_from_instruction(const InstructionRecord& record,
                                            const SynthesisInputs& inputs, CallLedger& ledger,
                                            const SynthesisConfig& config,
                                            std::uint64_t sample_seed) {
  Rng doc_rng(derive_seed(sample_seed, kSeedDocCount));
  const auto n_docs = static_cast<std::size_t>(doc_rng.between(
      static_cast<std::int64_t>(config.min_docs), static_cast<std::int64_t>(config.max_docs)));
  Rng limit_rng(derive_seed(sample_seed, kSeedWordLimit));
  const int word_limit = draw_word_limit(limit_rng);

  RetrievalResult relevant;
  try {
    relevant = retrieve_for_queries(record.search_queries, inputs.index, inputs.embedder,
                                    config.per_query_k, config.out_k, config.embed, config.k_rrf);
  } catch (const std::exception& e) {
    throw SampleSkipped("retrieval", e.what());
  }
  std::vector<Document> relevant_docs;
  for (const auto& hit : relevant) {
    if (const auto* doc = inputs.corpus.find(hit.id)) relevant_docs.push_back(*doc);
  }
  if (relevant_docs.empty()) throw SampleSkipped("retrieval", "no relevant documents found");

  QfsResult qfs;
  std::string answer;
  try {
    qfs = recursive_qfs(relevant_docs, record.task_instruction, inputs.corpus.tokenizer(),
                        inputs.gateway, ledger, config.qfs);
  } catch (const std::exception& e) {
    throw SampleSkipped("qfs", e.what());
  }
  try {
    answer = generate_answer(qfs.context, record.task_instruction, word_limit, inputs.gateway,
                             ledger);
  } catch (const std::exception& e) {
    throw SampleSkipped("answer", e.what());
  }
  if (answer.empty()) throw SampleSkipped("answer", "empty response");

  auto assembled =
      assemble_long_input(relevant, inputs.corpus, n_docs, derive_seed(sample_seed, kSeedAssembly));

  LongInputSample sample;
  sample.instruction = record.task_instruction;
  sample.context_documents = std::move(assembled.texts);
  sample.response = std::move(answer);

  json relevant_json = json::array();
  for (const auto& hit : relevant) relevant_json.push_back({{"id", hit.id}, {"score", hit.score}});
  json rounds = json::array();
  for (const auto& r : qfs.rounds) {
    rounds.push_back({{"round", r.round_index},
                      {"inputs", r.inputs.size()},
                      {"output_tokens", r.total_output_tokens}});
  }
  sample.meta = json{
      {"doc_ids", assembled.doc_ids},
      {"retrieved", relevant_json},
      {"relevant_ids", assembled.relevant_ids},
      {"distractor_ids", assembled.distractor_ids},
      {"relevant_truncated", assembled.relevant_truncated},
      {"n_docs", n_docs},
      {"distractor_policy", "corpus documents outside the retrieved set"},
      {"search_queries", record.search_queries},
      {"seed_chunk", {{"doc_id", record.seed_chunk_id}, {"token_offset", record.seed_chunk_offset}}},
      {"knobs",
       {{"task_or_question", record.knobs.task_or_question},
        {"education_level", record.knobs.education_level},
        {"reasoning_type", record.knobs.reasoning_type}}},
      {"word_limit", word_limit},
      {"qfs_rounds", rounds},
      {"qfs_over_cap", qfs.over_cap_count},
      {"qfs_truncated", qfs.truncated},
      {"calls", ledger.snapshot().to_json()},
  };
  std::vector<std::string> warnings = qfs.warnings;
  warnings.insert(warnings.end(), assembled.warnings.begin(), assembled.warnings.end());
  if (!warnings.empty()) sample.meta["warnings"] = warnings;
  return sample;
}

LongInputSample synthesize_long_input_sample(const SynthesisInputs& inputs,
                                             CallLedger& run_ledger,
                                             const SynthesisConfig& config,
                                             std::uint64_t run_seed, std::size_t sample_index) {
  const auto sample_seed = derive_seed(run_seed, sample_index);
  CallLedger ledger(&run_ledger);
  const auto record = generate_instruction(inputs.corpus, inputs.gateway, ledger, sample_seed,
                                           config.instruction);
  auto sample = synthesize_from_instruction(record, inputs, ledger, config, sample_seed);
  sample.meta["sample_index"] = sample_index;
  return sample;
}

SynthesisRun run_synthesis(const SynthesisInputs& inputs, CallLedger& run_ledger,
                           const SynthesisConfig& config, std::uint64_t run_seed,
                           std::size_t n_samples, double dedup_threshold) {
  SynthesisRun run;
  std::vector<std::unique_ptr<CallLedger>> ledgers;
  for (std::size_t i = 0; i < n_samples; ++i) ledgers.push_back(std::make_unique<CallLedger>(&run_ledger));
  std::vector<std::optional<InstructionRecord>> records(n_samples);
  std::vector<std::optional<SkipRecord>> skips(n_samples);
  const auto workers = inputs.gateway.max_in_flight();

  parallel_for(n_samples, workers, [&](std::size_t i) {
    try {
      records[i] = generate_instruction(inputs.corpus, inputs.gateway, *ledgers[i],
                                        derive_seed(run_seed, i), config.instruction);
    } catch (const SampleSkipped& e) {
      skips[i] = SkipRecord{i, e.stage(), e.what()};
    } catch (const std::exception& e) {
      skips[i] = SkipRecord{i, "instruction", e.what()};
    }
  });

  std::vector<std::size_t> live;
  for (std::size_t i = 0; i < n_samples; ++i) {
    if (records[i]) live.push_back(i);
  }
  run.instructions_generated = live.size();
  if (dedup_threshold > 0.0 && live.size() > 1) {
    std::vector<std::string> texts;
    for (const auto i : live) texts.push_back(records[i]->task_instruction);
    const auto vectors = embed_batch(texts, inputs.embedder, config.embed);
    std::vector<bool> keep(live.size(), false);
    for (const auto k : dedup_vectors(vectors, dedup_threshold)) keep[k] = true;
    std::vector<std::size_t> kept;
    for (std::size_t k = 0; k < live.size(); ++k) {
      if (keep[k]) {
        kept.push_back(live[k]);
      } else {
        skips[live[k]] = SkipRecord{live[k], "dedup", "near-duplicate instruction"};
      }
    }
    live = std::move(kept);
  }
  run.instructions_after_dedup = live.size();

  std::vector<std::optional<LongInputSample>> samples(n_samples);
  parallel_for(live.size(), workers, [&](std::size_t k) {
    const auto i = live[k];
    try {
      samples[i] = synthesize_from_instruction(*records[i], inputs, *ledgers[i], config,
                                               derive_seed(run_seed, i));
      samples[i]->meta["sample_index"] = i;
    } catch (const SampleSkipped& e) {
      skips[i] = SkipRecord{i, e.stage(), e.what()};
    } catch (const std::exception& e) {
      skips[i] = SkipRecord{i, "workflow", e.what()};
    }
  });
  for (std::size_t i = 0; i < n_samples; ++i) {
    if (samples[i]) run.samples.push_back(std::move(*samples[i]));
    if (skips[i]) run.skipped.push_back(std::move(*skips[i]));
  }
  return run;
}

std::string truncate_middle(std::string_view text, std::size_t max_tokens, const Tokenizer& tok,
                            bool* truncated) {
  const auto spans = tok.spans(text);
  if (truncated != nullptr) *truncated = spans.size() > max_tokens;
  if (spans.size() <= max_tokens) return std::string(text);
  if (max_tokens == 0) return {};
  const std::size_t head = (max_tokens + 1) / 2;
  const std::size_t tail = max_tokens - head;
  std::string out(text.substr(0, spans[head - 1].end));
  out += "\n\n...\n\n";
  if (tail > 0) out += text.substr(spans[spans.size() - tail].begin);
  return out;
}

LongOutputSample backtranslate_document(const Document& doc, const Tokenizer& tok,
                                        LlmGateway& gateway, CallLedger& ledger,
                                        std::uint64_t seed,
                                        const BacktranslationOptions& options) {
  if (doc.token_count < options.min_tokens || doc.token_count > options.max_tokens) {
    throw SynthesisError("backtranslate_document: document '" + doc.id + "' has " +
                         std::to_string(doc.token_count) + " tokens, outside [" +
                         std::to_string(options.min_tokens) + ", " +
                         std::to_string(options.max_tokens) + "]");
  }
  Rng rng(seed);
  const int budget = rng.pick(kBacktranslationWordBudgets);
  bool truncated = false;
  const auto shown = truncate_middle(doc.text, options.prompt_doc_tokens, tok, &truncated);
  const auto prompt = render_prompt(TemplateName::backtranslation,
                                    {{placeholder::kDocument, shown},
                                     {placeholder::kWordBudget, std::to_string(budget)},
                                     {placeholder::kTokenCount, std::to_string(doc.token_count)}});
  const auto response = std::string(
      trim(gateway.complete(make_request(StepKind::backtranslation, prompt), ledger).response));
  if (response.empty()) throw SampleSkipped("backtranslation", "empty instruction");

  LongOutputSample sample;
  sample.instruction = response;
  sample.target_document = doc;
  sample.instruction_word_budget = budget;
  sample.meta = json{{"doc_id", doc.id},
                     {"token_count", doc.token_count},
                     {"word_budget", budget},
                     {"prompt_truncated", truncated}};
  return sample;
}

SolveResult solve_with_workflow(std::string_view context, std::string_view query,
                                const Tokenizer& tok, LlmGateway& gateway,
                                CallLedger* parent_ledger, QfsOptions options, int word_limit) {
  if (trim(context).empty()) throw SynthesisError("solve_with_workflow: context is empty");
  CallLedger ledger(parent_ledger);
  std::vector<Document> docs;
  for (auto& chunk : chunk_text(context, options.chunk_tokens, tok)) {
    docs.push_back({"chunk-" + std::to_string(chunk.index), std::move(chunk.text), {},
                    chunk.token_count});
  }
  options.min_rounds = std::max<std::size_t>(options.min_rounds, 1);
  auto qfs = recursive_qfs(docs, query, tok, gateway, ledger, options);
  SolveResult result;
  result.n_chunks = docs.size();
  result.answer = generate_answer(qfs.context, query, word_limit, gateway, ledger);
  result.calls = ledger.snapshot();
  result.rounds = std::move(qfs.rounds);
  result.warnings = std::move(qfs.warnings);
  return result;
}

}  // namespace lcsynth
