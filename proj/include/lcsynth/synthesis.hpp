#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcsynth/corpus.hpp"
#include "lcsynth/embedding.hpp"
#include "lcsynth/llm.hpp"
#include "lcsynth/random.hpp"
#include "lcsynth/retrieval.hpp"

namespace lcsynth {

/// A stage failed for one sample; the run logs it and moves on.
class SampleSkipped : public std::runtime_error {
 public:
  SampleSkipped(std::string stage, const std::string& reason)
      : std::runtime_error(stage + ": " + reason), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

class SynthesisError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct InstructionKnobs {
  std::string task_or_question;
  std::string education_level;
  std::string reasoning_type;

  bool operator==(const InstructionKnobs&) const = default;
};

InstructionKnobs draw_knobs(Rng& rng);

struct InstructionRecord {
  std::string task_instruction;
  std::vector<std::string> search_queries;
  std::string seed_chunk_id;
  std::size_t seed_chunk_offset = 0;
  InstructionKnobs knobs;
};

struct InstructionOptions {
  std::size_t chunk_tokens = 128;
  int max_regenerations = 2;
};

/// Samples a seed chunk and knob values, renders the instruction prompt,
/// and parses the JSON reply. Malformed replies are regenerated up to
/// `max_regenerations` times, then SampleSkipped is thrown.
InstructionRecord generate_instruction(const Corpus& corpus, LlmGateway& gateway,
                                       CallLedger& ledger, std::uint64_t seed,
                                       const InstructionOptions& options = {});

struct QfsSummary {
  std::string text;
  std::size_t words = 0;
  bool over_cap = false;     // more than 300 words
  bool no_relevant = false;  // the "No relevant information found." sentinel
};

QfsSummary qfs_summarize_chunk(const TextChunk& chunk, std::string_view query,
                               LlmGateway& gateway, CallLedger& ledger);

struct SummaryRound {
  std::size_t round_index = 0;
  std::vector<TextChunk> inputs;
  std::vector<QfsSummary> outputs;
  std::size_t total_output_tokens = 0;
};

struct QfsOptions {
  std::size_t chunk_tokens = 4096;
  std::size_t budget_tokens = 8192;
  // Run at least this many rounds even when the input already fits.
  std::size_t min_rounds = 0;
  bool allow_truncation = true;
};

struct QfsResult {
  std::string context;
  std::vector<SummaryRound> rounds;
  bool truncated = false;
  std::size_t over_cap_count = 0;
  std::vector<std::string> warnings;
};

/// Summarizes `docs` chunk by chunk, re-chunking and re-summarizing the
/// concatenated summaries until they fit in `budget_tokens`. A round that
/// fails to shrink the text truncates it to the budget and stops (or
/// throws SynthesisError when truncation is disabled).
QfsResult recursive_qfs(std::span<const Document> docs, std::string_view query,
                        const Tokenizer& tok, LlmGateway& gateway, CallLedger& ledger,
                        const QfsOptions& options = {});

std::string generate_answer(std::string_view context, std::string_view query, int word_limit,
                            LlmGateway& gateway, CallLedger& ledger);

int draw_word_limit(Rng& rng);

struct AssembledContext {
  std::vector<std::string> doc_ids;
  std::vector<std::string> texts;
  std::vector<std::string> relevant_ids;    // relevant documents actually used
  std::vector<std::string> distractor_ids;
  bool relevant_truncated = false;
  std::vector<std::string> warnings;
};

/// All relevant documents plus distractors drawn from the rest of the
/// corpus until there are `n_docs`, shuffled. When n_docs is below the
/// number of relevant hits, only the top n_docs hits are used.
AssembledContext assemble_long_input(const RetrievalResult& relevant, const Corpus& corpus,
                                     std::size_t n_docs, std::uint64_t seed);

struct LongInputSample {
  std::string instruction;
  std::vector<std::string> context_documents;
  std::string response;
  nlohmann::json meta;
};

struct LongOutputSample {
  std::string instruction;
  Document target_document;
  int instruction_word_budget = 0;
  nlohmann::json meta;
};

/// One synthesized sample per JSONL line.
nlohmann::json to_json(const LongInputSample& sample);
nlohmann::json to_json(const LongOutputSample& sample);

struct SynthesisConfig {
  InstructionOptions instruction;
  QfsOptions qfs;
  std::size_t per_query_k = 5;
  std::size_t out_k = 5;
  int k_rrf = 60;
  std::size_t min_docs = 1;
  std::size_t max_docs = 100;
  EmbedOptions embed;
};

/// Everything a synthesis run reads. The corpus doubles as the retrieval
/// corpus; `index` must hold embeddings of the same document ids.
struct SynthesisInputs {
  const Corpus& corpus;
  const VectorIndex& index;
  EmbeddingBackend& embedder;
  LlmGateway& gateway;
};

/// Retrieval, recursive summarization, answer and assembly for an existing
/// instruction. `sample_seed` drives every random choice.
LongInputSample synthesize_from_instruction(const InstructionRecord& record,
                                            const SynthesisInputs& inputs, CallLedger& ledger,
                                            const SynthesisConfig& config,
                                            std::uint64_t sample_seed);

/// The full four-step workflow for sample `sample_index` of a run.
LongInputSample synthesize_long_input_sample(const SynthesisInputs& inputs,
                                             CallLedger& run_ledger,
                                             const SynthesisConfig& config,
                                             std::uint64_t run_seed, std::size_t sample_index);

struct SkipRecord {
  std::size_t sample_index = 0;
  std::string stage;
  std::string reason;
};

struct SynthesisRun {
  std::vector<LongInputSample> samples;
  std::vector<SkipRecord> skipped;
  std::size_t instructions_generated = 0;
  std::size_t instructions_after_dedup = 0;
};

/// Generates `n_samples` instructions, removes near-duplicates at
/// `dedup_threshold` (skip when <= 0), then finishes every kept sample.
/// Output order follows sample index regardless of concurrency.
SynthesisRun run_synthesis(const SynthesisInputs& inputs, CallLedger& run_ledger,
                           const SynthesisConfig& config, std::uint64_t run_seed,
                           std::size_t n_samples, double dedup_threshold = 0.85);

struct BacktranslationOptions {
  std::size_t min_tokens = 2048;
  std::size_t max_tokens = 32768;
  // Longer documents keep their head and tail halves in the prompt.
  std::size_t prompt_doc_tokens = 16384;
};

/// Asks for the writing instruction behind `doc` and pairs it with the
/// original, untruncated document.
LongOutputSample backtranslate_document(const Document& doc, const Tokenizer& tok,
                                        LlmGateway& gateway, CallLedger& ledger,
                                        std::uint64_t seed,
                                        const BacktranslationOptions& options = {});

/// Keeps head and tail halves of a text that exceeds `max_tokens`.
std::string truncate_middle(std::string_view text, std::size_t max_tokens, const Tokenizer& tok,
                            bool* truncated = nullptr);

struct SolveResult {
  std::string answer;
  LedgerSnapshot calls;
  std::size_t n_chunks = 0;
  std::vector<SummaryRound> rounds;
  std::vector<std::string> warnings;
};

/// Answers `query` over a long context without a long-context model: the
/// context is chunked, each chunk goes through at least one summarization
/// round, and the answer is generated from the summaries.
SolveResult solve_with_workflow(std::string_view context, std::string_view query,
                                const Tokenizer& tok, LlmGateway& gateway,
                                CallLedger* parent_ledger = nullptr,
                                QfsOptions options = {}, int word_limit = 300);

}  // namespace lcsynth
