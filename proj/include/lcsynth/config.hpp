#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcsynth/evalbench.hpp"
#include "lcsynth/mixpack.hpp"
#include "lcsynth/tokenizer.hpp"
#include "lcsynth/trainplan.hpp"

namespace lcsynth {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LlmSettings {
  std::string base_url;
  std::string model;
  std::string api_key_env = "LLM_API_KEY";
  std::size_t max_in_flight = 8;
  int max_attempts = 3;
  std::int64_t initial_backoff_ms = 500;
  std::int64_t timeout_ms = 120000;
};

struct EmbeddingSettings {
  std::string url;
  std::string model;
  std::string api_key_env = "EMBEDDING_API_KEY";
  std::size_t batch_size = 32;
  std::size_t max_in_flight = 4;
  int max_attempts = 3;
  std::int64_t timeout_ms = 60000;
  std::size_t mock_dim = 256;
};

struct CorpusSettings {
  std::vector<std::string> paths;
  std::size_t short_threshold_tokens = 2048;
  double keep_p = 0.05;
  std::size_t min_doc_tokens = 2048;
  std::size_t max_doc_tokens = 32768;
};

struct RetrievalSettings {
  std::size_t per_query_k = 5;
  std::size_t out_k = 5;
  int k_rrf = 60;
  double dedup_threshold = 0.85;
};

struct SynthesisSettings {
  std::size_t n_samples = 8;
  std::size_t instruction_chunk_tokens = 128;
  int max_regenerations = 2;
  std::size_t qfs_chunk_tokens = 4096;
  std::size_t qfs_budget_tokens = 8192;
  bool allow_truncation = true;
  std::size_t min_docs = 1;
  std::size_t max_docs = 100;
  std::size_t backtranslation_prompt_tokens = 16384;
  int solve_word_limit = 300;
};

struct MockSettings {
  std::size_t summary_words = 0;
  std::size_t queries_per_instruction = 3;
};

struct PackingSettings {
  std::size_t max_len = kDefaultPackedLength;
};

struct NeedleSettings {
  std::size_t max_len = 1048576;
  std::size_t step = 16384;
  std::size_t n_depths = 10;
  std::string needle = std::string(kDefaultNeedle);
  std::string question = std::string(kDefaultNeedleQuestion);
};

/// Every knob of a run. Missing keys take their defaults; unknown keys are
/// rejected so typos do not pass silently.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  TokenizerSpec tokenizer;
  LlmSettings llm;
  EmbeddingSettings embedding;
  CorpusSettings corpus;
  RetrievalSettings retrieval;
  SynthesisSettings synthesis;
  MockSettings mock;
  MixtureSpec mixture = default_mixture_spec();
  PackingSettings packing;
  ScheduleOptions schedule;
  NeedleSettings needle;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  /// FNV-1a of the canonical JSON dump without output_dir, as 16 hex digits.
  std::string hash() const;
  void validate() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace lcsynth
