#include "lcsynth/config.hpp"

#include <fstream>

#include "lcsynth/text.hpp"

namespace lcsynth {

using nlohmann::json;

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(LlmSettings, base_url, model, api_key_env, max_in_flight,
                                   max_attempts, initial_backoff_ms, timeout_ms)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(EmbeddingSettings, url, model, api_key_env, batch_size,
                                   max_in_flight, max_attempts, timeout_ms, mock_dim)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(CorpusSettings, paths, short_threshold_tokens, keep_p,
                                   min_doc_tokens, max_doc_tokens)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(RetrievalSettings, per_query_k, out_k, k_rrf, dedup_threshold)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SynthesisSettings, n_samples, instruction_chunk_tokens,
                                   max_regenerations, qfs_chunk_tokens, qfs_budget_tokens,
                                   allow_truncation, min_docs, max_docs,
                                   backtranslation_prompt_tokens, solve_word_limit)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(MockSettings, summary_words, queries_per_instruction)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PackingSettings, max_len)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ScheduleOptions, start_max_position, start_theta, n_stages,
                                   hardware_cap, learning_rate, max_steps, warmup_steps)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(NeedleSettings, max_len, step, n_depths, needle, question)

namespace {

// Every key of `given` must exist in `defaults`; nested objects are checked
// recursively except where the value is free-form.
void check_keys(const json& given, const json& defaults, const std::string& path) {
  if (!given.is_object()) {
    throw ConfigError("config" + (path.empty() ? "" : " key '" + path + "'") + " must be an object");
  }
  for (const auto& [key, value] : given.items()) {
    const auto full = path.empty() ? key : path + "." + key;
    if (!defaults.contains(key)) throw ConfigError("unknown config key '" + full + "'");
    if (full == "mixture") continue;
    if (defaults.at(key).is_object()) check_keys(value, defaults.at(key), full);
  }
}

}  // namespace

json RunConfig::to_json() const {
  return json{{"seed", seed},
              {"output_dir", output_dir},
              {"tokenizer", {{"kind", to_string(tokenizer.kind)}, {"vocab_path", tokenizer.vocab_path}}},
              {"llm", llm},
              {"embedding", embedding},
              {"corpus", corpus},
              {"retrieval", retrieval},
              {"synthesis", synthesis},
              {"mock", mock},
              {"mixture", mixture.to_json()},
              {"packing", packing},
              {"schedule", schedule},
              {"needle", needle}};
}

RunConfig RunConfig::from_json(const json& j) {
  const RunConfig defaults;
  auto merged = defaults.to_json();
  check_keys(j, merged, "");
  merged.merge_patch(j);
  if (j.contains("mixture")) merged["mixture"] = j.at("mixture");
  RunConfig c;
  try {
    c.seed = merged.at("seed").get<std::uint64_t>();
    c.output_dir = merged.at("output_dir").get<std::string>();
    const auto& t = merged.at("tokenizer");
    c.tokenizer.kind = tokenizer_kind_from_string(t.at("kind").get<std::string>());
    c.tokenizer.vocab_path = t.at("vocab_path").get<std::string>();
    c.llm = merged.at("llm").get<LlmSettings>();
    c.embedding = merged.at("embedding").get<EmbeddingSettings>();
    c.corpus = merged.at("corpus").get<CorpusSettings>();
    c.retrieval = merged.at("retrieval").get<RetrievalSettings>();
    c.synthesis = merged.at("synthesis").get<SynthesisSettings>();
    c.mock = merged.at("mock").get<MockSettings>();
    c.mixture = MixtureSpec::from_json(merged.at("mixture"));
    c.packing = merged.at("packing").get<PackingSettings>();
    c.schedule = merged.at("schedule").get<ScheduleOptions>();
    c.needle = merged.at("needle").get<NeedleSettings>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  } catch (const TokenizerError& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  } catch (const MixtureError& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string RunConfig::hash() const {
  auto j = to_json();
  j.erase("output_dir");
  return to_hex(fnv1a64(j.dump()));
}

void RunConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("invalid config: ") + what);
  };
  require(llm.max_in_flight >= 1, "llm.max_in_flight must be >= 1");
  require(llm.max_attempts >= 1, "llm.max_attempts must be >= 1");
  require(embedding.batch_size >= 1, "embedding.batch_size must be >= 1");
  require(embedding.mock_dim >= 1, "embedding.mock_dim must be >= 1");
  require(corpus.keep_p >= 0.0 && corpus.keep_p <= 1.0, "corpus.keep_p must be in [0, 1]");
  require(corpus.min_doc_tokens <= corpus.max_doc_tokens,
          "corpus.min_doc_tokens must not exceed corpus.max_doc_tokens");
  require(retrieval.per_query_k >= 1 && retrieval.out_k >= 1, "retrieval k values must be >= 1");
  require(retrieval.k_rrf >= 0, "retrieval.k_rrf must be >= 0");
  require(retrieval.dedup_threshold > 0.0 && retrieval.dedup_threshold <= 1.0,
          "retrieval.dedup_threshold must be in (0, 1]");
  require(synthesis.qfs_chunk_tokens >= 1, "synthesis.qfs_chunk_tokens must be >= 1");
  require(synthesis.qfs_budget_tokens >= 512, "synthesis.qfs_budget_tokens must be >= 512");
  require(synthesis.min_docs >= 1 && synthesis.min_docs <= synthesis.max_docs,
          "synthesis doc range must satisfy 1 <= min_docs <= max_docs");
  require(synthesis.solve_word_limit >= 1, "synthesis.solve_word_limit must be >= 1");
  require(packing.max_len >= 1, "packing.max_len must be >= 1");
  require(schedule.n_stages >= 1, "schedule.n_stages must be >= 1");
  require(needle.step >= 1 && needle.max_len >= needle.step, "needle lengths must be non-empty");
  require(needle.n_depths >= 1, "needle.n_depths must be >= 1");
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON");
  }
  return RunConfig::from_json(j);
}

}  // namespace lcsynth
