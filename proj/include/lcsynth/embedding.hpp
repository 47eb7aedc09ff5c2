#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace lcsynth {

using Embedding = std::vector<float>;

class EmbeddingError : public std::runtime_error {
 public:
  EmbeddingError(const std::string& what, bool retryable)
      : std::runtime_error(what), retryable_(retryable) {}
  bool retryable() const { return retryable_; }

 private:
  bool retryable_;
};

/// Thrown by embed_batch when some batches still fail after retries.
class EmbeddingBatchError : public std::runtime_error {
 public:
  EmbeddingBatchError(const std::string& what, std::vector<std::size_t> failed)
      : std::runtime_error(what), failed_batches_(std::move(failed)) {}
  const std::vector<std::size_t>& failed_batches() const { return failed_batches_; }

 private:
  std::vector<std::size_t> failed_batches_;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  /// One vector per text, same order. Implementations throw EmbeddingError.
  virtual std::vector<Embedding> embed(std::span<const std::string> texts) = 0;
  virtual std::string id() const = 0;
};

/// Deterministic bag-of-words feature hashing. Texts that share most of
/// their words land close together, which is what dedup tests need.
class HashingEmbedder final : public EmbeddingBackend {
 public:
  explicit HashingEmbedder(std::size_t dim = 256, std::uint64_t seed = 0)
      : dim_(dim), seed_(seed) {}
  std::vector<Embedding> embed(std::span<const std::string> texts) override;
  std::string id() const override { return "hashing-" + std::to_string(dim_); }
  Embedding embed_one(const std::string& text) const;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Fixed text -> vector table; unknown texts are a non-retryable error.
class TableEmbedder final : public EmbeddingBackend {
 public:
  explicit TableEmbedder(std::unordered_map<std::string, Embedding> table)
      : table_(std::move(table)) {}
  std::vector<Embedding> embed(std::span<const std::string> texts) override;
  std::string id() const override { return "table"; }

 private:
  std::unordered_map<std::string, Embedding> table_;
};

struct HttpEmbeddingConfig {
  std::string url;  // full endpoint, e.g. http://localhost:8080/v1/embeddings
  std::string model;
  std::string api_key_env = "EMBEDDING_API_KEY";
  std::chrono::milliseconds timeout{60000};
};

/// OpenAI-style embeddings endpoint: {"model", "input": [..]} ->
/// {"data": [{"index", "embedding": [..]}]}. A bare array of arrays is also
/// accepted as the response body.
class HttpEmbeddingBackend final : public EmbeddingBackend {
 public:
  explicit HttpEmbeddingBackend(HttpEmbeddingConfig config) : config_(std::move(config)) {}
  std::vector<Embedding> embed(std::span<const std::string> texts) override;
  std::string id() const override { return "http:" + config_.model; }

 private:
  HttpEmbeddingConfig config_;
};

struct EmbedOptions {
  std::size_t batch_size = 32;
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{200};
  std::size_t max_in_flight = 1;
  std::function<void(std::chrono::milliseconds)> sleep;  // defaults to sleeping the thread
};

/// Embeds in batches with retries and returns L2-normalized vectors in
/// input order. Throws EmbeddingBatchError naming every batch that failed.
std::vector<Embedding> embed_batch(std::span<const std::string> texts, EmbeddingBackend& backend,
                                   const EmbedOptions& options = {});

/// Scales to unit L2 norm; throws EmbeddingError on a zero vector.
void normalize_in_place(Embedding& v);

double dot(std::span<const float> a, std::span<const float> b);

}  // namespace lcsynth
