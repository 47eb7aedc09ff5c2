#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "lcsynth/embedding.hpp"

namespace lcsynth {

class RetrievalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RetrievalHit {
  std::string id;
  double score = 0.0;

  bool operator==(const RetrievalHit&) const = default;
};

/// Scores non-increasing, ids distinct.
using RetrievalResult = std::vector<RetrievalHit>;

/// Score descending, then id ascending.
inline bool hit_order(const RetrievalHit& a, const RetrievalHit& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

/// Exact (brute-force) cosine index over L2-normalized vectors. Build is
/// single-writer; queries are safe to run concurrently afterwards.
class VectorIndex {
 public:
  explicit VectorIndex(std::size_t dim) : dim_(dim) {}

  /// Normalizes `vector` before storing it.
  void add(std::string id, std::span<const float> vector);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return ids_.size(); }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const float> vector(std::size_t i) const {
    return {values_.data() + i * dim_, dim_};
  }

  /// The k highest cosine similarities; ties by ascending id.
  RetrievalResult query_top_k(std::span<const float> query, std::size_t k = 5) const;

  /// Side file: one {"id": str, "vector": [float]} object per line.
  void save_jsonl(std::ostream& out) const;
  static VectorIndex load_jsonl(std::istream& in);

 private:
  std::size_t dim_;
  std::vector<std::string> ids_;
  std::unordered_set<std::string> id_set_;
  std::vector<float> values_;
};

/// Builds an index by embedding `texts` with the backend.
VectorIndex build_index(std::span<const std::string> ids, std::span<const std::string> texts,
                        EmbeddingBackend& backend, const EmbedOptions& options = {});

inline RetrievalResult query_top_k(const VectorIndex& index, std::span<const float> query,
                                   std::size_t k = 5) {
  return index.query_top_k(query, k);
}

/// Reciprocal rank fusion: score(id) = sum over rankings containing id of
/// 1 / (k_rrf + rank), rank 1-based. Output sorted by score, ties by id,
/// truncated to out_k. Contributions are summed in a canonical order, so
/// the result does not depend on the order of `rankings`.
RetrievalResult rrf_merge(std::span<const std::vector<std::string>> rankings, int k_rrf = 60,
                          std::size_t out_k = 5);

/// Embeds each query, takes its per-query top-k, and fuses with RRF.
RetrievalResult retrieve_for_queries(std::span<const std::string> queries,
                                     const VectorIndex& index, EmbeddingBackend& backend,
                                     std::size_t per_query_k = 5, std::size_t out_k = 5,
                                     const EmbedOptions& options = {}, int k_rrf = 60);

/// Greedy first-seen leaders: an item is dropped iff its cosine similarity
/// to an earlier kept item is >= threshold. Returns kept indices in order.
/// Vectors must already be unit length.
std::vector<std::size_t> dedup_vectors(std::span<const Embedding> vectors, double threshold);

struct TextItem {
  std::string id;
  std::string text;
};

/// Embeds the texts and applies dedup_vectors; returns the kept ids.
std::vector<std::string> dedup_by_embedding(std::span<const TextItem> items,
                                            EmbeddingBackend& backend, double threshold = 0.85,
                                            const EmbedOptions& options = {});

}  // namespace lcsynth
