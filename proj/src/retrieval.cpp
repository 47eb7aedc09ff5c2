#include "lcsynth/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "lcsynth/text.hpp"

namespace lcsynth {

using nlohmann::json;

void VectorIndex::add(std::string id, std::span<const float> vector) {
  if (vector.size() != dim_) {
    throw RetrievalError("dimension mismatch: index has " + std::to_string(dim_) + ", got " +
                         std::to_string(vector.size()));
  }
  if (id_set_.contains(id)) throw RetrievalError("duplicate index id '" + id + "'");
  Embedding v(vector.begin(), vector.end());
  normalize_in_place(v);
  id_set_.insert(id);
  ids_.push_back(std::move(id));
  values_.insert(values_.end(), v.begin(), v.end());
}

RetrievalResult VectorIndex::query_top_k(std::span<const float> query, std::size_t k) const {
  if (query.size() != dim_) {
    throw RetrievalError("query dimension " + std::to_string(query.size()) +
                         " does not match index dimension " + std::to_string(dim_));
  }
  if (k < 1) throw RetrievalError("k must be at least 1");
  const double qnorm = std::sqrt(dot(query, query));
  if (!(qnorm > 0.0)) throw RetrievalError("query vector is zero");

  RetrievalResult hits;
  hits.reserve(ids_.size());
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    hits.push_back({ids_[i], dot(vector(i), query) / qnorm});
  }
  const auto take = std::min(k, hits.size());
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(take), hits.end(),
                    hit_order);
  hits.resize(take);
  return hits;
}

void VectorIndex::save_jsonl(std::ostream& out) const {
  for (std::size_t i = 0; i < ids_.size(); ++i) {
    const auto v = vector(i);
    out << json{{"id", ids_[i]}, {"vector", std::vector<float>(v.begin(), v.end())}}.dump()
        << '\n';
  }
}

VectorIndex VectorIndex::load_jsonl(std::istream& in) {
  std::optional<VectorIndex> index;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const auto record = json::parse(line);
      const auto v = record.at("vector").get<std::vector<float>>();
      if (!index) index.emplace(v.size());
      index->add(record.at("id").get<std::string>(), v);
    } catch (const json::exception& e) {
      throw RetrievalError("index line " + std::to_string(line_no) + ": " + e.what());
    } catch (const std::runtime_error& e) {
      throw RetrievalError("index line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return index ? std::move(*index) : VectorIndex(0);
}

VectorIndex build_index(std::span<const std::string> ids, std::span<const std::string> texts,
                        EmbeddingBackend& backend, const EmbedOptions& options) {
  if (ids.size() != texts.size()) throw RetrievalError("ids and texts differ in length");
  const auto vectors = embed_batch(texts, backend, options);
  VectorIndex index(vectors.empty() ? 0 : vectors.front().size());
  for (std::size_t i = 0; i < ids.size(); ++i) index.add(ids[i], vectors[i]);
  return index;
}

RetrievalResult rrf_merge(std::span<const std::vector<std::string>> rankings, int k_rrf,
                          std::size_t out_k) {
  std::map<std::string, std::vector<std::size_t>> ranks_by_id;
  for (const auto& ranking : rankings) {
    std::unordered_set<std::string_view> seen;
    for (std::size_t r = 0; r < ranking.size(); ++r) {
      if (!seen.insert(ranking[r]).second) {
        throw RetrievalError("rrf_merge: id '" + ranking[r] + "' repeated within one ranking");
      }
      ranks_by_id[ranking[r]].push_back(r + 1);
    }
  }
  RetrievalResult fused;
  fused.reserve(ranks_by_id.size());
  for (auto& [id, ranks] : ranks_by_id) {
    std::sort(ranks.begin(), ranks.end());
    double score = 0.0;
    for (const auto rank : ranks) score += 1.0 / (static_cast<double>(k_rrf) + rank);
    fused.push_back({id, score});
  }
  std::stable_sort(fused.begin(), fused.end(), hit_order);
  if (fused.size() > out_k) fused.resize(out_k);
  return fused;
}

RetrievalResult retrieve_for_queries(std::span<const std::string> queries,
                                     const VectorIndex& index, EmbeddingBackend& backend,
                                     std::size_t per_query_k, std::size_t out_k,
                                     const EmbedOptions& options, int k_rrf) {
  if (queries.empty()) throw RetrievalError("retrieval needs at least one search query");
  const auto vectors = embed_batch(queries, backend, options);
  std::vector<std::vector<std::string>> rankings;
  rankings.reserve(vectors.size());
  for (const auto& v : vectors) {
    std::vector<std::string> ids;
    for (auto& hit : index.query_top_k(v, per_query_k)) ids.push_back(std::move(hit.id));
    rankings.push_back(std::move(ids));
  }
  return rrf_merge(rankings, k_rrf, out_k);
}

std::vector<std::size_t> dedup_vectors(std::span<const Embedding> vectors, double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw RetrievalError("dedup threshold must lie in (0, 1]");
  }
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    const bool duplicate = std::any_of(kept.begin(), kept.end(), [&](std::size_t j) {
      return dot(vectors[i], vectors[j]) >= threshold;
    });
    if (!duplicate) kept.push_back(i);
  }
  return kept;
}

std::vector<std::string> dedup_by_embedding(std::span<const TextItem> items,
                                            EmbeddingBackend& backend, double threshold,
                                            const EmbedOptions& options) {
  std::vector<std::string> texts;
  texts.reserve(items.size());
  for (const auto& item : items) texts.push_back(item.text);
  const auto vectors = embed_batch(texts, backend, options);
  std::vector<std::string> kept;
  for (const auto i : dedup_vectors(vectors, threshold)) kept.push_back(items[i].id);
  return kept;
}

}  // namespace lcsynth
