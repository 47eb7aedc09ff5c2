#include "lcsynth/embedding.hpp"

#include <cmath>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "lcsynth/http_client.hpp"
#include "lcsynth/parallel.hpp"
#include "lcsynth/text.hpp"

namespace lcsynth {

using nlohmann::json;

double dot(std::span<const float> a, std::span<const float> b) {
  double sum = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) sum += static_cast<double>(a[i]) * b[i];
  return sum;
}

void normalize_in_place(Embedding& v) {
  const double norm = std::sqrt(dot(v, v));
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw EmbeddingError("cannot normalize a zero or non-finite vector", false);
  }
  for (auto& x : v) x = static_cast<float>(x / norm);
}

Embedding HashingEmbedder::embed_one(const std::string& text) const {
  Embedding v(dim_, 0.0f);
  bool any = false;
  for (const auto word : split_words(text)) {
    const auto norm = normalize_word(word);
    if (norm.empty()) continue;
    const auto h = fnv1a64(norm, 0xcbf29ce484222325ULL ^ seed_);
    v[h % dim_] += (h >> 63) != 0 ? -1.0f : 1.0f;
    any = true;
  }
  if (!any) v[fnv1a64(text) % dim_] = 1.0f;
  // Opposite-signed collisions can cancel to zero.
  if (dot(v, v) == 0.0) v[0] = 1.0f;
  return v;
}

std::vector<Embedding> HashingEmbedder::embed(std::span<const std::string> texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

std::vector<Embedding> TableEmbedder::embed(std::span<const std::string> texts) {
  std::vector<Embedding> out;
  out.reserve(texts.size());
  for (const auto& t : texts) {
    const auto it = table_.find(t);
    if (it == table_.end()) throw EmbeddingError("no table entry for text '" + t + "'", false);
    out.push_back(it->second);
  }
  return out;
}

std::vector<Embedding> HttpEmbeddingBackend::embed(std::span<const std::string> texts) {
  json request{{"input", json::array()}};
  if (!config_.model.empty()) request["model"] = config_.model;
  for (const auto& t : texts) request["input"].push_back(t);
  std::map<std::string, std::string> headers;
  if (const auto key = env_secret(config_.api_key_env); !key.empty()) {
    headers["Authorization"] = "Bearer " + key;
  }
  const auto res = http_post_json(config_.url, request.dump(), headers, config_.timeout);
  if (res.status != 200) {
    const auto what = res.status == 0 ? res.error : "HTTP " + std::to_string(res.status);
    throw EmbeddingError("embedding request failed: " + what, is_retryable_status(res.status));
  }
  std::vector<Embedding> out(texts.size());
  try {
    const auto body = json::parse(res.body);
    if (body.is_array()) {
      if (body.size() != texts.size()) throw EmbeddingError("embedding count mismatch", false);
      for (std::size_t i = 0; i < body.size(); ++i) out[i] = body[i].get<Embedding>();
    } else {
      const auto& data = body.at("data");
      if (data.size() != texts.size()) throw EmbeddingError("embedding count mismatch", false);
      for (std::size_t i = 0; i < data.size(); ++i) {
        const auto idx = data[i].value("index", i);
        if (idx >= out.size()) throw EmbeddingError("embedding index out of range", false);
        out[idx] = data[i].at("embedding").get<Embedding>();
      }
    }
  } catch (const json::exception& e) {
    throw EmbeddingError(std::string("malformed embedding response: ") + e.what(), false);
  }
  return out;
}

std::vector<Embedding> embed_batch(std::span<const std::string> texts, EmbeddingBackend& backend,
                                   const EmbedOptions& options) {
  const std::size_t batch_size = std::max<std::size_t>(options.batch_size, 1);
  const std::size_t n_batches = (texts.size() + batch_size - 1) / batch_size;
  std::vector<Embedding> out(texts.size());
  std::vector<std::string> failures(n_batches);
  auto sleep = options.sleep;
  if (!sleep) sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };

  parallel_for(n_batches, options.max_in_flight, [&](std::size_t b) {
    const std::size_t begin = b * batch_size;
    const std::size_t len = std::min(batch_size, texts.size() - begin);
    const auto slice = texts.subspan(begin, len);
    auto backoff = options.initial_backoff;
    for (int attempt = 1;; ++attempt) {
      try {
        auto vectors = backend.embed(slice);
        if (vectors.size() != len) throw EmbeddingError("backend returned wrong count", false);
        for (std::size_t i = 0; i < len; ++i) {
          normalize_in_place(vectors[i]);
          out[begin + i] = std::move(vectors[i]);
        }
        return;
      } catch (const EmbeddingError& e) {
        if (!e.retryable() || attempt >= options.max_attempts) {
          failures[b] = e.what();
          return;
        }
      }
      sleep(backoff);
      backoff *= 2;
    }
  });

  std::vector<std::size_t> failed;
  std::string message;
  for (std::size_t b = 0; b < n_batches; ++b) {
    if (failures[b].empty()) continue;
    failed.push_back(b);
    message += (message.empty() ? "" : ", ") + std::to_string(b);
  }
  if (!failed.empty()) {
    const auto what =
        "embedding failed for batch indices [" + message + "]: " + failures[failed.front()];
    throw EmbeddingBatchError(what, std::move(failed));
  }
  if (!out.empty()) {
    const auto dim = out.front().size();
    for (const auto& v : out) {
      if (v.size() != dim) throw EmbeddingError("backend returned mixed dimensions", false);
    }
  }
  return out;
}

}  // namespace lcsynth
