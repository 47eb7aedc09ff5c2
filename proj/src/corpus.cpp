#include "lcsynth/corpus.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "lcsynth/random.hpp"
#include "lcsynth/text.hpp"

namespace lcsynth {

using nlohmann::json;

Corpus::Corpus(std::vector<Document> documents, std::shared_ptr<const Tokenizer> tokenizer)
    : documents_(std::move(documents)), tokenizer_(std::move(tokenizer)) {
  index_documents(true);
}

Corpus::Corpus(std::vector<Document> documents, std::shared_ptr<const Tokenizer> tokenizer,
               Counted)
    : documents_(std::move(documents)), tokenizer_(std::move(tokenizer)) {
  index_documents(false);
}

void Corpus::index_documents(bool recount) {
  if (!tokenizer_) tokenizer_ = std::make_shared<WhitespaceTokenizer>();
  by_id_.reserve(documents_.size());
  for (std::size_t i = 0; i < documents_.size(); ++i) {
    auto& doc = documents_[i];
    if (doc.text.empty()) throw CorpusError("document '" + doc.id + "' has empty text");
    if (!by_id_.emplace(doc.id, i).second) {
      throw CorpusError("duplicate document id '" + doc.id + "'");
    }
    if (recount) doc.token_count = tokenizer_->count(doc.text);
  }
}

const Document* Corpus::find(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &documents_[it->second];
}

std::uint64_t Corpus::total_tokens() const {
  std::uint64_t total = 0;
  for (const auto& doc : documents_) total += doc.token_count;
  return total;
}

Corpus read_corpus_jsonl(std::istream& in, std::shared_ptr<const Tokenizer> tokenizer) {
  std::vector<Document> docs;
  std::unordered_map<std::string, std::size_t> first_line;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto where = "line " + std::to_string(line_no);
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw CorpusError(where + ": malformed JSON (" + e.what() + ")");
    }
    if (!record.is_object()) throw CorpusError(where + ": expected a JSON object");
    for (const char* key : {"id", "text"}) {
      if (!record.contains(key) || !record[key].is_string()) {
        throw CorpusError(where + ": missing string field \"" + key + "\"");
      }
    }
    Document doc;
    doc.id = record["id"].get<std::string>();
    doc.text = record["text"].get<std::string>();
    if (record.contains("source")) {
      if (!record["source"].is_string()) {
        throw CorpusError(where + ": field \"source\" must be a string");
      }
      doc.source = record["source"].get<std::string>();
    }
    if (doc.text.empty()) throw CorpusError(where + ": empty \"text\"");
    if (const auto [it, inserted] = first_line.emplace(doc.id, line_no); !inserted) {
      throw CorpusError(where + ": duplicate id '" + doc.id + "' (first seen on line " +
                        std::to_string(it->second) + ")");
    }
    docs.push_back(std::move(doc));
  }
  return Corpus(std::move(docs), std::move(tokenizer));
}

Corpus ingest_corpus(const std::string& path, std::shared_ptr<const Tokenizer> tokenizer) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open corpus file '" + path + "'");
  return read_corpus_jsonl(in, std::move(tokenizer));
}

void write_documents_jsonl(const std::vector<Document>& documents, std::ostream& out) {
  for (const auto& doc : documents) {
    json record{{"id", doc.id}, {"text", doc.text}};
    if (!doc.source.empty()) record["source"] = doc.source;
    out << record.dump() << '\n';
  }
}

void write_corpus_jsonl(const Corpus& corpus, std::ostream& out) {
  write_documents_jsonl(corpus.documents(), out);
}

std::vector<TextChunk> chunk_text(std::string_view text, std::size_t max_tokens,
                                  const Tokenizer& tok, std::string_view parent_id) {
  if (max_tokens < 1) throw CorpusError("chunk_text: max_tokens must be at least 1");
  std::vector<TextChunk> chunks;
  if (text.empty()) return chunks;
  const auto spans = tok.spans(text);
  if (spans.empty()) {
    chunks.push_back({std::string(parent_id), 0, std::string(text), 0});
    return chunks;
  }
  std::size_t start_byte = 0;
  for (std::size_t first = 0; first < spans.size(); first += max_tokens) {
    const std::size_t last = std::min(first + max_tokens, spans.size()) - 1;
    const bool final_chunk = last + 1 == spans.size();
    const std::size_t end_byte = final_chunk ? text.size() : spans[last].end;
    chunks.push_back({std::string(parent_id), chunks.size(),
                      std::string(text.substr(start_byte, end_byte - start_byte)),
                      last - first + 1});
    start_byte = end_byte;
  }
  return chunks;
}

TextChunk sample_random_chunk(const Corpus& corpus, std::size_t chunk_tokens, std::uint64_t seed) {
  if (corpus.empty()) throw CorpusError("sample_random_chunk: corpus is empty");
  if (chunk_tokens < 1) throw CorpusError("sample_random_chunk: chunk_tokens must be at least 1");
  Rng rng(seed);
  const auto& doc = corpus[static_cast<std::size_t>(rng.below(corpus.size()))];
  const auto spans = corpus.tokenizer().spans(doc.text);
  if (spans.empty()) return {doc.id, 0, doc.text, 0};
  const std::size_t take = std::min(chunk_tokens, spans.size());
  const auto start = static_cast<std::size_t>(rng.below(spans.size() - take + 1));
  const std::size_t begin = spans[start].begin;
  const std::size_t end = spans[start + take - 1].end;
  return {doc.id, start, doc.text.substr(begin, end - begin), take};
}

Corpus downsample_short(const Corpus& corpus, std::size_t threshold_tokens, double keep_p,
                        std::uint64_t seed) {
  if (!(keep_p >= 0.0 && keep_p <= 1.0)) {
    throw CorpusError("downsample_short: keep_p must lie in [0, 1]");
  }
  Rng rng(seed);
  std::vector<Document> kept;
  for (const auto& doc : corpus.documents()) {
    if (doc.token_count >= threshold_tokens || rng.bernoulli(keep_p)) kept.push_back(doc);
  }
  return Corpus(std::move(kept), corpus.tokenizer_ptr(), Corpus::Counted{});
}

std::vector<Document> select_by_length(const Corpus& corpus, std::size_t min_tokens,
                                       std::size_t max_tokens) {
  if (min_tokens > max_tokens) throw CorpusError("select_by_length: min_tokens > max_tokens");
  std::vector<Document> out;
  for (const auto& doc : corpus.documents()) {
    if (doc.token_count >= min_tokens && doc.token_count <= max_tokens) out.push_back(doc);
  }
  return out;
}

}  // namespace lcsynth
