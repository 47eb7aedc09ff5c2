#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lcsynth/tokenizer.hpp"

namespace lcsynth {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Document {
  std::string id;
  std::string text;
  std::string source;
  std::size_t token_count = 0;
};

struct TextChunk {
  std::string parent_id;
  // Chunk ordinal for chunk_text; token offset into the parent for
  // sample_random_chunk.
  std::size_t index = 0;
  std::string text;
  std::size_t token_count = 0;
};

/// Immutable document collection. Safe for concurrent reads.
class Corpus {
 public:
  Corpus() : tokenizer_(std::make_shared<WhitespaceTokenizer>()) {}

  /// Recomputes token counts under `tokenizer`; throws CorpusError on
  /// duplicate ids or empty text.
  Corpus(std::vector<Document> documents, std::shared_ptr<const Tokenizer> tokenizer);

  /// Same, but trusts the token counts already on `documents` (they must
  /// come from the same tokenizer, e.g. a subset of another Corpus).
  struct Counted {};
  Corpus(std::vector<Document> documents, std::shared_ptr<const Tokenizer> tokenizer, Counted);

  const std::vector<Document>& documents() const { return documents_; }
  std::size_t size() const { return documents_.size(); }
  bool empty() const { return documents_.empty(); }
  const Document& operator[](std::size_t i) const { return documents_[i]; }

  /// nullptr when absent.
  const Document* find(std::string_view id) const;

  const Tokenizer& tokenizer() const { return *tokenizer_; }
  const std::shared_ptr<const Tokenizer>& tokenizer_ptr() const { return tokenizer_; }

  std::uint64_t total_tokens() const;

 private:
  void index_documents(bool recount);

  std::vector<Document> documents_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::shared_ptr<const Tokenizer> tokenizer_;
};

/// Reads corpus JSONL: one object per line with string keys "id" and
/// "text" and an optional string "source". Blank lines are skipped.
Corpus read_corpus_jsonl(std::istream& in, std::shared_ptr<const Tokenizer> tokenizer);
Corpus ingest_corpus(const std::string& path, std::shared_ptr<const Tokenizer> tokenizer);

void write_corpus_jsonl(const Corpus& corpus, std::ostream& out);
void write_documents_jsonl(const std::vector<Document>& documents, std::ostream& out);

/// Greedy left-to-right split at token boundaries. Whitespace between two
/// chunks is carried by the later chunk, so concatenating the chunks in
/// order reproduces `text` byte for byte.
std::vector<TextChunk> chunk_text(std::string_view text, std::size_t max_tokens,
                                  const Tokenizer& tok, std::string_view parent_id = {});

/// A window of at most `chunk_tokens` consecutive tokens from a uniformly
/// chosen document, starting at a uniformly chosen token offset.
TextChunk sample_random_chunk(const Corpus& corpus, std::size_t chunk_tokens, std::uint64_t seed);

/// Keeps every document with at least `threshold_tokens` tokens; each
/// shorter document survives independently with probability `keep_p`.
Corpus downsample_short(const Corpus& corpus, std::size_t threshold_tokens, double keep_p,
                        std::uint64_t seed);

/// Documents with min_tokens <= token_count <= max_tokens, in corpus order.
std::vector<Document> select_by_length(const Corpus& corpus, std::size_t min_tokens,
                                       std::size_t max_tokens);

}  // namespace lcsynth
