#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lcsynth {

enum class TokenizerKind { whitespace_reference, external_vocab };

struct TokenizerSpec {
  TokenizerKind kind = TokenizerKind::whitespace_reference;
  // external_vocab only: a tiktoken-style rank file ("<base64> <rank>" per
  // line, as shipped with Llama-3) or a GPT-2 style merges.txt.
  std::string vocab_path;
};

std::string to_string(TokenizerKind kind);
TokenizerKind tokenizer_kind_from_string(std::string_view name);

class TokenizerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Byte range [begin, end) of one token inside the tokenized text.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  virtual std::size_t count(std::string_view text) const = 0;

  /// Token byte ranges in order. Spans never overlap; bytes not covered by
  /// any span are separators (whitespace for the reference tokenizer).
  virtual std::vector<TokenSpan> spans(std::string_view text) const = 0;

  virtual TokenizerKind kind() const = 0;

  /// True when count(a + ws + b) == count(a) + count(b) for any whitespace
  /// separator ws.
  virtual bool whitespace_additive() const { return false; }
};

/// Whitespace word count. Deterministic and dependency free; the default.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  std::size_t count(std::string_view text) const override;
  std::vector<TokenSpan> spans(std::string_view text) const override;
  TokenizerKind kind() const override { return TokenizerKind::whitespace_reference; }
  bool whitespace_additive() const override { return true; }
};

/// Rank-based byte-pair encoding over a loaded vocabulary. Pre-tokenization
/// splits on whitespace runs and attaches a single preceding space to the
/// following word, so counts approximate (but do not reproduce) the
/// regex pre-tokenizer of production BPE tokenizers.
class RankedBpeTokenizer final : public Tokenizer {
 public:
  explicit RankedBpeTokenizer(std::unordered_map<std::string, std::uint32_t> ranks);

  static RankedBpeTokenizer from_file(const std::string& path);
  /// Parses either format described on TokenizerSpec::vocab_path.
  static RankedBpeTokenizer from_string(std::string_view contents);

  std::size_t count(std::string_view text) const override;
  std::vector<TokenSpan> spans(std::string_view text) const override;
  TokenizerKind kind() const override { return TokenizerKind::external_vocab; }

  std::size_t vocab_size() const { return ranks_.size(); }

 private:
  void encode_piece(std::string_view text, std::size_t offset,
                    std::vector<TokenSpan>& out) const;

  std::unordered_map<std::string, std::uint32_t> ranks_;
};

std::shared_ptr<const Tokenizer> make_tokenizer(const TokenizerSpec& spec);

inline std::size_t count_tokens(std::string_view text, const Tokenizer& tok) {
  return tok.count(text);
}

/// Prefix of `text` holding at most `n` tokens when re-tokenized.
std::string_view first_tokens(std::string_view text, std::size_t n, const Tokenizer& tok);

}  // namespace lcsynth
