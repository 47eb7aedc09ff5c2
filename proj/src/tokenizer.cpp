#include "lcsynth/tokenizer.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

#include "lcsynth/text.hpp"

namespace lcsynth {

std::string to_string(TokenizerKind kind) {
  switch (kind) {
    case TokenizerKind::whitespace_reference:
      return "whitespace-reference";
    case TokenizerKind::external_vocab:
      return "external-vocab";
  }
  return "unknown";
}

TokenizerKind tokenizer_kind_from_string(std::string_view name) {
  if (name == "whitespace-reference" || name == "whitespace") {
    return TokenizerKind::whitespace_reference;
  }
  if (name == "external-vocab" || name == "bpe") return TokenizerKind::external_vocab;
  throw TokenizerError("unknown tokenizer kind '" + std::string(name) + "'");
}

std::size_t WhitespaceTokenizer::count(std::string_view text) const { return count_words(text); }

std::vector<TokenSpan> WhitespaceTokenizer::spans(std::string_view text) const {
  std::vector<TokenSpan> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) out.push_back({start, i});
  }
  return out;
}

namespace {

constexpr std::uint32_t kNoRank = std::numeric_limits<std::uint32_t>::max();

int base64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

bool base64_decode(std::string_view in, std::string& out) {
  out.clear();
  std::uint32_t buffer = 0;
  int bits = 0;
  for (const char c : in) {
    if (c == '=') break;
    const int v = base64_value(c);
    if (v < 0) return false;
    buffer = (buffer << 6) | static_cast<std::uint32_t>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<char>((buffer >> bits) & 0xFF));
    }
  }
  return !out.empty();
}

// Inverse of the GPT-2 byte-to-unicode table used by merges.txt files.
std::array<int, 512> gpt2_codepoint_to_byte() {
  std::array<int, 512> table{};
  table.fill(-1);
  int next = 256;
  for (int b = 0; b < 256; ++b) {
    const bool printable = (b >= 33 && b <= 126) || (b >= 161 && b <= 172) || (b >= 174);
    if (printable) {
      table[static_cast<std::size_t>(b)] = b;
    } else {
      table[static_cast<std::size_t>(next++)] = b;
    }
  }
  return table;
}

// Decodes one merges.txt symbol (UTF-8 over the GPT-2 byte alphabet).
bool decode_gpt2_symbol(std::string_view symbol, std::string& out) {
  static const auto table = gpt2_codepoint_to_byte();
  out.clear();
  std::size_t i = 0;
  while (i < symbol.size()) {
    const auto lead = static_cast<unsigned char>(symbol[i]);
    std::uint32_t cp = 0;
    std::size_t len = 1;
    if (lead < 0x80) {
      cp = lead;
    } else if ((lead & 0xE0) == 0xC0 && i + 1 < symbol.size()) {
      cp = ((lead & 0x1Fu) << 6) | (static_cast<unsigned char>(symbol[i + 1]) & 0x3Fu);
      len = 2;
    } else {
      return false;
    }
    if (cp >= table.size() || table[cp] < 0) return false;
    out.push_back(static_cast<char>(table[cp]));
    i += len;
  }
  return true;
}

bool parse_rank(std::string_view s, std::uint32_t& value) {
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  return ec == std::errc() && ptr == end;
}

}  // namespace

RankedBpeTokenizer::RankedBpeTokenizer(std::unordered_map<std::string, std::uint32_t> ranks)
    : ranks_(std::move(ranks)) {}

RankedBpeTokenizer RankedBpeTokenizer::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TokenizerError("cannot open vocabulary file '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return from_string(buffer.str());
}

RankedBpeTokenizer RankedBpeTokenizer::from_string(std::string_view contents) {
  std::unordered_map<std::string, std::uint32_t> ranks;
  std::uint32_t merge_index = 0;
  enum class Format { unknown, tiktoken, merges } format = Format::unknown;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::string left;
  std::string right;
  while (pos <= contents.size()) {
    const auto nl = contents.find('\n', pos);
    const auto line =
        trim(contents.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
    pos = nl == std::string_view::npos ? contents.size() + 1 : nl + 1;
    ++line_no;
    if (line.empty()) continue;
    if (line.starts_with("#")) {
      if (format == Format::unknown) format = Format::merges;
      continue;
    }
    const auto sep = line.find(' ');
    if (sep == std::string_view::npos) {
      throw TokenizerError("vocabulary line " + std::to_string(line_no) + ": expected two fields");
    }
    const auto first = line.substr(0, sep);
    const auto second = trim(line.substr(sep + 1));
    std::uint32_t rank = 0;
    if (format == Format::unknown) {
      format = parse_rank(second, rank) && base64_decode(first, left) ? Format::tiktoken
                                                                       : Format::merges;
    }
    if (format == Format::tiktoken) {
      if (!parse_rank(second, rank) || !base64_decode(first, left)) {
        throw TokenizerError("vocabulary line " + std::to_string(line_no) + ": bad rank entry");
      }
      ranks.emplace(left, rank);
    } else {
      if (!decode_gpt2_symbol(first, left) || !decode_gpt2_symbol(second, right)) {
        throw TokenizerError("vocabulary line " + std::to_string(line_no) + ": bad merge entry");
      }
      ranks.emplace(left + right, merge_index++);
    }
  }
  if (ranks.empty()) throw TokenizerError("vocabulary is empty");
  return RankedBpeTokenizer(std::move(ranks));
}

void RankedBpeTokenizer::encode_piece(std::string_view text, std::size_t offset,
                                      std::vector<TokenSpan>& out) const {
  // Part boundaries; parts start as single bytes and merge by lowest rank.
  std::vector<std::size_t> bounds(text.size() + 1);
  for (std::size_t i = 0; i <= text.size(); ++i) bounds[i] = i;
  std::string key;
  while (bounds.size() > 2) {
    std::uint32_t best = kNoRank;
    std::size_t best_i = 0;
    for (std::size_t i = 0; i + 2 < bounds.size(); ++i) {
      key.assign(text.substr(bounds[i], bounds[i + 2] - bounds[i]));
      const auto it = ranks_.find(key);
      if (it != ranks_.end() && it->second < best) {
        best = it->second;
        best_i = i;
      }
    }
    if (best == kNoRank) break;
    bounds.erase(bounds.begin() + static_cast<std::ptrdiff_t>(best_i) + 1);
  }
  for (std::size_t i = 0; i + 1 < bounds.size(); ++i) {
    out.push_back({offset + bounds[i], offset + bounds[i + 1]});
  }
}

std::vector<TokenSpan> RankedBpeTokenizer::spans(std::string_view text) const {
  std::vector<TokenSpan> out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t ws_end = i;
    while (ws_end < text.size() && is_space(text[ws_end])) ++ws_end;
    if (ws_end > i) {
      // A single trailing ' ' of the run belongs to the next word.
      const bool attach = ws_end < text.size() && text[ws_end - 1] == ' ';
      const std::size_t run_end = attach ? ws_end - 1 : ws_end;
      if (run_end > i) encode_piece(text.substr(i, run_end - i), i, out);
      i = run_end;
    }
    std::size_t word_end = i < text.size() && text[i] == ' ' ? i + 1 : i;
    while (word_end < text.size() && !is_space(text[word_end])) ++word_end;
    if (word_end > i) encode_piece(text.substr(i, word_end - i), i, out);
    i = word_end;
  }
  return out;
}

std::size_t RankedBpeTokenizer::count(std::string_view text) const { return spans(text).size(); }

std::shared_ptr<const Tokenizer> make_tokenizer(const TokenizerSpec& spec) {
  switch (spec.kind) {
    case TokenizerKind::whitespace_reference:
      return std::make_shared<WhitespaceTokenizer>();
    case TokenizerKind::external_vocab:
      if (spec.vocab_path.empty()) throw TokenizerError("external-vocab tokenizer needs vocab_path");
      return std::make_shared<RankedBpeTokenizer>(RankedBpeTokenizer::from_file(spec.vocab_path));
  }
  throw TokenizerError("unknown tokenizer kind");
}

std::string_view first_tokens(std::string_view text, std::size_t n, const Tokenizer& tok) {
  const auto spans = tok.spans(text);
  if (spans.size() <= n) return text;
  // Merging tokenizers may re-split a cut prefix differently; back off until
  // the prefix fits.
  for (std::size_t k = n; k > 0; --k) {
    const auto prefix = text.substr(0, spans[k - 1].end);
    if (tok.count(prefix) <= n) return prefix;
  }
  return text.substr(0, 0);
}

}  // namespace lcsynth
