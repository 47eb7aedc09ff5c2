#include "lcsynth/text.hpp"

#include <cctype>
#include <cmath>
#include <sstream>

namespace lcsynth {

std::string_view trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && is_space(text[begin])) ++begin;
  while (end > begin && is_space(text[end - 1])) --end;
  return text.substr(begin, end - begin);
}

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) words.push_back(text.substr(start, i - start));
  }
  return words;
}

std::size_t count_words(std::string_view text) {
  std::size_t count = 0;
  bool in_word = false;
  for (const char c : text) {
    if (is_space(c)) {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++count;
    }
  }
  return count;
}

std::string normalize_word(std::string_view word) {
  auto keep = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  std::size_t begin = 0;
  std::size_t end = word.size();
  while (begin < end && !keep(word[begin])) ++begin;
  while (end > begin && !keep(word[end - 1])) --end;
  std::string out;
  out.reserve(end - begin);
  for (std::size_t i = begin; i < end; ++i) {
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(word[i]))));
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (const char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kDigits[value & 0xF];
    value >>= 4;
  }
  return out;
}

namespace {

std::string trim_number(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

}  // namespace

std::string format_tokens(std::uint64_t tokens) {
  constexpr std::uint64_t kKi = 1024;
  constexpr std::uint64_t kMi = kKi * kKi;
  if (tokens >= kMi && tokens % kMi == 0) return std::to_string(tokens / kMi) + "M";
  if (tokens >= kKi && tokens % kKi == 0) return std::to_string(tokens / kKi) + "k";
  return std::to_string(tokens);
}

std::string format_decimal(double value) {
  const double mag = std::fabs(value);
  if (mag >= 1e9) return trim_number(value / 1e9) + "B";
  if (mag >= 1e6) return trim_number(value / 1e6) + "M";
  if (mag >= 1e3) return trim_number(value / 1e3) + "k";
  return trim_number(value);
}

}  // namespace lcsynth
