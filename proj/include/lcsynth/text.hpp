#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace lcsynth {

constexpr bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

std::string_view trim(std::string_view text);

/// Whitespace-delimited words, as views into `text`.
std::vector<std::string_view> split_words(std::string_view text);

std::size_t count_words(std::string_view text);

/// Lowercased word with leading/trailing non-alphanumeric ASCII removed.
/// Returns an empty string when nothing is left.
std::string normalize_word(std::string_view word);

/// 64-bit FNV-1a; stable across platforms, used for config hashes and mocks.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string to_hex(std::uint64_t value);

/// Compact human units for token counts (binary: 131072 -> "128k",
/// 1048576 -> "1M").
std::string format_tokens(std::uint64_t tokens);

/// Compact human units for decimal magnitudes (2000000 -> "2M").
std::string format_decimal(double value);

}  // namespace lcsynth
