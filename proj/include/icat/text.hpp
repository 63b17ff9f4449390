#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace icat {

/// Splits on Unicode whitespace (ASCII plus the Zs/line/paragraph separators).
/// Runs of whitespace collapse; punctuation stays attached to its word.
std::vector<std::string> tokenize_words(std::string_view text);

/// Joins words with single spaces.
std::string join_words(const std::vector<std::string>& words, std::size_t begin, std::size_t end);
std::string join_words(const std::vector<std::string>& words);

/// Whitespace-normalized form: tokenize then rejoin.
std::string normalize_whitespace(std::string_view text);

std::string to_lower_ascii(std::string_view text);
std::string_view trim(std::string_view text);

/// Number of Unicode code points; invalid bytes count as one code point each.
std::size_t utf8_length(std::string_view text);

/// Byte offset of code point `index` (clamped to the string size).
std::size_t utf8_offset(std::string_view text, std::size_t index);

/// Substring addressed by code point indices [begin, end).
std::string utf8_substr(std::string_view text, std::size_t begin, std::size_t end);

/// Longest prefix of at most `max_chars` code points.
std::string_view utf8_truncate(std::string_view text, std::size_t max_chars);

}  // namespace icat
