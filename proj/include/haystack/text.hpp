#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

// UTF-8 helpers. Offsets exposed by the annotation layer are code points, so
// everything that slices sentences goes through these.
namespace haystack::text {

std::u32string decode_utf8(std::string_view s);
std::string encode_utf8(std::u32string_view s);
void append_utf8(std::string& out, char32_t cp);

std::size_t code_point_count(std::string_view s);

/// Byte offset of code point index `cp_index` (== s.size() at the end).
std::size_t byte_offset(std::string_view s, std::size_t cp_index);

/// Slice by code point offsets [start, end).
std::string slice(std::string_view s, std::size_t start, std::size_t end);

/// Collapse all runs of whitespace to a single space and trim both ends.
std::string normalize_whitespace(std::string_view s);

std::string to_lower_ascii(std::string_view s);
std::string trim(std::string_view s);

bool is_space(char32_t c);
bool is_ascii_upper(char32_t c);
bool is_ascii_lower(char32_t c);
bool is_ascii_digit(char32_t c);
/// Letters, digits, and any non-ASCII code point that is not known punctuation.
bool is_word_char(char32_t c);
bool is_apostrophe(char32_t c);

/// Count of standalone (whole-word, case-sensitive) occurrences of `word`.
std::size_t count_word(std::string_view haystack, std::string_view word);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

}  // namespace haystack::text
