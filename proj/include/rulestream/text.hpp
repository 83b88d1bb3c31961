#pragma once
#include <string>
#include <string_view>
#include <vector>

namespace rulestream {

// Collapse runs of whitespace to single spaces and trim the ends.
std::string normalize_ws(std::string_view text);

std::string to_lower(std::string_view text);

std::string trim(std::string_view text);

// Case-insensitive substring search; returns npos when absent.
std::size_t ifind(std::string_view haystack, std::string_view needle, std::size_t from = 0);

// True when `text` starts with the word `word` (case-insensitive, word boundary after).
bool starts_with_word(std::string_view text, std::string_view word);

// True when `text` contains `word` as a standalone word at or after `from`.
bool contains_word(std::string_view text, std::string_view word, std::size_t from = 0);

// "If ..., then ..." shape check on the normalized text: a leading "if" word
// and a standalone "then" somewhere after it.
bool is_if_then_shaped(std::string_view text);

// Stable 64-bit FNV-1a, used for scripted-backend digests and transcripts.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 1469598103934665603ull);

std::string to_hex(std::uint64_t value);

std::vector<std::string> split_lines(std::string_view text);

} // namespace rulestream
