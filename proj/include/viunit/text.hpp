#pragma once

#include <string>
#include <vector>

namespace viunit {

// Exact-match answer normalization: lowercase, trim, strip terminal
// punctuation, collapse internal whitespace, drop one leading article.
std::string normalize_answer(const std::string& raw);

// Detector label normalization: lowercase, trim, naive plural stripping
// ("cats" -> "cat", "buses" -> "bus").
std::string normalize_label(const std::string& raw);

std::string to_lower(std::string s);
std::string trim(const std::string& s);
std::string collapse_whitespace(const std::string& s);

// Whitespace-delimited token count after trimming quotes/punctuation.
std::size_t word_count(const std::string& s);

std::vector<std::string> split_words(const std::string& s);

// Strips surrounding quotes and leading/trailing punctuation.
std::string strip_quotes_punct(const std::string& s);

}  // namespace viunit
