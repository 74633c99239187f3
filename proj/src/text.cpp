#include "viunit/text.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace viunit {

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string collapse_whitespace(const std::string& s) {
  std::string out;
  bool in_space = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(c);
  }
  return out;
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> words;
  std::istringstream iss(s);
  std::string w;
  while (iss >> w) words.push_back(w);
  return words;
}

std::string strip_quotes_punct(const std::string& s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  auto strippable = [](char c) {
    return c == '"' || c == '\'' || c == '.' || c == ',' || c == '!' ||
           c == '?' || c == ';' || c == ':';
  };
  while (b < e && (strippable(s[b]) ||
                   std::isspace(static_cast<unsigned char>(s[b]))))
    ++b;
  while (e > b && (strippable(s[e - 1]) ||
                   std::isspace(static_cast<unsigned char>(s[e - 1]))))
    --e;
  return s.substr(b, e - b);
}

std::size_t word_count(const std::string& s) {
  return split_words(strip_quotes_punct(s)).size();
}

std::string normalize_answer(const std::string& raw) {
  std::string s = collapse_whitespace(to_lower(trim(raw)));
  while (!s.empty()) {
    char c = s.back();
    if (c == '.' || c == '!' || c == '?' || c == ',' || c == ';' || c == ':') {
      s.pop_back();
    } else {
      break;
    }
  }
  s = trim(s);
  // Single leading article, leading-only.
  for (const char* art : {"a ", "an ", "the "}) {
    std::string prefix(art);
    if (s.size() > prefix.size() && s.compare(0, prefix.size(), prefix) == 0) {
      s = s.substr(prefix.size());
      break;
    }
  }
  return trim(s);
}

std::string normalize_label(const std::string& raw) {
  std::string s = collapse_whitespace(to_lower(trim(raw)));
  if (s.size() > 3 && s.ends_with("ses")) {
    s.resize(s.size() - 2);  // buses -> bus
  } else if (s.size() > 2 && s.ends_with("s") && !s.ends_with("ss")) {
    s.pop_back();  // cats -> cat
  }
  return s;
}

}  // namespace viunit
