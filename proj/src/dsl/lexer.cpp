#include "lexer.hpp"

#include <cctype>
#include <cstring>
#include <set>
#include <stdexcept>

namespace viunit::dsl {

namespace {

const std::set<std::string> kKeywords = {
    "def",   "return", "if",   "elif",  "else", "for",    "while",
    "in",    "not",    "and",  "or",    "True", "False",  "None",
    "lambda", "break", "continue", "pass"};

// Python keywords outside the restricted grammar; rejected at parse time
// with a targeted message.
const std::set<std::string> kForbidden = {
    "import", "from",  "class",    "try",      "except", "finally",
    "raise",  "with",  "global",   "nonlocal", "del",    "assert",
    "yield",  "async", "await",    "exec",     "eval",   "open",
    "is"};

bool ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

}  // namespace

bool is_keyword(const std::string& word) { return kKeywords.count(word) > 0; }
bool is_forbidden_keyword(const std::string& word) {
  return kForbidden.count(word) > 0;
}

std::vector<Token> tokenize(const std::string& src) {
  std::vector<Token> toks;
  std::vector<int> indents{0};
  int line = 1;
  int col = 1;
  std::size_t i = 0;
  int bracket_depth = 0;
  bool at_line_start = true;

  auto push = [&](TokKind k, std::string text, double num = 0) {
    toks.push_back(Token{k, std::move(text), num, line, col});
  };
  auto error = [&](const std::string& msg) -> void {
    throw LexParseError{msg, line, col};
  };

  while (i < src.size()) {
    if (at_line_start && bracket_depth == 0) {
      // Measure indentation; skip blank/comment-only lines entirely.
      std::size_t j = i;
      int width = 0;
      while (j < src.size() && (src[j] == ' ' || src[j] == '\t')) {
        width += (src[j] == '\t') ? 8 - (width % 8) : 1;
        ++j;
      }
      if (j >= src.size() || src[j] == '\n' || src[j] == '\r' ||
          src[j] == '#') {
        while (j < src.size() && src[j] != '\n') ++j;
        if (j < src.size()) ++j;
        ++line;
        col = 1;
        i = j;
        continue;
      }
      col = width + 1;
      if (width > indents.back()) {
        indents.push_back(width);
        push(TokKind::Indent, "");
      } else {
        while (width < indents.back()) {
          indents.pop_back();
          push(TokKind::Dedent, "");
        }
        if (width != indents.back()) error("inconsistent indentation");
      }
      i = j;
      at_line_start = false;
      continue;
    }

    char c = src[i];
    if (c == '\r') {
      ++i;
      continue;
    }
    if (c == '\n') {
      ++i;
      ++line;
      col = 1;
      if (bracket_depth == 0) {
        push(TokKind::Newline, "");
        at_line_start = true;
      }
      continue;
    }
    if (c == ' ' || c == '\t') {
      ++i;
      ++col;
      continue;
    }
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') ++i;
      continue;
    }
    if (c == '\\' && i + 1 < src.size() && src[i + 1] == '\n') {
      i += 2;
      ++line;
      col = 1;
      continue;
    }

    if (ident_start(c)) {
      std::size_t start = i;
      int start_col = col;
      while (i < src.size() && ident_char(src[i])) {
        ++i;
        ++col;
      }
      std::string word = src.substr(start, i - start);
      // f-string prefix
      if ((word == "f" || word == "F") && i < src.size() &&
          (src[i] == '"' || src[i] == '\'')) {
        char quote = src[i];
        ++i;
        ++col;
        std::string body;
        while (i < src.size() && src[i] != quote) {
          if (src[i] == '\n') error("unterminated f-string");
          if (src[i] == '\\' && i + 1 < src.size()) {
            body.push_back(src[i]);
            body.push_back(src[i + 1]);
            i += 2;
            col += 2;
            continue;
          }
          body.push_back(src[i]);
          ++i;
          ++col;
        }
        if (i >= src.size()) error("unterminated f-string");
        ++i;
        ++col;
        Token t{TokKind::FString, body, 0, line, start_col};
        toks.push_back(t);
        continue;
      }
      Token t{is_keyword(word) || is_forbidden_keyword(word)
                  ? TokKind::Keyword
                  : TokKind::Name,
              word, 0, line, start_col};
      toks.push_back(t);
      continue;
    }

    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i + 1 < src.size() &&
         std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::size_t start = i;
      int start_col = col;
      bool seen_dot = false;
      while (i < src.size() &&
             (std::isdigit(static_cast<unsigned char>(src[i])) ||
              (src[i] == '.' && !seen_dot))) {
        if (src[i] == '.') seen_dot = true;
        ++i;
        ++col;
      }
      std::string text = src.substr(start, i - start);
      Token t{TokKind::Number, text, std::stod(text), line, start_col};
      toks.push_back(t);
      continue;
    }

    if (c == '"' || c == '\'') {
      char quote = c;
      int start_col = col;
      ++i;
      ++col;
      std::string body;
      while (i < src.size() && src[i] != quote) {
        if (src[i] == '\n') error("unterminated string literal");
        if (src[i] == '\\' && i + 1 < src.size()) {
          char e = src[i + 1];
          switch (e) {
            case 'n': body.push_back('\n'); break;
            case 't': body.push_back('\t'); break;
            case '\\': body.push_back('\\'); break;
            case '\'': body.push_back('\''); break;
            case '"': body.push_back('"'); break;
            default: body.push_back(e); break;
          }
          i += 2;
          col += 2;
          continue;
        }
        body.push_back(src[i]);
        ++i;
        ++col;
      }
      if (i >= src.size()) error("unterminated string literal");
      ++i;
      ++col;
      Token t{TokKind::String, body, 0, line, start_col};
      toks.push_back(t);
      continue;
    }

    // Operators, longest match first.
    static const char* kOps[] = {
        "**", "//", "==", "!=", "<=", ">=", "->", "+=", "-=", "*=", "/=",
        "+",  "-",  "*",  "/",  "%",  "<",  ">",  "=",  "(",  ")",  "[",
        "]",  "{",  "}",  ",",  ":",  "."};
    bool matched = false;
    for (const char* op : kOps) {
      std::size_t n = std::strlen(op);
      if (src.compare(i, n, op) == 0) {
        if (op[0] == '(' || op[0] == '[' || op[0] == '{') ++bracket_depth;
        if (op[0] == ')' || op[0] == ']' || op[0] == '}') {
          if (bracket_depth == 0) error("unbalanced bracket");
          --bracket_depth;
        }
        push(TokKind::Op, op);
        i += n;
        col += static_cast<int>(n);
        matched = true;
        break;
      }
    }
    if (!matched) error(std::string("unexpected character '") + c + "'");
  }

  if (bracket_depth != 0) {
    throw LexParseError{"unclosed bracket at end of input", line, col};
  }
  if (!toks.empty() && toks.back().kind != TokKind::Newline)
    toks.push_back(Token{TokKind::Newline, "", 0, line, col});
  while (indents.size() > 1) {
    indents.pop_back();
    toks.push_back(Token{TokKind::Dedent, "", 0, line, col});
  }
  toks.push_back(Token{TokKind::End, "", 0, line, col});
  return toks;
}

}  // namespace viunit::dsl
