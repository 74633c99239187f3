#pragma once

#include <string>
#include <vector>

namespace viunit::dsl {

enum class TokKind {
  Name,
  Keyword,
  Number,
  String,
  FString,
  Op,
  Newline,
  Indent,
  Dedent,
  End,
};

struct Token {
  TokKind kind;
  std::string text;
  double number = 0;
  int line = 1;
  int col = 1;
};

// Thrown by lexer and parser; mapped to the compile_error outcome.
struct LexParseError {
  std::string message;
  int line;
  int col;
};

// Python-style tokenization: indentation blocks, comments, string and
// f-string literals, newline suppression inside brackets.
std::vector<Token> tokenize(const std::string& source);

bool is_keyword(const std::string& word);
bool is_forbidden_keyword(const std::string& word);

}  // namespace viunit::dsl
