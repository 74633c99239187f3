#include <memory>

#include "lexer.hpp"
#include "viunit/dsl/program.hpp"
#include "viunit/text.hpp"

namespace viunit::dsl {

namespace {

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  ProgramAst parse_module() {
    skip_newlines();
    expect_keyword("def", "expected a single 'def execute_command' function");
    ProgramAst ast;
    Token name = expect(TokKind::Name, "expected function name");
    if (name.text != "execute_command")
      error(name, "top-level function must be named execute_command");
    expect_op("(");
    Token param = expect(TokKind::Name, "expected one parameter");
    ast.parameter = param.text;
    if (peek_op(")")) {
      advance();
    } else {
      error(peek(), "execute_command takes exactly one parameter");
    }
    // Optional return annotation: -> str
    if (peek_op("->")) {
      advance();
      if (peek().kind == TokKind::Name || peek().kind == TokKind::String)
        advance();
      else
        error(peek(), "malformed return annotation");
    }
    expect_op(":");
    expect(TokKind::Newline, "expected newline after function header");
    ast.body = parse_block();
    skip_newlines();
    if (peek().kind != TokKind::End)
      error(peek(),
            "only one top-level execute_command definition is allowed");
    return ast;
  }

 private:
  std::vector<Token> toks_;
  std::size_t pos_ = 0;

  [[noreturn]] void error(const Token& t, const std::string& msg) {
    throw LexParseError{msg, t.line, t.col};
  }

  const Token& peek(int ahead = 0) const {
    std::size_t i = pos_ + ahead;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  Token advance() { return toks_[std::min(pos_++, toks_.size() - 1)]; }

  bool peek_op(const std::string& text, int ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == TokKind::Op && t.text == text;
  }
  bool peek_kw(const std::string& text) const {
    const Token& t = peek();
    return t.kind == TokKind::Keyword && t.text == text;
  }
  bool accept_op(const std::string& text) {
    if (peek_op(text)) {
      advance();
      return true;
    }
    return false;
  }
  bool accept_kw(const std::string& text) {
    if (peek_kw(text)) {
      advance();
      return true;
    }
    return false;
  }
  Token expect(TokKind k, const std::string& msg) {
    if (peek().kind != k) error(peek(), msg);
    return advance();
  }
  void expect_op(const std::string& text) {
    if (!accept_op(text)) error(peek(), "expected '" + text + "'");
  }
  void expect_keyword(const std::string& text, const std::string& msg) {
    if (!accept_kw(text)) error(peek(), msg);
  }
  void skip_newlines() {
    while (peek().kind == TokKind::Newline) advance();
  }
  void check_forbidden(const Token& t) {
    if (t.kind == TokKind::Keyword && is_forbidden_keyword(t.text))
      error(t, "unsupported construct '" + t.text + "'");
  }

  template <typename T>
  std::unique_ptr<T> make(const Token& at) {
    auto node = std::make_unique<T>();
    node->line = at.line;
    node->col = at.col;
    return node;
  }

  std::vector<StmtPtr> parse_block() {
    skip_newlines();
    if (peek().kind != TokKind::Indent)
      error(peek(), "expected an indented block");
    advance();
    std::vector<StmtPtr> body;
    while (true) {
      skip_newlines();
      if (peek().kind == TokKind::Dedent) {
        advance();
        break;
      }
      if (peek().kind == TokKind::End) break;
      body.push_back(parse_statement());
    }
    if (body.empty()) error(peek(), "empty block");
    return body;
  }

  StmtPtr parse_statement() {
    const Token& t = peek();
    check_forbidden(t);
    if (t.kind == TokKind::Keyword) {
      if (t.text == "def")
        error(t, "nested function definitions are not allowed");
      if (t.text == "return") return parse_return();
      if (t.text == "if") return parse_if();
      if (t.text == "for") return parse_for();
      if (t.text == "while") return parse_while();
      if (t.text == "break") return parse_simple<Break>();
      if (t.text == "continue") return parse_simple<Continue>();
      if (t.text == "pass") return parse_simple<Pass>();
    }
    return parse_assign_or_expr();
  }

  template <typename T>
  StmtPtr parse_simple() {
    Token t = advance();
    auto node = make<T>(t);
    end_statement();
    return node;
  }

  void end_statement() {
    if (peek().kind == TokKind::Newline) {
      advance();
    } else if (peek().kind != TokKind::Dedent && peek().kind != TokKind::End) {
      error(peek(), "unexpected token after statement");
    }
  }

  StmtPtr parse_return() {
    Token t = advance();
    auto node = make<Return>(t);
    if (peek().kind != TokKind::Newline && peek().kind != TokKind::Dedent &&
        peek().kind != TokKind::End)
      node->value = parse_expression();
    end_statement();
    return node;
  }

  StmtPtr parse_if() {
    Token t = advance();
    auto node = make<If>(t);
    node->condition = parse_expression();
    expect_op(":");
    expect(TokKind::Newline, "expected newline after condition");
    node->body = parse_block();
    skip_newlines();
    if (peek_kw("elif")) {
      // Re-enter as a nested if in the else branch.
      node->orelse.push_back(parse_if_as_elif());
    } else if (accept_kw("else")) {
      expect_op(":");
      expect(TokKind::Newline, "expected newline after else");
      node->orelse = parse_block();
    }
    return node;
  }

  StmtPtr parse_if_as_elif() {
    Token t = advance();  // consume 'elif'
    auto node = make<If>(t);
    node->condition = parse_expression();
    expect_op(":");
    expect(TokKind::Newline, "expected newline after condition");
    node->body = parse_block();
    skip_newlines();
    if (peek_kw("elif")) {
      node->orelse.push_back(parse_if_as_elif());
    } else if (accept_kw("else")) {
      expect_op(":");
      expect(TokKind::Newline, "expected newline after else");
      node->orelse = parse_block();
    }
    return node;
  }

  std::vector<std::string> parse_target_names() {
    std::vector<std::string> names;
    bool parens = accept_op("(");
    names.push_back(expect(TokKind::Name, "expected a name").text);
    while (accept_op(",")) {
      names.push_back(expect(TokKind::Name, "expected a name").text);
    }
    if (parens) expect_op(")");
    return names;
  }

  StmtPtr parse_for() {
    Token t = advance();
    auto node = make<For>(t);
    node->targets = parse_target_names();
    expect_keyword("in", "expected 'in'");
    node->iterable = parse_expression();
    expect_op(":");
    expect(TokKind::Newline, "expected newline after for header");
    node->body = parse_block();
    return node;
  }

  StmtPtr parse_while() {
    Token t = advance();
    auto node = make<While>(t);
    node->condition = parse_expression();
    expect_op(":");
    expect(TokKind::Newline, "expected newline after while condition");
    node->body = parse_block();
    return node;
  }

  StmtPtr parse_assign_or_expr() {
    Token t = peek();
    // Lookahead for tuple-unpack assignment: name (, name)* =
    if (t.kind == TokKind::Name) {
      std::size_t save = pos_;
      std::vector<std::string> names;
      names.push_back(advance().text);
      bool tuple_form = false;
      while (peek_op(",") && peek(1).kind == TokKind::Name) {
        advance();
        names.push_back(advance().text);
        tuple_form = true;
      }
      if (peek_op("=")) {
        advance();
        auto node = make<Assign>(t);
        node->targets = std::move(names);
        node->value = parse_expression();
        end_statement();
        return node;
      }
      if (!tuple_form && (peek_op("+=") || peek_op("-=") || peek_op("*=") ||
                          peek_op("/="))) {
        Token op = advance();
        auto node = make<AugAssign>(t);
        node->target = names[0];
        node->op = op.text == "+="   ? Binary::Op::Add
                   : op.text == "-=" ? Binary::Op::Sub
                   : op.text == "*=" ? Binary::Op::Mul
                                     : Binary::Op::Div;
        node->value = parse_expression();
        end_statement();
        return node;
      }
      pos_ = save;  // plain expression statement
    }
    auto node = make<ExprStmt>(t);
    node->expr = parse_expression();
    if (peek_op("=")) error(peek(), "assignment target must be a plain name");
    end_statement();
    return node;
  }

  // Expression grammar, precedence climbing.
  ExprPtr parse_expression() { return parse_ternary(); }

  ExprPtr parse_ternary() {
    ExprPtr value = parse_or();
    if (peek_kw("if")) {
      Token t = advance();
      auto node = make<Ternary>(t);
      node->if_true = std::move(value);
      node->condition = parse_or();
      expect_keyword("else", "ternary expression requires 'else'");
      node->if_false = parse_ternary();
      return node;
    }
    return value;
  }

  ExprPtr parse_or() {
    ExprPtr first = parse_and();
    if (!peek_kw("or")) return first;
    Token t = peek();
    auto node = make<BoolOp>(t);
    node->is_and = false;
    node->operands.push_back(std::move(first));
    while (accept_kw("or")) node->operands.push_back(parse_and());
    return node;
  }

  ExprPtr parse_and() {
    ExprPtr first = parse_not();
    if (!peek_kw("and")) return first;
    Token t = peek();
    auto node = make<BoolOp>(t);
    node->is_and = true;
    node->operands.push_back(std::move(first));
    while (accept_kw("and")) node->operands.push_back(parse_not());
    return node;
  }

  ExprPtr parse_not() {
    if (peek_kw("not")) {
      Token t = advance();
      auto node = make<Unary>(t);
      node->op = Unary::Op::Not;
      node->operand = parse_not();
      return node;
    }
    return parse_comparison();
  }

  ExprPtr parse_comparison() {
    ExprPtr first = parse_additive();
    std::vector<std::pair<Compare::Op, ExprPtr>> rest;
    Token t = peek();
    while (true) {
      Compare::Op op;
      if (accept_op("==")) op = Compare::Op::Eq;
      else if (accept_op("!=")) op = Compare::Op::Ne;
      else if (accept_op("<=")) op = Compare::Op::Le;
      else if (accept_op(">=")) op = Compare::Op::Ge;
      else if (accept_op("<")) op = Compare::Op::Lt;
      else if (accept_op(">")) op = Compare::Op::Gt;
      else if (peek_kw("in")) {
        advance();
        op = Compare::Op::In;
      } else if (peek_kw("not") && peek(1).kind == TokKind::Keyword &&
                 peek(1).text == "in") {
        advance();
        advance();
        op = Compare::Op::NotIn;
      } else {
        break;
      }
      rest.emplace_back(op, parse_additive());
    }
    if (rest.empty()) return first;
    auto node = make<Compare>(t);
    node->first = std::move(first);
    node->rest = std::move(rest);
    return node;
  }

  ExprPtr parse_additive() {
    ExprPtr lhs = parse_multiplicative();
    while (peek_op("+") || peek_op("-")) {
      Token t = advance();
      auto node = make<Binary>(t);
      node->op = t.text == "+" ? Binary::Op::Add : Binary::Op::Sub;
      node->lhs = std::move(lhs);
      node->rhs = parse_multiplicative();
      lhs = std::move(node);
    }
    return lhs;
  }

  ExprPtr parse_multiplicative() {
    ExprPtr lhs = parse_unary();
    while (peek_op("*") || peek_op("/") || peek_op("//") || peek_op("%")) {
      Token t = advance();
      auto node = make<Binary>(t);
      node->op = t.text == "*"    ? Binary::Op::Mul
                 : t.text == "/"  ? Binary::Op::Div
                 : t.text == "//" ? Binary::Op::FloorDiv
                                  : Binary::Op::Mod;
      node->lhs = std::move(lhs);
      node->rhs = parse_unary();
      lhs = std::move(node);
    }
    return lhs;
  }

  ExprPtr parse_unary() {
    if (peek_op("-") || peek_op("+")) {
      Token t = advance();
      auto node = make<Unary>(t);
      node->op = t.text == "-" ? Unary::Op::Neg : Unary::Op::Pos;
      node->operand = parse_unary();
      return node;
    }
    return parse_power();
  }

  ExprPtr parse_power() {
    ExprPtr base = parse_postfix();
    if (peek_op("**")) {
      Token t = advance();
      auto node = make<Binary>(t);
      node->op = Binary::Op::Pow;
      node->lhs = std::move(base);
      node->rhs = parse_unary();  // right associative
      return node;
    }
    return base;
  }

  ExprPtr parse_postfix() {
    ExprPtr expr = parse_atom();
    while (true) {
      if (peek_op(".")) {
        Token t = advance();
        auto node = make<Attribute>(t);
        node->object = std::move(expr);
        node->name = expect(TokKind::Name, "expected attribute name").text;
        expr = std::move(node);
      } else if (peek_op("(")) {
        Token t = advance();
        auto node = make<Call>(t);
        node->callee = std::move(expr);
        parse_call_args(*node);
        expr = std::move(node);
      } else if (peek_op("[")) {
        Token t = advance();
        // Subscript or slice.
        ExprPtr start;
        if (!peek_op(":")) start = parse_expression();
        if (accept_op(":")) {
          auto node = make<Slice>(t);
          node->object = std::move(expr);
          node->start = std::move(start);
          if (!peek_op("]")) node->stop = parse_expression();
          expect_op("]");
          expr = std::move(node);
        } else {
          expect_op("]");
          auto node = make<Subscript>(t);
          node->object = std::move(expr);
          node->index = std::move(start);
          expr = std::move(node);
        }
      } else {
        break;
      }
    }
    return expr;
  }

  void parse_call_args(Call& call) {
    if (accept_op(")")) return;
    while (true) {
      if (peek().kind == TokKind::Name && peek_op("=", 1)) {
        std::string key = advance().text;
        advance();  // '='
        call.kwargs.emplace_back(key, parse_comp_aware_expression());
      } else {
        call.args.push_back(parse_comp_aware_expression());
      }
      if (accept_op(",")) {
        if (peek_op(")")) {
          advance();
          return;
        }
        continue;
      }
      expect_op(")");
      return;
    }
  }

  // A call argument may be a bare generator expression.
  ExprPtr parse_comp_aware_expression() {
    ExprPtr elt = parse_expression();
    if (peek_kw("for")) return parse_comprehension_tail(std::move(elt));
    return elt;
  }

  ExprPtr parse_comprehension_tail(ExprPtr element) {
    Token t = peek();
    auto node = make<Comprehension>(t);
    node->element = std::move(element);
    while (accept_kw("for")) {
      Comprehension::Clause clause;
      clause.targets = parse_target_names();
      expect_keyword("in", "expected 'in'");
      clause.iterable = parse_or();
      while (peek_kw("if")) {
        advance();
        clause.conditions.push_back(parse_or());
      }
      node->clauses.push_back(std::move(clause));
    }
    return node;
  }

  ExprPtr parse_atom() {
    const Token& t = peek();
    check_forbidden(t);
    switch (t.kind) {
      case TokKind::Number: {
        auto node = make<NumLit>(t);
        node->value = t.number;
        advance();
        return node;
      }
      case TokKind::String: {
        auto node = make<StrLit>(t);
        node->value = t.text;
        advance();
        return node;
      }
      case TokKind::FString:
        return parse_fstring(advance());
      case TokKind::Name: {
        auto node = make<NameRef>(t);
        node->name = t.text;
        advance();
        return node;
      }
      case TokKind::Keyword: {
        if (t.text == "True" || t.text == "False") {
          auto node = make<BoolLit>(t);
          node->value = t.text == "True";
          advance();
          return node;
        }
        if (t.text == "None") {
          auto node = make<NoneLit>(t);
          advance();
          return node;
        }
        if (t.text == "not") return parse_not();
        if (t.text == "lambda") return parse_lambda();
        error(t, "unexpected keyword '" + t.text + "'");
      }
      case TokKind::Op: {
        if (t.text == "(") {
          advance();
          ExprPtr inner = parse_expression();
          if (peek_kw("for")) {
            inner = parse_comprehension_tail(std::move(inner));
          }
          expect_op(")");
          return inner;
        }
        if (t.text == "[") {
          Token open = advance();
          auto node = make<ListLit>(open);
          if (accept_op("]")) return node;
          ExprPtr first = parse_expression();
          if (peek_kw("for")) {
            ExprPtr comp = parse_comprehension_tail(std::move(first));
            expect_op("]");
            return comp;
          }
          node->elements.push_back(std::move(first));
          while (accept_op(",")) {
            if (peek_op("]")) break;
            node->elements.push_back(parse_expression());
          }
          expect_op("]");
          return node;
        }
        error(t, "unexpected token '" + t.text + "'");
      }
      default:
        error(t, "unexpected end of expression");
    }
  }

  ExprPtr parse_lambda() {
    Token t = advance();
    auto node = make<Lambda>(t);
    if (!peek_op(":")) {
      node->params.push_back(expect(TokKind::Name, "expected parameter").text);
      while (accept_op(","))
        node->params.push_back(
            expect(TokKind::Name, "expected parameter").text);
    }
    expect_op(":");
    node->body = parse_ternary();
    return node;
  }

  ExprPtr parse_fstring(const Token& t) {
    auto node = make<FString>(t);
    const std::string& s = t.text;
    std::string literal;
    std::size_t i = 0;
    while (i < s.size()) {
      if (s[i] == '{' && i + 1 < s.size() && s[i + 1] == '{') {
        literal.push_back('{');
        i += 2;
        continue;
      }
      if (s[i] == '}' && i + 1 < s.size() && s[i + 1] == '}') {
        literal.push_back('}');
        i += 2;
        continue;
      }
      if (s[i] == '{') {
        std::size_t depth = 1;
        std::size_t j = i + 1;
        while (j < s.size() && depth > 0) {
          if (s[j] == '{') ++depth;
          if (s[j] == '}') --depth;
          ++j;
        }
        if (depth != 0)
          throw LexParseError{"unbalanced braces in f-string", t.line, t.col};
        std::string inner = s.substr(i + 1, j - i - 2);
        if (!literal.empty()) {
          FString::Part p;
          p.literal = literal;
          node->parts.push_back(std::move(p));
          literal.clear();
        }
        Parser sub(tokenize(inner));
        FString::Part p;
        sub.skip_newlines();
        p.expr = sub.parse_expression();
        node->parts.push_back(std::move(p));
        i = j;
        continue;
      }
      literal.push_back(s[i]);
      ++i;
    }
    if (!literal.empty()) {
      FString::Part p;
      p.literal = literal;
      node->parts.push_back(std::move(p));
    }
    return node;
  }
};

}  // namespace

std::string CompileError::format() const {
  return "line " + std::to_string(line) + ", col " + std::to_string(col) +
         ": " + message;
}

std::variant<std::shared_ptr<ProgramAst>, CompileError> parse_program(
    const ProgramSource& source) {
  if (viunit::trim(source.text).empty())
    return CompileError{"empty program source", 1, 1};
  try {
    Parser parser(tokenize(source.text));
    auto ast = std::make_shared<ProgramAst>(parser.parse_module());
    return ast;
  } catch (const LexParseError& e) {
    return CompileError{e.message, e.line, e.col};
  }
}

}  // namespace viunit::dsl
