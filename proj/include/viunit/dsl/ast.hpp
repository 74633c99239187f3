#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace viunit::dsl {

struct Expr;
struct Stmt;
using ExprPtr = std::unique_ptr<Expr>;
using StmtPtr = std::unique_ptr<Stmt>;

enum class ExprKind {
  NumLit,
  StrLit,
  FString,
  BoolLit,
  NoneLit,
  NameRef,
  ListLit,
  Unary,
  Binary,
  BoolOp,
  Compare,
  Ternary,
  Call,
  Attribute,
  Subscript,
  Slice,
  Lambda,
  Comprehension,
};

enum class StmtKind {
  Assign,
  AugAssign,
  ExprStmt,
  If,
  For,
  While,
  Return,
  Break,
  Continue,
  Pass,
};

struct Expr {
  ExprKind kind;
  int line = 0;
  int col = 0;
  virtual ~Expr() = default;

 protected:
  explicit Expr(ExprKind k) : kind(k) {}
};

struct Stmt {
  StmtKind kind;
  int line = 0;
  int col = 0;
  virtual ~Stmt() = default;

 protected:
  explicit Stmt(StmtKind k) : kind(k) {}
};

struct NumLit : Expr {
  NumLit() : Expr(ExprKind::NumLit) {}
  double value = 0;
};

struct StrLit : Expr {
  StrLit() : Expr(ExprKind::StrLit) {}
  std::string value;
};

// Alternating literal chunks and embedded expressions.
struct FString : Expr {
  FString() : Expr(ExprKind::FString) {}
  struct Part {
    std::string literal;  // used when expr is null
    ExprPtr expr;
  };
  std::vector<Part> parts;
};

struct BoolLit : Expr {
  BoolLit() : Expr(ExprKind::BoolLit) {}
  bool value = false;
};

struct NoneLit : Expr {
  NoneLit() : Expr(ExprKind::NoneLit) {}
};

struct NameRef : Expr {
  NameRef() : Expr(ExprKind::NameRef) {}
  std::string name;
};

struct ListLit : Expr {
  ListLit() : Expr(ExprKind::ListLit) {}
  std::vector<ExprPtr> elements;
};

struct Unary : Expr {
  Unary() : Expr(ExprKind::Unary) {}
  enum class Op { Neg, Pos, Not } op = Op::Neg;
  ExprPtr operand;
};

struct Binary : Expr {
  Binary() : Expr(ExprKind::Binary) {}
  enum class Op { Add, Sub, Mul, Div, FloorDiv, Mod, Pow } op = Op::Add;
  ExprPtr lhs;
  ExprPtr rhs;
};

struct BoolOp : Expr {
  BoolOp() : Expr(ExprKind::BoolOp) {}
  bool is_and = true;
  std::vector<ExprPtr> operands;
};

// first (op operand)+ with Python chaining semantics.
struct Compare : Expr {
  Compare() : Expr(ExprKind::Compare) {}
  enum class Op { Eq, Ne, Lt, Le, Gt, Ge, In, NotIn } /* per link */;
  ExprPtr first;
  std::vector<std::pair<Op, ExprPtr>> rest;
};

struct Ternary : Expr {
  Ternary() : Expr(ExprKind::Ternary) {}
  ExprPtr condition;
  ExprPtr if_true;
  ExprPtr if_false;
};

struct Call : Expr {
  Call() : Expr(ExprKind::Call) {}
  ExprPtr callee;
  std::vector<ExprPtr> args;
  std::vector<std::pair<std::string, ExprPtr>> kwargs;
};

struct Attribute : Expr {
  Attribute() : Expr(ExprKind::Attribute) {}
  ExprPtr object;
  std::string name;
};

struct Subscript : Expr {
  Subscript() : Expr(ExprKind::Subscript) {}
  ExprPtr object;
  ExprPtr index;
};

struct Slice : Expr {
  Slice() : Expr(ExprKind::Slice) {}
  ExprPtr object;
  ExprPtr start;  // may be null
  ExprPtr stop;   // may be null
};

struct Lambda : Expr {
  Lambda() : Expr(ExprKind::Lambda) {}
  std::vector<std::string> params;
  ExprPtr body;
};

// List comprehension or generator expression (treated identically);
// supports multiple for-clauses and if-filters.
struct Comprehension : Expr {
  Comprehension() : Expr(ExprKind::Comprehension) {}
  ExprPtr element;
  struct Clause {
    std::vector<std::string> targets;  // >1 means tuple unpack
    ExprPtr iterable;
    std::vector<ExprPtr> conditions;
  };
  std::vector<Clause> clauses;
};

struct Assign : Stmt {
  Assign() : Stmt(StmtKind::Assign) {}
  std::vector<std::string> targets;  // >1 means tuple unpack
  ExprPtr value;
};

struct AugAssign : Stmt {
  AugAssign() : Stmt(StmtKind::AugAssign) {}
  std::string target;
  Binary::Op op = Binary::Op::Add;
  ExprPtr value;
};

struct ExprStmt : Stmt {
  ExprStmt() : Stmt(StmtKind::ExprStmt) {}
  ExprPtr expr;
};

struct If : Stmt {
  If() : Stmt(StmtKind::If) {}
  ExprPtr condition;
  std::vector<StmtPtr> body;
  std::vector<StmtPtr> orelse;  // elif chains nest here
};

struct For : Stmt {
  For() : Stmt(StmtKind::For) {}
  std::vector<std::string> targets;
  ExprPtr iterable;
  std::vector<StmtPtr> body;
};

struct While : Stmt {
  While() : Stmt(StmtKind::While) {}
  ExprPtr condition;
  std::vector<StmtPtr> body;
};

struct Return : Stmt {
  Return() : Stmt(StmtKind::Return) {}
  ExprPtr value;  // may be null
};

struct Break : Stmt {
  Break() : Stmt(StmtKind::Break) {}
};

struct Continue : Stmt {
  Continue() : Stmt(StmtKind::Continue) {}
};

struct Pass : Stmt {
  Pass() : Stmt(StmtKind::Pass) {}
};

// Parsed form of a visual program: one execute_command(image) function.
struct ProgramAst {
  std::string parameter;
  std::vector<StmtPtr> body;
};

}  // namespace viunit::dsl
