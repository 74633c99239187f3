#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <variant>

#include "viunit/dsl/program.hpp"
#include "viunit/text.hpp"

namespace viunit::dsl {

namespace {

using Clock = std::chrono::steady_clock;

struct Value;
using ValueList = std::vector<Value>;
using ListPtr = std::shared_ptr<ValueList>;

struct PatchData {
  ImageHandle image;
  Box box;
  std::optional<std::string> category;
};
using PatchPtr = std::shared_ptr<PatchData>;

struct Env;
using EnvPtr = std::shared_ptr<Env>;

struct LambdaData {
  const Lambda* node;
  EnvPtr closure;
};
using FuncPtr = std::shared_ptr<LambdaData>;

struct ImageVal {
  ImageHandle handle;
};

struct Value {
  std::variant<std::monostate, bool, double, std::string, ListPtr, PatchPtr,
               FuncPtr, ImageVal>
      v;

  static Value none() { return Value(); }
  static Value boolean(bool b) { return Value{{b}}; }
  static Value number(double d) { return Value{{d}}; }
  static Value str(std::string s) { return Value{{std::move(s)}}; }
  static Value list(ValueList items) {
    return Value{{std::make_shared<ValueList>(std::move(items))}};
  }
};

struct RuntimeSignal {
  std::string message;
};
struct TimeoutSignal {};
struct ReturnSignal {
  Value value;
};
struct BreakSignal {};
struct ContinueSignal {};

struct Env {
  std::map<std::string, Value> vars;
  EnvPtr parent;

  Value* find(const std::string& name) {
    for (Env* e = this; e; e = e->parent.get()) {
      auto it = e->vars.find(name);
      if (it != e->vars.end()) return &it->second;
    }
    return nullptr;
  }
};

bool truthy(const Value& val) {
  return std::visit(
      [](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::monostate>) return false;
        else if constexpr (std::is_same_v<T, bool>) return x;
        else if constexpr (std::is_same_v<T, double>) return x != 0.0;
        else if constexpr (std::is_same_v<T, std::string>) return !x.empty();
        else if constexpr (std::is_same_v<T, ListPtr>) return !x->empty();
        else return true;
      },
      val.v);
}

bool is_number(const Value& v) {
  return std::holds_alternative<double>(v.v) ||
         std::holds_alternative<bool>(v.v);
}
double as_number(const Value& v) {
  if (std::holds_alternative<bool>(v.v)) return std::get<bool>(v.v) ? 1 : 0;
  return std::get<double>(v.v);
}

std::string format_number(double d) {
  if (std::isfinite(d) && d == std::floor(d) && std::fabs(d) < 1e15) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0f", d);
    return buf;
  }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%g", d);
  return buf;
}

bool values_equal(const Value& a, const Value& b) {
  if (is_number(a) && is_number(b)) return as_number(a) == as_number(b);
  if (a.v.index() != b.v.index()) return false;
  return std::visit(
      [&](const auto& x) -> bool {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::monostate>) return true;
        else if constexpr (std::is_same_v<T, std::string>)
          return x == std::get<std::string>(b.v);
        else if constexpr (std::is_same_v<T, ListPtr>) {
          const auto& other = std::get<ListPtr>(b.v);
          if (x->size() != other->size()) return false;
          for (std::size_t i = 0; i < x->size(); ++i)
            if (!values_equal((*x)[i], (*other)[i])) return false;
          return true;
        } else if constexpr (std::is_same_v<T, PatchPtr>)
          return x == std::get<PatchPtr>(b.v);
        else
          return false;
      },
      a.v);
}

std::string type_name(const Value& v) {
  switch (v.v.index()) {
    case 0: return "NoneType";
    case 1: return "bool";
    case 2: return "number";
    case 3: return "str";
    case 4: return "list";
    case 5: return "ImagePatch";
    case 6: return "function";
    case 7: return "image";
  }
  return "object";
}

// str()/f-string rendering, Python flavored.
std::string py_str(const Value& val) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::monostate>) return "None";
        else if constexpr (std::is_same_v<T, bool>) return x ? "True" : "False";
        else if constexpr (std::is_same_v<T, double>) return format_number(x);
        else if constexpr (std::is_same_v<T, std::string>) return x;
        else if constexpr (std::is_same_v<T, ListPtr>) {
          std::string out = "[";
          for (std::size_t i = 0; i < x->size(); ++i) {
            if (i) out += ", ";
            out += py_str((*x)[i]);
          }
          return out + "]";
        } else if constexpr (std::is_same_v<T, PatchPtr>) {
          return x->category ? *x->category : std::string("image patch");
        } else {
          return "<object>";
        }
      },
      val.v);
}

// Return-value coercion: answers are compared as text.
std::string answer_text(const Value& val) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::monostate>) return "none";
        else if constexpr (std::is_same_v<T, bool>) return x ? "yes" : "no";
        else if constexpr (std::is_same_v<T, double>) return format_number(x);
        else if constexpr (std::is_same_v<T, std::string>) return x;
        else if constexpr (std::is_same_v<T, ListPtr>) {
          std::string out;
          for (std::size_t i = 0; i < x->size(); ++i) {
            if (i) out += ", ";
            out += answer_text((*x)[i]);
          }
          return out;
        } else if constexpr (std::is_same_v<T, PatchPtr>) {
          return x->category ? *x->category : std::string("image patch");
        } else {
          return "<object>";
        }
      },
      val.v);
}

class Interpreter {
 public:
  Interpreter(PerceptionBackend& backend, const ExecutionLimits& limits)
      : backend_(backend),
        limits_(limits),
        deadline_(Clock::now() +
                  std::chrono::duration_cast<Clock::duration>(
                      std::chrono::duration<double>(limits.budget_s))) {}

  Value run(const ProgramAst& ast, const ImageHandle& image) {
    auto env = std::make_shared<Env>();
    env->vars[ast.parameter] = Value{{ImageVal{image}}};
    try {
      exec_block(ast.body, env);
    } catch (ReturnSignal& r) {
      return std::move(r.value);
    }
    return Value::none();  // fell off the end
  }

 private:
  PerceptionBackend& backend_;
  ExecutionLimits limits_;
  Clock::time_point deadline_;
  long steps_ = 0;

  void step() {
    if (++steps_ > limits_.max_steps) throw TimeoutSignal{};
    if ((steps_ & 0xff) == 0 && Clock::now() > deadline_)
      throw TimeoutSignal{};
  }

  [[noreturn]] void fail(const std::string& msg) {
    throw RuntimeSignal{msg};
  }

  void exec_block(const std::vector<StmtPtr>& body, const EnvPtr& env) {
    for (const auto& stmt : body) exec(*stmt, env);
  }

  void exec(const Stmt& stmt, const EnvPtr& env) {
    step();
    switch (stmt.kind) {
      case StmtKind::Assign: {
        const auto& s = static_cast<const Assign&>(stmt);
        assign_targets(s.targets, eval(*s.value, env), env);
        return;
      }
      case StmtKind::AugAssign: {
        const auto& s = static_cast<const AugAssign&>(stmt);
        Value* slot = env->find(s.target);
        if (!slot) fail("name '" + s.target + "' is not defined");
        *slot = binary_op(s.op, *slot, eval(*s.value, env));
        return;
      }
      case StmtKind::ExprStmt: {
        const auto& s = static_cast<const ExprStmt&>(stmt);
        eval(*s.expr, env);
        return;
      }
      case StmtKind::If: {
        const auto& s = static_cast<const If&>(stmt);
        if (truthy(eval(*s.condition, env)))
          exec_block(s.body, env);
        else if (!s.orelse.empty())
          exec_block(s.orelse, env);
        return;
      }
      case StmtKind::For: {
        const auto& s = static_cast<const For&>(stmt);
        Value iter = eval(*s.iterable, env);
        ValueList items = iterable_items(iter);
        for (const Value& item : items) {
          step();
          assign_targets(s.targets, item, env);
          try {
            exec_block(s.body, env);
          } catch (BreakSignal&) {
            break;
          } catch (ContinueSignal&) {
            continue;
          }
        }
        return;
      }
      case StmtKind::While: {
        const auto& s = static_cast<const While&>(stmt);
        while (truthy(eval(*s.condition, env))) {
          step();
          try {
            exec_block(s.body, env);
          } catch (BreakSignal&) {
            break;
          } catch (ContinueSignal&) {
            continue;
          }
        }
        return;
      }
      case StmtKind::Return: {
        const auto& s = static_cast<const Return&>(stmt);
        ReturnSignal r;
        if (s.value) r.value = eval(*s.value, env);
        throw r;
      }
      case StmtKind::Break: throw BreakSignal{};
      case StmtKind::Continue: throw ContinueSignal{};
      case StmtKind::Pass: return;
    }
  }

  void assign_targets(const std::vector<std::string>& targets,
                      const Value& value, const EnvPtr& env) {
    if (targets.size() == 1) {
      env->vars[targets[0]] = value;
      return;
    }
    if (!std::holds_alternative<ListPtr>(value.v))
      fail("cannot unpack non-sequence " + type_name(value));
    const auto& items = *std::get<ListPtr>(value.v);
    if (items.size() != targets.size())
      fail("cannot unpack: expected " + std::to_string(targets.size()) +
           " values, got " + std::to_string(items.size()));
    for (std::size_t i = 0; i < targets.size(); ++i)
      env->vars[targets[i]] = items[i];
  }

  ValueList iterable_items(const Value& v) {
    if (std::holds_alternative<ListPtr>(v.v)) return *std::get<ListPtr>(v.v);
    if (std::holds_alternative<std::string>(v.v)) {
      ValueList out;
      for (char c : std::get<std::string>(v.v))
        out.push_back(Value::str(std::string(1, c)));
      return out;
    }
    fail("'" + type_name(v) + "' object is not iterable");
  }

  Value eval(const Expr& expr, const EnvPtr& env) {
    step();
    switch (expr.kind) {
      case ExprKind::NumLit:
        return Value::number(static_cast<const NumLit&>(expr).value);
      case ExprKind::StrLit:
        return Value::str(static_cast<const StrLit&>(expr).value);
      case ExprKind::BoolLit:
        return Value::boolean(static_cast<const BoolLit&>(expr).value);
      case ExprKind::NoneLit:
        return Value::none();
      case ExprKind::FString: {
        const auto& e = static_cast<const FString&>(expr);
        std::string out;
        for (const auto& part : e.parts)
          out += part.expr ? py_str(eval(*part.expr, env)) : part.literal;
        return Value::str(std::move(out));
      }
      case ExprKind::NameRef: {
        const auto& e = static_cast<const NameRef&>(expr);
        if (Value* slot = env->find(e.name)) return *slot;
        fail("name '" + e.name + "' is not defined");
      }
      case ExprKind::ListLit: {
        const auto& e = static_cast<const ListLit&>(expr);
        ValueList items;
        items.reserve(e.elements.size());
        for (const auto& el : e.elements) items.push_back(eval(*el, env));
        return Value::list(std::move(items));
      }
      case ExprKind::Unary: {
        const auto& e = static_cast<const Unary&>(expr);
        Value operand = eval(*e.operand, env);
        switch (e.op) {
          case Unary::Op::Not: return Value::boolean(!truthy(operand));
          case Unary::Op::Neg:
            if (!is_number(operand))
              fail("bad operand type for unary -: '" + type_name(operand) +
                   "'");
            return Value::number(-as_number(operand));
          case Unary::Op::Pos:
            if (!is_number(operand))
              fail("bad operand type for unary +: '" + type_name(operand) +
                   "'");
            return operand;
        }
        fail("bad unary operator");
      }
      case ExprKind::Binary: {
        const auto& e = static_cast<const Binary&>(expr);
        return binary_op(e.op, eval(*e.lhs, env), eval(*e.rhs, env));
      }
      case ExprKind::BoolOp: {
        const auto& e = static_cast<const BoolOp&>(expr);
        Value last;
        for (const auto& part : e.operands) {
          last = eval(*part, env);
          if (e.is_and ? !truthy(last) : truthy(last)) return last;
        }
        return last;
      }
      case ExprKind::Compare: {
        const auto& e = static_cast<const Compare&>(expr);
        Value left = eval(*e.first, env);
        for (const auto& [op, rhs_expr] : e.rest) {
          Value right = eval(*rhs_expr, env);
          if (!compare_once(op, left, right)) return Value::boolean(false);
          left = std::move(right);
        }
        return Value::boolean(true);
      }
      case ExprKind::Ternary: {
        const auto& e = static_cast<const Ternary&>(expr);
        return truthy(eval(*e.condition, env)) ? eval(*e.if_true, env)
                                               : eval(*e.if_false, env);
      }
      case ExprKind::Attribute:
        return eval_attribute(static_cast<const Attribute&>(expr), env);
      case ExprKind::Subscript: {
        const auto& e = static_cast<const Subscript&>(expr);
        Value obj = eval(*e.object, env);
        Value idx = eval(*e.index, env);
        return subscript(obj, idx);
      }
      case ExprKind::Slice: {
        const auto& e = static_cast<const Slice&>(expr);
        Value obj = eval(*e.object, env);
        long start = e.start ? index_of(eval(*e.start, env)) : 0;
        bool has_stop = e.stop != nullptr;
        long stop = has_stop ? index_of(eval(*e.stop, env)) : 0;
        return slice(obj, start, has_stop, stop, e.start != nullptr);
      }
      case ExprKind::Lambda: {
        const auto& e = static_cast<const Lambda&>(expr);
        return Value{{std::make_shared<LambdaData>(LambdaData{&e, env})}};
      }
      case ExprKind::Comprehension:
        return eval_comprehension(static_cast<const Comprehension&>(expr),
                                  env);
      case ExprKind::Call:
        return eval_call(static_cast<const Call&>(expr), env);
    }
    fail("unreachable expression kind");
  }

  bool compare_once(Compare::Op op, const Value& a, const Value& b) {
    switch (op) {
      case Compare::Op::Eq: return values_equal(a, b);
      case Compare::Op::Ne: return !values_equal(a, b);
      case Compare::Op::In: return contains(b, a);
      case Compare::Op::NotIn: return !contains(b, a);
      default: break;
    }
    if (is_number(a) && is_number(b)) {
      double x = as_number(a), y = as_number(b);
      switch (op) {
        case Compare::Op::Lt: return x < y;
        case Compare::Op::Le: return x <= y;
        case Compare::Op::Gt: return x > y;
        case Compare::Op::Ge: return x >= y;
        default: break;
      }
    }
    if (std::holds_alternative<std::string>(a.v) &&
        std::holds_alternative<std::string>(b.v)) {
      const auto& x = std::get<std::string>(a.v);
      const auto& y = std::get<std::string>(b.v);
      switch (op) {
        case Compare::Op::Lt: return x < y;
        case Compare::Op::Le: return x <= y;
        case Compare::Op::Gt: return x > y;
        case Compare::Op::Ge: return x >= y;
        default: break;
      }
    }
    fail("'<' not supported between instances of '" + type_name(a) +
         "' and '" + type_name(b) + "'");
  }

  bool contains(const Value& container, const Value& item) {
    if (std::holds_alternative<ListPtr>(container.v)) {
      for (const auto& v : *std::get<ListPtr>(container.v))
        if (values_equal(v, item)) return true;
      return false;
    }
    if (std::holds_alternative<std::string>(container.v)) {
      if (!std::holds_alternative<std::string>(item.v))
        fail("'in <string>' requires string as left operand");
      return std::get<std::string>(container.v)
                 .find(std::get<std::string>(item.v)) != std::string::npos;
    }
    fail("argument of type '" + type_name(container) + "' is not iterable");
  }

  Value binary_op(Binary::Op op, const Value& a, const Value& b) {
    if (op == Binary::Op::Add) {
      if (std::holds_alternative<std::string>(a.v) &&
          std::holds_alternative<std::string>(b.v))
        return Value::str(std::get<std::string>(a.v) +
                          std::get<std::string>(b.v));
      if (std::holds_alternative<ListPtr>(a.v) &&
          std::holds_alternative<ListPtr>(b.v)) {
        ValueList out = *std::get<ListPtr>(a.v);
        const auto& rhs = *std::get<ListPtr>(b.v);
        out.insert(out.end(), rhs.begin(), rhs.end());
        return Value::list(std::move(out));
      }
    }
    if (!is_number(a) || !is_number(b))
      fail("unsupported operand type(s): '" + type_name(a) + "' and '" +
           type_name(b) + "'");
    double x = as_number(a), y = as_number(b);
    switch (op) {
      case Binary::Op::Add: return Value::number(x + y);
      case Binary::Op::Sub: return Value::number(x - y);
      case Binary::Op::Mul: return Value::number(x * y);
      case Binary::Op::Div:
        if (y == 0) fail("division by zero");
        return Value::number(x / y);
      case Binary::Op::FloorDiv:
        if (y == 0) fail("division by zero");
        return Value::number(std::floor(x / y));
      case Binary::Op::Mod:
        if (y == 0) fail("modulo by zero");
        return Value::number(x - y * std::floor(x / y));
      case Binary::Op::Pow: return Value::number(std::pow(x, y));
    }
    fail("bad binary operator");
  }

  long index_of(const Value& v) {
    if (!is_number(v)) fail("indices must be integers");
    double d = as_number(v);
    if (d != std::floor(d)) fail("indices must be integers");
    return static_cast<long>(d);
  }

  Value subscript(const Value& obj, const Value& idx) {
    long i = index_of(idx);
    if (std::holds_alternative<ListPtr>(obj.v)) {
      const auto& items = *std::get<ListPtr>(obj.v);
      long n = static_cast<long>(items.size());
      if (i < 0) i += n;
      if (i < 0 || i >= n) fail("list index out of range");
      return items[i];
    }
    if (std::holds_alternative<std::string>(obj.v)) {
      const auto& s = std::get<std::string>(obj.v);
      long n = static_cast<long>(s.size());
      if (i < 0) i += n;
      if (i < 0 || i >= n) fail("string index out of range");
      return Value::str(std::string(1, s[i]));
    }
    fail("'" + type_name(obj) + "' object is not subscriptable");
  }

  Value slice(const Value& obj, long start, bool has_stop, long stop,
              bool has_start) {
    auto clamp = [](long i, long n) {
      if (i < 0) i += n;
      return std::max(0L, std::min(i, n));
    };
    if (std::holds_alternative<ListPtr>(obj.v)) {
      const auto& items = *std::get<ListPtr>(obj.v);
      long n = static_cast<long>(items.size());
      long b = has_start ? clamp(start, n) : 0;
      long e = has_stop ? clamp(stop, n) : n;
      ValueList out;
      for (long i = b; i < e; ++i) out.push_back(items[i]);
      return Value::list(std::move(out));
    }
    if (std::holds_alternative<std::string>(obj.v)) {
      const auto& s = std::get<std::string>(obj.v);
      long n = static_cast<long>(s.size());
      long b = has_start ? clamp(start, n) : 0;
      long e = has_stop ? clamp(stop, n) : n;
      return Value::str(b < e ? s.substr(b, e - b) : std::string());
    }
    fail("'" + type_name(obj) + "' object is not sliceable");
  }

  Value eval_comprehension(const Comprehension& comp, const EnvPtr& env) {
    ValueList out;
    auto scope = std::make_shared<Env>();
    scope->parent = env;
    run_clauses(comp, 0, scope, out);
    return Value::list(std::move(out));
  }

  void run_clauses(const Comprehension& comp, std::size_t depth,
                   const EnvPtr& scope, ValueList& out) {
    if (depth == comp.clauses.size()) {
      out.push_back(eval(*comp.element, scope));
      return;
    }
    const auto& clause = comp.clauses[depth];
    ValueList items = iterable_items(eval(*clause.iterable, scope));
    for (const Value& item : items) {
      step();
      assign_targets(clause.targets, item, scope);
      bool keep = true;
      for (const auto& cond : clause.conditions)
        if (!truthy(eval(*cond, scope))) {
          keep = false;
          break;
        }
      if (keep) run_clauses(comp, depth + 1, scope, out);
    }
  }

  // ---- calls ----

  struct Args {
    ValueList positional;
    std::vector<std::pair<std::string, Value>> keyword;

    const Value* kw(const std::string& name) const {
      for (const auto& [k, v] : keyword)
        if (k == name) return &v;
      return nullptr;
    }
  };

  Args eval_args(const Call& call, const EnvPtr& env) {
    Args args;
    for (const auto& a : call.args) args.positional.push_back(eval(*a, env));
    for (const auto& [k, e] : call.kwargs)
      args.keyword.emplace_back(k, eval(*e, env));
    return args;
  }

  Value call_function(const Value& fn, const ValueList& args) {
    if (!std::holds_alternative<FuncPtr>(fn.v))
      fail("'" + type_name(fn) + "' object is not callable");
    const auto& data = *std::get<FuncPtr>(fn.v);
    const Lambda& node = *data.node;
    if (node.params.size() != args.size())
      fail("lambda takes " + std::to_string(node.params.size()) +
           " positional arguments but " + std::to_string(args.size()) +
           " were given");
    auto scope = std::make_shared<Env>();
    scope->parent = data.closure;
    for (std::size_t i = 0; i < args.size(); ++i)
      scope->vars[node.params[i]] = args[i];
    return eval(*node.body, scope);
  }

  Value eval_call(const Call& call, const EnvPtr& env) {
    if (call.callee->kind == ExprKind::NameRef) {
      const std::string& name =
          static_cast<const NameRef&>(*call.callee).name;
      if (Value* slot = env->find(name)) {
        Args args = eval_args(call, env);
        if (!args.keyword.empty())
          fail("lambda got an unexpected keyword argument");
        return call_function(*slot, args.positional);
      }
      Args args = eval_args(call, env);
      return call_builtin(name, args);
    }
    if (call.callee->kind == ExprKind::Attribute) {
      const auto& attr = static_cast<const Attribute&>(*call.callee);
      Value obj = eval(*attr.object, env);
      Args args = eval_args(call, env);
      return call_method(obj, attr.name, args);
    }
    Value fn = eval(*call.callee, env);
    Args args = eval_args(call, env);
    if (!args.keyword.empty())
      fail("lambda got an unexpected keyword argument");
    return call_function(fn, args.positional);
  }

  void require_arity(const std::string& fn, const Args& args, std::size_t lo,
                     std::size_t hi) {
    if (args.positional.size() < lo || args.positional.size() > hi)
      fail(fn + "() takes " + std::to_string(lo) +
           (hi > lo ? " to " + std::to_string(hi) : "") +
           " positional arguments but " +
           std::to_string(args.positional.size()) + " were given");
  }

  const ListPtr& require_list(const std::string& fn, const Value& v) {
    if (!std::holds_alternative<ListPtr>(v.v))
      fail(fn + "() expects a list, got '" + type_name(v) + "'");
    return std::get<ListPtr>(v.v);
  }

  Value call_builtin(const std::string& name, Args& args) {
    if (name == "ImagePatch") return make_patch(args);
    if (name == "bool_to_yesno") {
      require_arity(name, args, 1, 1);
      return Value::str(truthy(args.positional[0]) ? "yes" : "no");
    }
    if (name == "len") {
      require_arity(name, args, 1, 1);
      const Value& v = args.positional[0];
      if (std::holds_alternative<ListPtr>(v.v))
        return Value::number(
            static_cast<double>(std::get<ListPtr>(v.v)->size()));
      if (std::holds_alternative<std::string>(v.v))
        return Value::number(
            static_cast<double>(std::get<std::string>(v.v).size()));
      fail("object of type '" + type_name(v) + "' has no len()");
    }
    if (name == "abs") {
      require_arity(name, args, 1, 1);
      if (!is_number(args.positional[0]))
        fail("bad operand type for abs(): '" + type_name(args.positional[0]) +
             "'");
      return Value::number(std::fabs(as_number(args.positional[0])));
    }
    if (name == "any" || name == "all") {
      require_arity(name, args, 1, 1);
      const auto& items = *require_list(name, args.positional[0]);
      if (name == "any") {
        for (const auto& v : items)
          if (truthy(v)) return Value::boolean(true);
        return Value::boolean(false);
      }
      for (const auto& v : items)
        if (!truthy(v)) return Value::boolean(false);
      return Value::boolean(true);
    }
    if (name == "sum") {
      require_arity(name, args, 1, 1);
      double total = 0;
      for (const auto& v : *require_list(name, args.positional[0])) {
        if (!is_number(v)) fail("unsupported operand type(s) for sum");
        total += as_number(v);
      }
      return Value::number(total);
    }
    if (name == "min" || name == "max") return min_max(name, args);
    if (name == "sorted") {
      require_arity(name, args, 1, 1);
      ValueList items = *require_list(name, args.positional[0]);
      sort_list(items, args.kw("key"), args.kw("reverse"));
      return Value::list(std::move(items));
    }
    if (name == "str") {
      require_arity(name, args, 1, 1);
      return Value::str(py_str(args.positional[0]));
    }
    if (name == "int" || name == "float") {
      require_arity(name, args, 1, 1);
      const Value& v = args.positional[0];
      if (is_number(v)) {
        double d = as_number(v);
        return Value::number(name == "int" ? std::trunc(d) : d);
      }
      if (std::holds_alternative<std::string>(v.v)) {
        try {
          double d = std::stod(std::get<std::string>(v.v));
          return Value::number(name == "int" ? std::trunc(d) : d);
        } catch (const std::exception&) {
          fail("could not convert string to " + name + ": '" +
               std::get<std::string>(v.v) + "'");
        }
      }
      fail(name + "() argument must be a string or a number");
    }
    if (name == "round") {
      require_arity(name, args, 1, 2);
      if (!is_number(args.positional[0])) fail("round() expects a number");
      double d = as_number(args.positional[0]);
      if (args.positional.size() == 2) {
        double scale = std::pow(10.0, index_of(args.positional[1]));
        return Value::number(std::round(d * scale) / scale);
      }
      return Value::number(std::round(d));
    }
    if (name == "range") {
      require_arity(name, args, 1, 3);
      long start = 0, stop = 0, stride = 1;
      if (args.positional.size() == 1) {
        stop = index_of(args.positional[0]);
      } else {
        start = index_of(args.positional[0]);
        stop = index_of(args.positional[1]);
        if (args.positional.size() == 3) stride = index_of(args.positional[2]);
      }
      if (stride == 0) fail("range() arg 3 must not be zero");
      ValueList out;
      for (long i = start; stride > 0 ? i < stop : i > stop; i += stride) {
        step();
        out.push_back(Value::number(static_cast<double>(i)));
      }
      return Value::list(std::move(out));
    }
    if (name == "enumerate") {
      require_arity(name, args, 1, 1);
      const auto& items = *require_list(name, args.positional[0]);
      ValueList out;
      for (std::size_t i = 0; i < items.size(); ++i)
        out.push_back(Value::list(
            {Value::number(static_cast<double>(i)), items[i]}));
      return Value::list(std::move(out));
    }
    if (name == "distance") {
      require_arity(name, args, 2, 2);
      const Box& a = require_patch("distance", args.positional[0])->box;
      const Box& b = require_patch("distance", args.positional[1])->box;
      double dx = a.horizontal_center() - b.horizontal_center();
      double dy = a.vertical_center() - b.vertical_center();
      return Value::number(std::sqrt(dx * dx + dy * dy));
    }
    if (name == "best_image_match") return best_image_match(args);
    fail("name '" + name + "' is not defined");
  }

  const PatchPtr& require_patch(const std::string& fn, const Value& v) {
    if (!std::holds_alternative<PatchPtr>(v.v))
      fail(fn + " expects an ImagePatch, got '" + type_name(v) + "'");
    return std::get<PatchPtr>(v.v);
  }

  Value min_max(const std::string& name, Args& args) {
    ValueList items;
    if (args.positional.size() == 1) {
      items = *require_list(name, args.positional[0]);
    } else if (args.positional.size() >= 2) {
      items = args.positional;
    } else {
      fail(name + "() expected at least 1 argument, got 0");
    }
    if (items.empty()) fail(name + "() arg is an empty sequence");
    const Value* key = args.kw("key");
    auto keyed = [&](const Value& v) { return key ? call_function(*key, {v}) : v; };
    std::size_t best = 0;
    Value best_key = keyed(items[0]);
    for (std::size_t i = 1; i < items.size(); ++i) {
      Value k = keyed(items[i]);
      bool better = compare_once(Compare::Op::Lt, k, best_key);
      if (name == "max") better = compare_once(Compare::Op::Gt, k, best_key);
      if (better) {
        best = i;
        best_key = std::move(k);
      }
    }
    return items[best];
  }

  void sort_list(ValueList& items, const Value* key, const Value* reverse) {
    bool rev = reverse && truthy(*reverse);
    std::vector<std::pair<Value, Value>> decorated;
    decorated.reserve(items.size());
    for (auto& v : items) {
      Value k = key ? call_function(*key, {v}) : v;
      decorated.emplace_back(std::move(k), std::move(v));
    }
    std::stable_sort(decorated.begin(), decorated.end(),
                     [&](const auto& a, const auto& b) {
                       return compare_once(Compare::Op::Lt, a.first, b.first);
                     });
    items.clear();
    for (auto& [k, v] : decorated) items.push_back(std::move(v));
    if (rev) std::reverse(items.begin(), items.end());
  }

  Value make_patch(Args& args) {
    require_arity("ImagePatch", args, 1, 5);
    const Value& first = args.positional[0];
    ImageHandle image;
    Box full;
    if (std::holds_alternative<ImageVal>(first.v)) {
      image = std::get<ImageVal>(first.v).handle;
      if (image.scene) {
        full = Box{0, 0, image.scene->width, image.scene->height};
      } else {
        full = Box{0, 0, 512, 512};  // dims unknown for raw images
      }
    } else if (std::holds_alternative<PatchPtr>(first.v)) {
      const auto& p = *std::get<PatchPtr>(first.v);
      image = p.image;
      full = p.box;
    } else {
      fail("ImagePatch() expects an image, got '" + type_name(first) + "'");
    }
    Box box = full;
    if (args.positional.size() == 5) {
      box.left = as_number(args.positional[1]);
      box.lower = as_number(args.positional[2]);
      box.right = as_number(args.positional[3]);
      box.upper = as_number(args.positional[4]);
      if (!box.valid()) fail("ImagePatch() requires left<right and lower<upper");
    } else if (args.positional.size() != 1) {
      fail("ImagePatch() takes 1 or 5 positional arguments");
    }
    auto patch = std::make_shared<PatchData>();
    patch->image = std::move(image);
    patch->box = box;
    return Value{{patch}};
  }

  Value best_image_match(Args& args) {
    require_arity("best_image_match", args, 2, 3);
    const auto& patches = *require_list("best_image_match", args.positional[0]);
    if (patches.empty()) fail("best_image_match() got an empty patch list");
    std::vector<std::string> contents;
    const Value& content = args.positional[1];
    if (std::holds_alternative<std::string>(content.v)) {
      contents.push_back(std::get<std::string>(content.v));
    } else if (std::holds_alternative<ListPtr>(content.v)) {
      for (const auto& c : *std::get<ListPtr>(content.v)) {
        if (!std::holds_alternative<std::string>(c.v))
          fail("best_image_match() content must be strings");
        contents.push_back(std::get<std::string>(c.v));
      }
    } else {
      fail("best_image_match() content must be a string or list of strings");
    }
    if (contents.empty()) fail("best_image_match() got empty content");
    bool return_index = false;
    if (args.positional.size() == 3) return_index = truthy(args.positional[2]);
    if (const Value* kw = args.kw("return_index")) return_index = truthy(*kw);
    std::size_t best = 0;
    double best_score = -1;
    for (std::size_t i = 0; i < patches.size(); ++i) {
      const auto& patch = require_patch("best_image_match", patches[i]);
      double score = 0;
      for (const auto& text : contents)
        score = std::max(score, backend_call([&] {
                  return backend_.itm_score(patch->image, patch->box, text);
                }));
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    if (return_index) return Value::number(static_cast<double>(best));
    return patches[best];
  }

  template <typename F>
  auto backend_call(F&& f) -> decltype(f()) {
    step();
    try {
      return f();
    } catch (const UnresolvableImage& e) {
      fail(std::string("unresolvable image: ") + e.what());
    }
    // BackendUnavailable intentionally propagates: infrastructure failures
    // are not program errors.
  }

  Value call_method(const Value& obj, const std::string& name, Args& args) {
    if (std::holds_alternative<PatchPtr>(obj.v))
      return patch_method(std::get<PatchPtr>(obj.v), name, args);
    if (std::holds_alternative<ListPtr>(obj.v))
      return list_method(std::get<ListPtr>(obj.v), name, args);
    if (std::holds_alternative<std::string>(obj.v))
      return string_method(std::get<std::string>(obj.v), name, args);
    fail("'" + type_name(obj) + "' object has no attribute '" + name + "'");
  }

  Value patch_method(const PatchPtr& patch, const std::string& name,
                     Args& args) {
    if (name == "find") {
      require_arity("find", args, 1, 1);
      return find_in_patch(patch, string_arg("find", args.positional[0]));
    }
    if (name == "exists") {
      require_arity("exists", args, 1, 1);
      Value found =
          find_in_patch(patch, string_arg("exists", args.positional[0]));
      return Value::boolean(!std::get<ListPtr>(found.v)->empty());
    }
    if (name == "verify_property") {
      require_arity("verify_property", args, 2, 2);
      std::string object_name =
          string_arg("verify_property", args.positional[0]);
      std::string property = string_arg("verify_property", args.positional[1]);
      bool ok = backend_call([&] {
        return backend_.verify_property(patch->image, patch->box, object_name,
                                        property);
      });
      return Value::boolean(ok);
    }
    if (name == "simple_query") {
      require_arity("simple_query", args, 0, 1);
      std::string question = args.positional.empty()
                                 ? "What is this?"
                                 : string_arg("simple_query",
                                              args.positional[0]);
      std::string answer = backend_call([&] {
        return backend_.simple_query(patch->image, patch->box, question);
      });
      return Value::str(std::move(answer));
    }
    if (name == "crop_left_of_bbox" || name == "crop_right_of_bbox" ||
        name == "crop_above_bbox" || name == "crop_below_bbox") {
      require_arity(name, args, 4, 4);
      for (const auto& a : args.positional)
        if (!is_number(a)) fail(name + "() coordinates must be numbers");
      Box ref{as_number(args.positional[0]), as_number(args.positional[1]),
              as_number(args.positional[2]), as_number(args.positional[3])};
      CropSide side = name == "crop_left_of_bbox"    ? CropSide::left
                      : name == "crop_right_of_bbox" ? CropSide::right
                      : name == "crop_above_bbox"    ? CropSide::above
                                                     : CropSide::below;
      auto out = std::make_shared<PatchData>();
      out->image = patch->image;
      out->box = crop_directional(patch->box, side, ref);
      return Value{{out}};
    }
    fail("'ImagePatch' object has no attribute '" + name + "'");
  }

  Value find_in_patch(const PatchPtr& patch, const std::string& object_name) {
    auto detections = backend_call(
        [&] { return backend_.detect(patch->image, object_name); });
    ValueList out;
    for (const auto& det : detections) {
      auto inter = det.box.intersect(patch->box);
      if (!inter) continue;  // outside this patch
      auto p = std::make_shared<PatchData>();
      p->image = patch->image;
      p->box = *inter;
      p->category = det.category;
      out.push_back(Value{{p}});
    }
    return Value::list(std::move(out));
  }

  std::string string_arg(const std::string& fn, const Value& v) {
    if (!std::holds_alternative<std::string>(v.v))
      fail(fn + "() expects a string, got '" + type_name(v) + "'");
    return std::get<std::string>(v.v);
  }

  Value list_method(const ListPtr& list, const std::string& name, Args& args) {
    if (name == "append") {
      require_arity("append", args, 1, 1);
      list->push_back(args.positional[0]);
      return Value::none();
    }
    if (name == "extend") {
      require_arity("extend", args, 1, 1);
      const auto& other = *require_list("extend", args.positional[0]);
      list->insert(list->end(), other.begin(), other.end());
      return Value::none();
    }
    if (name == "sort") {
      require_arity("sort", args, 0, 0);
      sort_list(*list, args.kw("key"), args.kw("reverse"));
      return Value::none();
    }
    if (name == "count") {
      require_arity("count", args, 1, 1);
      long n = 0;
      for (const auto& v : *list)
        if (values_equal(v, args.positional[0])) ++n;
      return Value::number(static_cast<double>(n));
    }
    if (name == "index") {
      require_arity("index", args, 1, 1);
      for (std::size_t i = 0; i < list->size(); ++i)
        if (values_equal((*list)[i], args.positional[0]))
          return Value::number(static_cast<double>(i));
      fail("list.index(x): x not in list");
    }
    fail("'list' object has no attribute '" + name + "'");
  }

  Value string_method(const std::string& s, const std::string& name,
                      Args& args) {
    if (name == "lower") return Value::str(to_lower(s));
    if (name == "upper") {
      std::string out = s;
      for (auto& c : out) c = std::toupper(static_cast<unsigned char>(c));
      return Value::str(std::move(out));
    }
    if (name == "strip") return Value::str(trim(s));
    if (name == "split") {
      std::vector<std::string> parts;
      if (args.positional.empty()) {
        parts = split_words(s);
      } else {
        std::string sep = string_arg("split", args.positional[0]);
        std::size_t pos = 0, next;
        while ((next = s.find(sep, pos)) != std::string::npos) {
          parts.push_back(s.substr(pos, next - pos));
          pos = next + sep.size();
        }
        parts.push_back(s.substr(pos));
      }
      ValueList out;
      for (auto& p : parts) out.push_back(Value::str(std::move(p)));
      return Value::list(std::move(out));
    }
    if (name == "join") {
      require_arity("join", args, 1, 1);
      const auto& items = *require_list("join", args.positional[0]);
      std::string out;
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += s;
        out += py_str(items[i]);
      }
      return Value::str(std::move(out));
    }
    if (name == "startswith" || name == "endswith") {
      require_arity(name, args, 1, 1);
      std::string probe = string_arg(name, args.positional[0]);
      bool ok = name == "startswith" ? s.starts_with(probe)
                                     : s.ends_with(probe);
      return Value::boolean(ok);
    }
    if (name == "replace") {
      require_arity("replace", args, 2, 2);
      std::string from = string_arg("replace", args.positional[0]);
      std::string to = string_arg("replace", args.positional[1]);
      if (from.empty()) return Value::str(s);
      std::string out = s;
      std::size_t pos = 0;
      while ((pos = out.find(from, pos)) != std::string::npos) {
        out.replace(pos, from.size(), to);
        pos += to.size();
      }
      return Value::str(std::move(out));
    }
    fail("'str' object has no attribute '" + name + "'");
  }

  Value eval_attribute(const Attribute& attr, const EnvPtr& env) {
    Value obj = eval(*attr.object, env);
    if (std::holds_alternative<PatchPtr>(obj.v)) {
      const auto& p = *std::get<PatchPtr>(obj.v);
      const Box& b = p.box;
      if (attr.name == "left") return Value::number(b.left);
      if (attr.name == "right") return Value::number(b.right);
      if (attr.name == "lower") return Value::number(b.lower);
      if (attr.name == "upper") return Value::number(b.upper);
      if (attr.name == "horizontal_center")
        return Value::number(b.horizontal_center());
      if (attr.name == "vertical_center")
        return Value::number(b.vertical_center());
      if (attr.name == "width") return Value::number(b.width());
      if (attr.name == "height") return Value::number(b.height());
      if (attr.name == "area") return Value::number(b.area());
      if (attr.name == "category")
        return p.category ? Value::str(*p.category) : Value::none();
      fail("'ImagePatch' object has no attribute '" + attr.name + "'");
    }
    fail("'" + type_name(obj) + "' object has no attribute '" + attr.name +
         "'");
  }
};

}  // namespace

const char* to_string(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::answer: return "answer";
    case OutcomeKind::compile_error: return "compile_error";
    case OutcomeKind::runtime_error: return "runtime_error";
    case OutcomeKind::timeout: return "timeout";
  }
  return "unknown";
}

std::string ExecutionOutcome::display() const {
  if (kind == OutcomeKind::answer) return answer;
  return "Error: " + diagnostic;
}

Box crop_directional(const Box& patch, CropSide side, const Box& box) {
  Box out = patch;
  switch (side) {
    case CropSide::left: out.right = box.left; break;
    case CropSide::right: out.left = box.right; break;
    case CropSide::above: out.lower = box.upper; break;
    case CropSide::below: out.upper = box.lower; break;
  }
  // Clamp to the parent, then enforce a 1-pixel minimum extent.
  out.left = std::max(out.left, patch.left);
  out.right = std::min(out.right, patch.right);
  out.lower = std::max(out.lower, patch.lower);
  out.upper = std::min(out.upper, patch.upper);
  if (out.right - out.left < 1) {
    if (side == CropSide::left) {
      out.left = std::max(patch.left, out.right - 1);
      out.right = out.left + 1;
    } else {
      out.right = std::min(patch.right, out.left + 1);
      out.left = out.right - 1;
    }
  }
  if (out.upper - out.lower < 1) {
    if (side == CropSide::below) {
      out.lower = std::max(patch.lower, out.upper - 1);
      out.upper = out.lower + 1;
    } else {
      out.upper = std::min(patch.upper, out.lower + 1);
      out.lower = out.upper - 1;
    }
  }
  return out;
}

ExecutionOutcome execute(const ProgramAst& ast, const ImageHandle& image,
                         PerceptionBackend& backend,
                         const ExecutionLimits& limits) {
  ExecutionOutcome outcome;
  auto start = Clock::now();
  auto finish = [&](OutcomeKind kind, std::string text) {
    outcome.kind = kind;
    if (kind == OutcomeKind::answer)
      outcome.answer = std::move(text);
    else
      outcome.diagnostic = std::move(text);
    outcome.elapsed_s =
        std::chrono::duration<double>(Clock::now() - start).count();
  };
  try {
    Interpreter interp(backend, limits);
    Value result = interp.run(ast, image);
    double elapsed =
        std::chrono::duration<double>(Clock::now() - start).count();
    if (elapsed > limits.budget_s) {
      // Past the budget nothing counts as an answer.
      finish(OutcomeKind::timeout, "execution exceeded budget");
    } else {
      finish(OutcomeKind::answer, answer_text(result));
    }
  } catch (const RuntimeSignal& e) {
    finish(OutcomeKind::runtime_error, e.message);
  } catch (const TimeoutSignal&) {
    finish(OutcomeKind::timeout, "execution exceeded budget");
  } catch (const BreakSignal&) {
    finish(OutcomeKind::runtime_error, "'break' outside loop");
  } catch (const ContinueSignal&) {
    finish(OutcomeKind::runtime_error, "'continue' outside loop");
  }
  return outcome;
}

ExecutionOutcome run_source(const ProgramSource& source,
                            const ImageHandle& image,
                            PerceptionBackend& backend,
                            const ExecutionLimits& limits) {
  auto parsed = parse_program(source);
  if (std::holds_alternative<CompileError>(parsed)) {
    ExecutionOutcome out;
    out.kind = OutcomeKind::compile_error;
    out.diagnostic = std::get<CompileError>(parsed).format();
    return out;
  }
  return execute(*std::get<std::shared_ptr<ProgramAst>>(parsed), image,
                 backend, limits);
}

}  // namespace viunit::dsl
