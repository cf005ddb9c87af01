#include "dpquery/expr.hpp"

#include <cctype>
#include <cmath>
#include <utility>

#include "dpquery/noise.hpp"
#include "dpquery/random_source.hpp"

namespace dpquery {
namespace {

std::shared_ptr<Expr> New(ExprKind kind) {
  auto e = std::make_shared<Expr>();
  e->kind = kind;
  return e;
}

enum class Truth { kFalse, kTrue, kUnknown };

Truth TruthOf(const Value& v) {
  if (IsNull(v)) {
    return Truth::kUnknown;
  }
  return IsTruthy(v) ? Truth::kTrue : Truth::kFalse;
}

Value BoolValue(Truth t) {
  if (t == Truth::kUnknown) {
    return Value{};
  }
  return Value{static_cast<std::int64_t>(t == Truth::kTrue ? 1 : 0)};
}

bool IsComparison(BinaryOp op) {
  switch (op) {
    case BinaryOp::kEq:
    case BinaryOp::kNe:
    case BinaryOp::kLt:
    case BinaryOp::kLe:
    case BinaryOp::kGt:
    case BinaryOp::kGe:
      return true;
    default:
      return false;
  }
}

Value CompareResult(BinaryOp op, int cmp, bool unordered) {
  // `unordered` marks NaN comparisons, which are all false except !=.
  bool r = false;
  switch (op) {
    case BinaryOp::kEq:
      r = !unordered && cmp == 0;
      break;
    case BinaryOp::kNe:
      r = unordered || cmp != 0;
      break;
    case BinaryOp::kLt:
      r = !unordered && cmp < 0;
      break;
    case BinaryOp::kLe:
      r = !unordered && cmp <= 0;
      break;
    case BinaryOp::kGt:
      r = !unordered && cmp > 0;
      break;
    case BinaryOp::kGe:
      r = !unordered && cmp >= 0;
      break;
    default:
      break;
  }
  return Value{static_cast<std::int64_t>(r ? 1 : 0)};
}

Value EvalComparison(BinaryOp op, const Value& a, const Value& b) {
  ValueType ta = TypeOf(a);
  ValueType tb = TypeOf(b);
  if (ta == ValueType::kText && tb == ValueType::kText) {
    int c = std::get<std::string>(a).compare(std::get<std::string>(b));
    return CompareResult(op, c < 0 ? -1 : (c > 0 ? 1 : 0), false);
  }
  if (ta == ValueType::kText || tb == ValueType::kText) {
    throw EvalError("cannot compare text with a number");
  }
  if (ta == ValueType::kInt64 && tb == ValueType::kInt64) {
    auto x = std::get<std::int64_t>(a);
    auto y = std::get<std::int64_t>(b);
    return CompareResult(op, x < y ? -1 : (x > y ? 1 : 0), false);
  }
  double x = AsDouble(a);
  double y = AsDouble(b);
  if (std::isnan(x) || std::isnan(y)) {
    return CompareResult(op, 0, true);
  }
  return CompareResult(op, x < y ? -1 : (x > y ? 1 : 0), false);
}

Value EvalArithmetic(BinaryOp op, const Value& a, const Value& b) {
  if (op == BinaryOp::kDiv) {
    // Division is always float64, so 0/0 is NaN and x/0 is +-inf.
    return Value{AsDouble(a) / AsDouble(b)};
  }
  if (TypeOf(a) == ValueType::kInt64 && TypeOf(b) == ValueType::kInt64) {
    auto x = std::get<std::int64_t>(a);
    auto y = std::get<std::int64_t>(b);
    std::int64_t r = 0;
    bool overflow = false;
    switch (op) {
      case BinaryOp::kAdd:
        overflow = __builtin_add_overflow(x, y, &r);
        break;
      case BinaryOp::kSub:
        overflow = __builtin_sub_overflow(x, y, &r);
        break;
      case BinaryOp::kMul:
        overflow = __builtin_mul_overflow(x, y, &r);
        break;
      default:
        break;
    }
    if (overflow) {
      throw EvalError("integer overflow");
    }
    return Value{r};
  }
  double x = AsDouble(a);
  double y = AsDouble(b);
  switch (op) {
    case BinaryOp::kAdd:
      return Value{x + y};
    case BinaryOp::kSub:
      return Value{x - y};
    case BinaryOp::kMul:
      return Value{x * y};
    default:
      break;
  }
  throw EvalError("unsupported arithmetic operator");
}

ValueType UnifyBranches(ValueType a, ValueType b) {
  if (a == b) {
    return a;
  }
  if (a == ValueType::kNull) {
    return b;
  }
  if (b == ValueType::kNull) {
    return a;
  }
  if (IsNumeric(a) && IsNumeric(b)) {
    return ValueType::kFloat64;
  }
  throw ParseError("IF branches have incompatible types");
}

std::string QuoteText(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "''";
    } else {
      out += c;
    }
  }
  out += "'";
  return out;
}

}  // namespace

const char* BinaryOpSymbol(BinaryOp op) {
  switch (op) {
    case BinaryOp::kAdd:
      return "+";
    case BinaryOp::kSub:
      return "-";
    case BinaryOp::kMul:
      return "*";
    case BinaryOp::kDiv:
      return "/";
    case BinaryOp::kEq:
      return "=";
    case BinaryOp::kNe:
      return "<>";
    case BinaryOp::kLt:
      return "<";
    case BinaryOp::kLe:
      return "<=";
    case BinaryOp::kGt:
      return ">";
    case BinaryOp::kGe:
      return ">=";
    case BinaryOp::kAnd:
      return "AND";
    case BinaryOp::kOr:
      return "OR";
  }
  return "?";
}

ExprPtr Lit(Value v) {
  auto e = New(ExprKind::kLiteral);
  e->literal = std::move(v);
  return e;
}

ExprPtr Col(std::string name) {
  auto e = New(ExprKind::kColumnRef);
  e->column = std::move(name);
  return e;
}

ExprPtr BoundCol(std::string name, int index) {
  auto e = New(ExprKind::kColumnRef);
  e->column = std::move(name);
  e->column_index = index;
  return e;
}

ExprPtr Unary(UnaryOp op, ExprPtr a) {
  auto e = New(ExprKind::kUnary);
  e->unary_op = op;
  e->args = {std::move(a)};
  return e;
}

ExprPtr Bin(BinaryOp op, ExprPtr a, ExprPtr b) {
  auto e = New(ExprKind::kBinary);
  e->binary_op = op;
  e->args = {std::move(a), std::move(b)};
  return e;
}

ExprPtr If(ExprPtr cond, ExprPtr then_e, ExprPtr else_e) {
  auto e = New(ExprKind::kIf);
  e->args = {std::move(cond), std::move(then_e), std::move(else_e)};
  return e;
}

ExprPtr LaplaceNoise(ExprPtr scale) {
  auto e = New(ExprKind::kLaplaceNoise);
  e->args = {std::move(scale)};
  return e;
}

ExprPtr Call(std::string name, std::vector<ExprPtr> args, bool star,
             bool distinct) {
  auto e = New(ExprKind::kCall);
  for (char& c : name) {
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  e->call_name = std::move(name);
  e->args = std::move(args);
  e->call_star = star;
  e->call_distinct = distinct;
  return e;
}

ExprPtr BindExpr(const ExprPtr& expr, const Schema& input) {
  if (!expr) {
    throw InternalError("binding a null expression");
  }
  auto out = std::make_shared<Expr>(*expr);
  if (expr->kind == ExprKind::kColumnRef) {
    int idx = input.FindColumn(expr->column);
    if (idx < 0) {
      throw ParseError("unknown column: " + expr->column);
    }
    out->column_index = idx;
    return out;
  }
  if (expr->kind == ExprKind::kCall) {
    throw ParseError("unknown or misplaced function: " + expr->call_name);
  }
  out->args.clear();
  for (const auto& a : expr->args) {
    out->args.push_back(BindExpr(a, input));
  }
  return out;
}

ValueType InferType(const ExprPtr& expr, const Schema& input) {
  if (!expr) {
    throw InternalError("typing a null expression");
  }
  switch (expr->kind) {
    case ExprKind::kLiteral:
      return TypeOf(expr->literal);
    case ExprKind::kColumnRef: {
      int idx = expr->column_index;
      if (idx < 0 || idx >= static_cast<int>(input.columns.size())) {
        throw InternalError("unbound column reference: " + expr->column);
      }
      return input.columns[idx].type;
    }
    case ExprKind::kUnary: {
      ValueType t = InferType(expr->args[0], input);
      if (expr->unary_op == UnaryOp::kNot) {
        return ValueType::kInt64;
      }
      if (t == ValueType::kText) {
        throw ParseError("cannot negate text");
      }
      return t;
    }
    case ExprKind::kBinary: {
      ValueType a = InferType(expr->args[0], input);
      ValueType b = InferType(expr->args[1], input);
      BinaryOp op = expr->binary_op;
      if (op == BinaryOp::kAnd || op == BinaryOp::kOr) {
        return ValueType::kInt64;
      }
      if (IsComparison(op)) {
        bool text_a = a == ValueType::kText;
        bool text_b = b == ValueType::kText;
        if (text_a != text_b && a != ValueType::kNull &&
            b != ValueType::kNull) {
          throw ParseError("cannot compare text with a number");
        }
        return ValueType::kInt64;
      }
      if (a == ValueType::kText || b == ValueType::kText) {
        throw ParseError("text in arithmetic expression");
      }
      if (op == BinaryOp::kDiv) {
        return ValueType::kFloat64;
      }
      if (a == ValueType::kInt64 && b == ValueType::kInt64) {
        return ValueType::kInt64;
      }
      if (a == ValueType::kNull && b == ValueType::kNull) {
        return ValueType::kNull;
      }
      if (a == ValueType::kNull || b == ValueType::kNull) {
        return a == ValueType::kNull ? b : a;
      }
      return ValueType::kFloat64;
    }
    case ExprKind::kIf:
      InferType(expr->args[0], input);
      return UnifyBranches(InferType(expr->args[1], input),
                           InferType(expr->args[2], input));
    case ExprKind::kLaplaceNoise: {
      ValueType t = InferType(expr->args[0], input);
      if (t == ValueType::kText) {
        throw ParseError("LAPLACE scale must be numeric");
      }
      return ValueType::kFloat64;
    }
    case ExprKind::kCall:
      throw ParseError("unknown or misplaced function: " + expr->call_name);
  }
  throw InternalError("unhandled expression kind");
}

Value EvalExpr(const Expr& expr, const Row& row, RandomSource* rng) {
  switch (expr.kind) {
    case ExprKind::kLiteral:
      return expr.literal;
    case ExprKind::kColumnRef: {
      int idx = expr.column_index;
      if (idx < 0 || idx >= static_cast<int>(row.size())) {
        throw InternalError("unbound column reference: " + expr.column);
      }
      return row[idx];
    }
    case ExprKind::kUnary: {
      Value a = EvalExpr(*expr.args[0], row, rng);
      if (expr.unary_op == UnaryOp::kNot) {
        Truth t = TruthOf(a);
        if (t == Truth::kUnknown) {
          return Value{};
        }
        return BoolValue(t == Truth::kTrue ? Truth::kFalse : Truth::kTrue);
      }
      if (IsNull(a)) {
        return a;
      }
      if (const auto* i = std::get_if<std::int64_t>(&a)) {
        std::int64_t r = 0;
        if (__builtin_sub_overflow(std::int64_t{0}, *i, &r)) {
          throw EvalError("integer overflow");
        }
        return Value{r};
      }
      return Value{-AsDouble(a)};
    }
    case ExprKind::kBinary: {
      BinaryOp op = expr.binary_op;
      if (op == BinaryOp::kAnd || op == BinaryOp::kOr) {
        Truth a = TruthOf(EvalExpr(*expr.args[0], row, rng));
        Truth b = TruthOf(EvalExpr(*expr.args[1], row, rng));
        if (op == BinaryOp::kAnd) {
          if (a == Truth::kFalse || b == Truth::kFalse) {
            return BoolValue(Truth::kFalse);
          }
          if (a == Truth::kUnknown || b == Truth::kUnknown) {
            return Value{};
          }
          return BoolValue(Truth::kTrue);
        }
        if (a == Truth::kTrue || b == Truth::kTrue) {
          return BoolValue(Truth::kTrue);
        }
        if (a == Truth::kUnknown || b == Truth::kUnknown) {
          return Value{};
        }
        return BoolValue(Truth::kFalse);
      }
      Value a = EvalExpr(*expr.args[0], row, rng);
      Value b = EvalExpr(*expr.args[1], row, rng);
      if (IsNull(a) || IsNull(b)) {
        return Value{};
      }
      if (IsComparison(op)) {
        return EvalComparison(op, a, b);
      }
      return EvalArithmetic(op, a, b);
    }
    case ExprKind::kIf: {
      Value cond = EvalExpr(*expr.args[0], row, rng);
      // Null and false both take the else branch.
      bool take_then = TruthOf(cond) == Truth::kTrue;
      return EvalExpr(*expr.args[take_then ? 1 : 2], row, rng);
    }
    case ExprKind::kLaplaceNoise: {
      if (rng == nullptr) {
        throw EvalError("LAPLACE used outside a randomized context");
      }
      double scale = AsDouble(EvalExpr(*expr.args[0], row, rng));
      if (!std::isfinite(scale) || scale <= 0.0) {
        throw EvalError("LAPLACE scale must be positive and finite");
      }
      return Value{SampleLaplace(scale, *rng)};
    }
    case ExprKind::kCall:
      throw InternalError("unresolved function call: " + expr.call_name);
  }
  throw InternalError("unhandled expression kind");
}

bool IsTruthy(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) {
    return *i != 0;
  }
  if (const auto* d = std::get_if<double>(&v)) {
    return *d != 0.0 && !std::isnan(*d);
  }
  return false;
}

std::string RenderExpr(const ExprPtr& expr) {
  if (!expr) {
    return "<null>";
  }
  switch (expr->kind) {
    case ExprKind::kLiteral:
      if (IsNull(expr->literal)) {
        return "NULL";
      }
      if (TypeOf(expr->literal) == ValueType::kText) {
        return QuoteText(std::get<std::string>(expr->literal));
      }
      return RenderValue(expr->literal);
    case ExprKind::kColumnRef:
      return expr->column;
    case ExprKind::kUnary:
      if (expr->unary_op == UnaryOp::kNot) {
        return "(NOT " + RenderExpr(expr->args[0]) + ")";
      }
      return "(-" + RenderExpr(expr->args[0]) + ")";
    case ExprKind::kBinary:
      return "(" + RenderExpr(expr->args[0]) + " " +
             BinaryOpSymbol(expr->binary_op) + " " +
             RenderExpr(expr->args[1]) + ")";
    case ExprKind::kIf:
      return "IF(" + RenderExpr(expr->args[0]) + ", " +
             RenderExpr(expr->args[1]) + ", " + RenderExpr(expr->args[2]) +
             ")";
    case ExprKind::kLaplaceNoise:
      return "LAPLACE(" + RenderExpr(expr->args[0]) + ")";
    case ExprKind::kCall: {
      std::string out = expr->call_name + "(";
      if (expr->call_star) {
        out += "*";
      } else if (expr->call_distinct) {
        out += "DISTINCT " + RenderExpr(expr->args[0]);
      }
      bool first = !expr->call_star && !expr->call_distinct;
      std::size_t start = expr->call_distinct ? 1 : 0;
      for (std::size_t i = start; i < expr->args.size(); ++i) {
        if (!first) {
          out += ", ";
        }
        out += RenderExpr(expr->args[i]);
        first = false;
      }
      return out + ")";
    }
  }
  return "<bad-expr>";
}

const Expr* FindExpr(const ExprPtr& expr, bool (*pred)(const Expr&)) {
  if (!expr) {
    return nullptr;
  }
  if (pred(*expr)) {
    return expr.get();
  }
  for (const auto& a : expr->args) {
    if (const Expr* hit = FindExpr(a, pred)) {
      return hit;
    }
  }
  return nullptr;
}

}  // namespace dpquery
