#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dpquery/errors.hpp"
#include "dpquery/relation.hpp"

namespace dpquery {

class RandomSource;

// Scalar expression AST shared by the SQL frontend and the plan layer.
// Parsed trees may contain kCall nodes (uninterpreted function calls,
// including aggregate calls); binding resolves column names to input
// positions and rejects kCall, which lowering must rewrite first.
enum class ExprKind {
  kLiteral,
  kColumnRef,
  kUnary,
  kBinary,
  kIf,
  kLaplaceNoise,
  kCall,
};

enum class UnaryOp { kNeg, kNot };
enum class BinaryOp {
  kAdd,
  kSub,
  kMul,
  kDiv,
  kEq,
  kNe,
  kLt,
  kLe,
  kGt,
  kGe,
  kAnd,
  kOr,
};

const char* BinaryOpSymbol(BinaryOp op);

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Expr {
  ExprKind kind = ExprKind::kLiteral;
  Value literal;             // kLiteral
  std::string column;        // kColumnRef: name as written, maybe qualified
  int column_index = -1;     // kColumnRef: bound input position, -1 unbound
  UnaryOp unary_op = UnaryOp::kNeg;
  BinaryOp binary_op = BinaryOp::kAdd;
  std::string call_name;     // kCall: uppercased function name
  bool call_star = false;    // kCall: f(*)
  bool call_distinct = false;  // kCall: f(DISTINCT x)
  std::vector<ExprPtr> args;
};

// Builders.
ExprPtr Lit(Value v);
ExprPtr Col(std::string name);
ExprPtr BoundCol(std::string name, int index);
ExprPtr Unary(UnaryOp op, ExprPtr a);
ExprPtr Bin(BinaryOp op, ExprPtr a, ExprPtr b);
ExprPtr If(ExprPtr cond, ExprPtr then_e, ExprPtr else_e);
ExprPtr LaplaceNoise(ExprPtr scale);
ExprPtr Call(std::string name, std::vector<ExprPtr> args, bool star = false,
             bool distinct = false);

// Per-row evaluation failure (type mismatch on live data, integer overflow,
// text arithmetic). Operators catch these and drop or null the offending
// row rather than aborting the query.
class EvalError : public Error {
 public:
  explicit EvalError(const std::string& message)
      : Error(ErrorCategory::kParse, message) {}
};

// Resolves column names against `input` and returns a fully bound copy.
// Unknown or ambiguous names and residual kCall nodes throw ParseError.
ExprPtr BindExpr(const ExprPtr& expr, const Schema& input);

// Static result type of a bound expression; ParseError on type mismatches
// that are visible without data (text in arithmetic, non-numeric noise
// scale). Division is always float64, so 0/0 is NaN rather than an error.
ValueType InferType(const ExprPtr& expr, const Schema& input);

// Evaluates a bound expression. Arithmetic and comparisons propagate null;
// AND/OR use three-valued logic; IF takes the else branch on a null or
// false condition. kLaplaceNoise draws from `rng` (EvalError when null).
Value EvalExpr(const Expr& expr, const Row& row, RandomSource* rng);

// True iff the value is a non-null number other than 0 and NaN.
bool IsTruthy(const Value& v);

// Canonical text form, parseable by the SQL frontend.
std::string RenderExpr(const ExprPtr& expr);

// Depth-first search for a node satisfying `pred`; null when absent.
const Expr* FindExpr(const ExprPtr& expr, bool (*pred)(const Expr&));

}  // namespace dpquery
