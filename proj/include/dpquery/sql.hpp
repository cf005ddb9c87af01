#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dpquery/plan.hpp"

namespace dpquery {

// SQL frontend for the engine's query subset: one SELECT with an optional
// WITH ANONYMIZATION marker, comma/JOIN table lists joined USING (uid),
// WHERE, GROUP BY, HAVING (plain queries only), one level of table
// subquery, and a debug-gated TABLESAMPLE RESERVOIR clause.

enum class TokenKind {
  kKeyword,
  kIdentifier,
  kInt,
  kFloat,
  kText,
  kSymbol,
  kEnd,
};

struct Token {
  TokenKind kind = TokenKind::kEnd;
  std::string text;         // keywords uppercased, identifiers as written
  std::int64_t int_value = 0;
  double float_value = 0.0;
  std::size_t offset = 0;   // byte position in the query text
};

// Splits the query text into tokens (always ending with one kEnd token).
// Keywords are case-insensitive; literals are integers, floats, and
// single-quoted text with '' as the escaped quote. Throws ParseError with
// the offending offset on an illegal character or unterminated literal.
std::vector<Token> Tokenize(const std::string& text);

// One ANON_* aggregate in a select list. Bounds and the ntile rank are
// literal arguments; omitted bounds mean per-group inference at release.
struct AnonCallAst {
  AggregateKind kind = AggregateKind::kCount;
  ExprPtr arg;              // null for ANON_COUNT(*)
  std::optional<ClampBounds> bounds;
  double ntile_rank = 0.5;
};

struct SelectItemAst {
  ExprPtr expr;             // plain item; null when `anon` is set
  std::optional<AnonCallAst> anon;
  std::string alias;        // empty when none was written
};

struct QueryAst;

struct TableRefAst {
  std::string table;        // empty when `subquery` is set
  std::unique_ptr<QueryAst> subquery;
  std::string alias;
  bool has_sample = false;  // TABLESAMPLE RESERVOIR (n ROWS PARTITION BY uid)
  std::int64_t sample_rows = 0;
};

struct QueryAst {
  bool with_anonymization = false;
  std::vector<SelectItemAst> items;
  std::vector<TableRefAst> from;   // consecutive refs are joined USING (uid)
  ExprPtr where;
  std::vector<std::string> group_by;  // column names, possibly qualified
  ExprPtr having;                  // plain queries only
};

struct ParseOptions {
  // TABLESAMPLE RESERVOIR exists to exercise the contribution-bounding
  // operator by hand; anonymized queries get their sampling from the
  // rewrite, so the clause is refused unless a debug caller opts in.
  bool allow_reservoir_sample = false;
};

// Parses one complete query (terminating ";" required). Anonymized-only
// syntax outside a WITH ANONYMIZATION query, HAVING inside one, nested
// subqueries, and malformed input all throw ParseError carrying the
// offset of the offending token.
QueryAst ParseQuery(const std::string& text,
                    const ParseOptions& options = {});

// Canonical single-line text form. Reparsing the result reproduces the
// AST, and rendering that reparse reproduces the text.
std::string RenderQuery(const QueryAst& query);

struct LoweredQuery {
  // Plain queries: a directly executable plan. Anonymized queries: a
  // kAnonAggregate root for RewriteAnonymized.
  PlanPtr plan;
  bool anonymized = false;
};

// Resolves names against the catalog and produces the plan. Qualified
// references (alias.column) are checked against the aliased table and
// rewritten to plain names; plain aggregates are hoisted into a grouping
// operator with a projection on top computing the select expressions, and
// HAVING becomes a filter over that projection's output columns.
LoweredQuery LowerQuery(const QueryAst& query, const Catalog& catalog);

}  // namespace dpquery
