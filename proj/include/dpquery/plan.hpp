#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dpquery/aggregates.hpp"
#include "dpquery/expr.hpp"
#include "dpquery/relation.hpp"

namespace dpquery {

class RandomSource;

// Non-private aggregate functions, used both for plain queries and for the
// per-user partial stage of anonymized queries.
enum class PlainAggFunc {
  kCountStar,
  kCount,
  kCountDistinct,
  kSum,
  kAvg,
  kVar,
  kStddev,
  kQuantile,
};

const char* PlainAggFuncName(PlainAggFunc func);

struct PlainAggregate {
  PlainAggFunc func = PlainAggFunc::kCountStar;
  ExprPtr arg;                  // null for kCountStar
  double quantile_rank = 0.5;   // kQuantile only
  std::string output_name;
};

// One differentially private aggregate requested by an anonymized query.
// Absent bounds mean they are inferred per group at release time, paying
// half of the aggregate's budget share.
struct AnonAggregateCall {
  AggregateKind kind = AggregateKind::kCount;
  ExprPtr arg;                  // null for ANON_COUNT(*)
  std::optional<ClampBounds> bounds;
  double ntile_rank = 0.5;
  std::string output_name;
};

enum class PlanKind {
  kScan,
  kProject,
  kSelect,
  kGroupAggregate,
  kJoinUsingUid,
  kReservoirPerUser,
  kAnonAggregate,
};

// One relational operator. A single struct with per-kind fields keeps
// traversal, rendering, and tests simple; `schema` is filled bottom-up at
// construction time and is authoritative for parents.
struct PlanNode {
  PlanKind kind = PlanKind::kScan;
  std::vector<std::unique_ptr<PlanNode>> children;
  Schema schema;

  // kScan
  std::string table;
  // Plain queries run outside the anonymization scope and do not track
  // user ownership; their scans drop the uid designation (the column
  // itself stays visible as data).
  bool strip_ownership = false;

  // kProject
  std::vector<ExprPtr> exprs;
  std::vector<std::string> output_names;

  // kSelect and the extra join condition of kJoinUsingUid
  ExprPtr predicate;

  // kGroupAggregate
  std::vector<ExprPtr> group_keys;          // bound column refs
  std::vector<std::string> key_names;
  std::vector<PlainAggregate> aggregates;
  // Grouping an owned relation must keep uid among the keys; plain-query
  // lowering avoids the rule by stripping ownership at the scans instead
  // of weakening it here.

  // kReservoirPerUser
  std::int64_t per_user_cap = 1;

  // kAnonAggregate; not directly executable, RewriteAnonymized consumes it
  std::vector<AnonAggregateCall> anon_aggregates;
};

using PlanPtr = std::unique_ptr<PlanNode>;

// Constructors compute the output schema eagerly and validate what is
// checkable without data (arity, binding, types, per-kind invariants).
PlanPtr MakeScan(const Catalog& catalog, std::string table,
                 bool strip_ownership = false);
PlanPtr MakeProject(PlanPtr input, std::vector<ExprPtr> exprs,
                    std::vector<std::string> names);
PlanPtr MakeSelect(PlanPtr input, ExprPtr predicate);
PlanPtr MakeGroupAggregate(PlanPtr input, std::vector<std::string> key_names,
                           std::vector<PlainAggregate> aggregates);
PlanPtr MakeJoinUsingUid(PlanPtr left, PlanPtr right,
                         ExprPtr extra_condition = nullptr);
PlanPtr MakeReservoirPerUser(PlanPtr input, std::int64_t per_user_cap);
PlanPtr MakeAnonAggregate(PlanPtr input, std::vector<std::string> key_names,
                          std::vector<AnonAggregateCall> aggregates);

struct ExecDiagnostics {
  std::int64_t row_eval_errors = 0;
  std::vector<std::string> notes;

  void NoteEvalError(const std::string& where, const std::string& what);
};

// Executes a plan tree, deterministic given (plan, catalog, rng seed):
// node randomness comes from substreams labeled by the node's path from
// the root, so sibling operators never share draws. kAnonAggregate nodes
// are not executable here and throw InternalError.
Relation EvalPlan(const PlanNode& plan, const Catalog& catalog,
                  RandomSource& rng, ExecDiagnostics* diag = nullptr);

struct OwnershipViolation {
  std::string node;    // rendered head line of the offending operator
  std::string reason;
};

// Checks the subtree feeding an anonymized aggregation against the
// ownership rules: scans must be owned tables, projections must keep uid,
// grouping must key on uid, joins must match on uid between owned inputs,
// and no nested anonymized aggregation. Returns the first violation in
// pre-order, or nullopt when the tree is acceptable.
std::optional<OwnershipViolation> ValidateOwnership(const PlanNode& subquery);

// Stable indented text form used by tests and --explain output.
std::string RenderPlan(const PlanNode& plan);

}  // namespace dpquery
