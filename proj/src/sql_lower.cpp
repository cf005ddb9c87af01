#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dpquery/errors.hpp"
#include "dpquery/sql.hpp"

namespace dpquery {

namespace {

// Alias scope: one entry per FROM table ref, mapping the visible name to
// its output columns so qualified references can be checked and stripped
// down to plain names before binding.
struct ScopeEntry {
  std::string name;
  std::set<std::string> columns;
};

using Scope = std::vector<ScopeEntry>;

std::string ResolveRef(const Scope& scope, const std::string& name) {
  std::size_t dot = name.find('.');
  if (dot == std::string::npos) {
    return name;
  }
  std::string qualifier = name.substr(0, dot);
  std::string column = name.substr(dot + 1);
  for (const auto& entry : scope) {
    if (entry.name == qualifier) {
      if (entry.columns.count(column) == 0) {
        throw ParseError("unknown column: " + name);
      }
      return column;
    }
  }
  throw ParseError("unknown table alias: " + qualifier);
}

ExprPtr RebuildWithArgs(const Expr& e, std::vector<ExprPtr> args) {
  switch (e.kind) {
    case ExprKind::kUnary:
      return Unary(e.unary_op, args[0]);
    case ExprKind::kBinary:
      return Bin(e.binary_op, args[0], args[1]);
    case ExprKind::kIf:
      return If(args[0], args[1], args[2]);
    case ExprKind::kLaplaceNoise:
      return LaplaceNoise(args[0]);
    case ExprKind::kCall:
      return Call(e.call_name, std::move(args), e.call_star, e.call_distinct);
    default:
      throw InternalError("expression node has no arguments to rebuild");
  }
}

// Strips qualified column references via the scope and turns the parsed
// IF / LAPLACE calls into their dedicated node kinds.
ExprPtr Normalize(const ExprPtr& e, const Scope& scope) {
  if (!e) {
    return nullptr;
  }
  if (e->kind == ExprKind::kLiteral) {
    return e;
  }
  if (e->kind == ExprKind::kColumnRef) {
    return Col(ResolveRef(scope, e->column));
  }
  std::vector<ExprPtr> args;
  args.reserve(e->args.size());
  for (const auto& a : e->args) {
    args.push_back(Normalize(a, scope));
  }
  if (e->kind == ExprKind::kCall) {
    if (e->call_name == "IF") {
      if (e->call_star || e->call_distinct || args.size() != 3) {
        throw ParseError("IF takes a condition and two branches");
      }
      return If(args[0], args[1], args[2]);
    }
    if (e->call_name == "LAPLACE") {
      if (e->call_star || e->call_distinct || args.size() != 1) {
        throw ParseError("LAPLACE takes a scale argument");
      }
      return LaplaceNoise(args[0]);
    }
  }
  return RebuildWithArgs(*e, std::move(args));
}

bool IsPlainAggCall(const Expr& e) {
  if (e.kind != ExprKind::kCall) {
    return false;
  }
  const std::string& n = e.call_name;
  return n == "COUNT" || n == "SUM" || n == "AVG" || n == "VAR" ||
         n == "STDDEV" || n == "QUANTILE";
}

double QuantileRankLiteral(const ExprPtr& e) {
  if (e && e->kind == ExprKind::kLiteral) {
    if (const auto* i = std::get_if<std::int64_t>(&e->literal)) {
      return static_cast<double>(*i);
    }
    if (const auto* d = std::get_if<double>(&e->literal)) {
      return *d;
    }
  }
  throw ParseError("quantile rank must be a numeric literal");
}

// Replaces every aggregate call with a reference to a hoisted aggregate
// column; identical calls (after normalization) share one column.
struct HoistContext {
  std::vector<PlainAggregate> aggs;
  std::map<std::string, std::string> by_render;
};

ExprPtr HoistAggregates(const ExprPtr& e, HoistContext& ctx) {
  if (!e) {
    return nullptr;
  }
  if (IsPlainAggCall(*e)) {
    for (const auto& a : e->args) {
      if (FindExpr(a, IsPlainAggCall) != nullptr) {
        throw ParseError("aggregate calls cannot nest");
      }
    }
    std::string rendered = RenderExpr(e);
    auto it = ctx.by_render.find(rendered);
    if (it != ctx.by_render.end()) {
      return Col(it->second);
    }
    PlainAggregate agg;
    const std::string& fn = e->call_name;
    if (fn == "COUNT") {
      if (e->call_star) {
        agg.func = PlainAggFunc::kCountStar;
      } else if (e->call_distinct) {
        agg.func = PlainAggFunc::kCountDistinct;
        agg.arg = e->args[0];
      } else if (e->args.size() == 1) {
        agg.func = PlainAggFunc::kCount;
        agg.arg = e->args[0];
      } else {
        throw ParseError("COUNT takes *, a column, or DISTINCT column");
      }
    } else if (fn == "QUANTILE") {
      if (e->call_star || e->call_distinct || e->args.size() != 2) {
        throw ParseError("QUANTILE takes a rank literal and an argument");
      }
      agg.func = PlainAggFunc::kQuantile;
      agg.quantile_rank = QuantileRankLiteral(e->args[0]);
      agg.arg = e->args[1];
    } else {
      if (e->call_star) {
        throw ParseError(fn + "(*) is not supported");
      }
      if (e->call_distinct) {
        throw ParseError("DISTINCT is supported only for COUNT");
      }
      if (e->args.size() != 1) {
        throw ParseError(fn + " takes one argument");
      }
      if (fn == "SUM") {
        agg.func = PlainAggFunc::kSum;
      } else if (fn == "AVG") {
        agg.func = PlainAggFunc::kAvg;
      } else if (fn == "VAR") {
        agg.func = PlainAggFunc::kVar;
      } else {
        agg.func = PlainAggFunc::kStddev;
      }
      agg.arg = e->args[0];
    }
    agg.output_name = rendered;
    ctx.by_render.emplace(rendered, rendered);
    ctx.aggs.push_back(std::move(agg));
    return Col(std::move(rendered));
  }
  if (e->kind == ExprKind::kLiteral || e->kind == ExprKind::kColumnRef) {
    return e;
  }
  std::vector<ExprPtr> args;
  args.reserve(e->args.size());
  for (const auto& a : e->args) {
    args.push_back(HoistAggregates(a, ctx));
  }
  return RebuildWithArgs(*e, std::move(args));
}

std::string Trailing(const std::string& name) {
  std::size_t dot = name.find('.');
  return dot == std::string::npos ? name : name.substr(dot + 1);
}

std::string ItemName(const SelectItemAst& item) {
  if (!item.alias.empty()) {
    return item.alias;
  }
  if (item.anon.has_value()) {
    return std::string("anon_") + AggregateKindName(item.anon->kind);
  }
  if (item.expr && item.expr->kind == ExprKind::kColumnRef) {
    return Trailing(item.expr->column);
  }
  return RenderExpr(item.expr);
}

PlanPtr LowerQueryBody(const QueryAst& q, const Catalog& catalog,
                       bool owned_mode);

// Builds the FROM subtree and fills the alias scope. The uid designation
// must survive into uid-joins and reservoir sampling even in plain
// queries; plain mode clears it again at the subtree top so the rest of
// the query behaves like ordinary SQL.
PlanPtr LowerFrom(const QueryAst& q, const Catalog& catalog, bool owned_mode,
                  Scope& scope) {
  bool needs_uid = owned_mode;
  if (q.from.size() > 1) {
    needs_uid = true;
  }
  for (const auto& ref : q.from) {
    if (ref.has_sample) {
      needs_uid = true;
    }
  }
  PlanPtr plan;
  for (const auto& ref : q.from) {
    PlanPtr p;
    std::string visible;
    if (ref.subquery) {
      p = LowerQueryBody(*ref.subquery, catalog, needs_uid);
      visible = ref.alias;  // an unaliased subquery has no qualifier
    } else {
      p = MakeScan(catalog, ref.table, /*strip_ownership=*/!needs_uid);
      visible = ref.alias.empty() ? ref.table : ref.alias;
    }
    if (ref.has_sample) {
      p = MakeReservoirPerUser(std::move(p), ref.sample_rows);
    }
    if (!visible.empty()) {
      for (const auto& entry : scope) {
        if (entry.name == visible) {
          throw ParseError("duplicate table alias: " + visible);
        }
      }
      ScopeEntry entry;
      entry.name = visible;
      for (const auto& c : p->schema.columns) {
        entry.columns.insert(c.name);
      }
      scope.push_back(std::move(entry));
    }
    plan = plan ? MakeJoinUsingUid(std::move(plan), std::move(p))
                : std::move(p);
  }
  if (!owned_mode && needs_uid) {
    plan->schema.uid_index.reset();
  }
  return plan;
}

PlanPtr LowerQueryBody(const QueryAst& q, const Catalog& catalog,
                       bool owned_mode) {
  if (q.with_anonymization) {
    throw InternalError("anonymized query lowered as plain");
  }
  Scope scope;
  PlanPtr plan = LowerFrom(q, catalog, owned_mode, scope);
  if (q.where) {
    plan = MakeSelect(std::move(plan), Normalize(q.where, scope));
  }
  bool has_agg = false;
  for (const auto& item : q.items) {
    if (item.anon.has_value()) {
      throw InternalError("anonymized aggregate in a plain query");
    }
    if (FindExpr(item.expr, IsPlainAggCall) != nullptr) {
      has_agg = true;
    }
  }
  std::vector<ExprPtr> exprs;
  std::vector<std::string> names;
  if (!q.group_by.empty() || q.having || has_agg) {
    std::vector<std::string> keys;
    for (const auto& g : q.group_by) {
      keys.push_back(ResolveRef(scope, g));
    }
    HoistContext ctx;
    for (const auto& item : q.items) {
      exprs.push_back(HoistAggregates(Normalize(item.expr, scope), ctx));
      names.push_back(ItemName(item));
    }
    plan = MakeGroupAggregate(std::move(plan), std::move(keys),
                              std::move(ctx.aggs));
    plan = MakeProject(std::move(plan), std::move(exprs), std::move(names));
    if (q.having) {
      // HAVING sees the projected output, so aliases resolve and raw
      // input columns do not.
      plan = MakeSelect(std::move(plan), Normalize(q.having, scope));
    }
  } else {
    for (const auto& item : q.items) {
      exprs.push_back(Normalize(item.expr, scope));
      names.push_back(ItemName(item));
    }
    plan = MakeProject(std::move(plan), std::move(exprs), std::move(names));
  }
  return plan;
}

}  // namespace

LoweredQuery LowerQuery(const QueryAst& q, const Catalog& catalog) {
  LoweredQuery out;
  if (!q.with_anonymization) {
    out.plan = LowerQueryBody(q, catalog, /*owned_mode=*/false);
    out.anonymized = false;
    return out;
  }
  Scope scope;
  PlanPtr plan = LowerFrom(q, catalog, /*owned_mode=*/true, scope);
  if (q.where) {
    plan = MakeSelect(std::move(plan), Normalize(q.where, scope));
  }
  std::vector<std::string> keys;
  for (const auto& g : q.group_by) {
    keys.push_back(ResolveRef(scope, g));
  }
  std::vector<AnonAggregateCall> calls;
  for (const auto& item : q.items) {
    if (item.anon.has_value()) {
      AnonAggregateCall call;
      call.kind = item.anon->kind;
      call.arg = Normalize(item.anon->arg, scope);
      call.bounds = item.anon->bounds;
      call.ntile_rank = item.anon->ntile_rank;
      call.output_name = ItemName(item);
      calls.push_back(std::move(call));
      continue;
    }
    ExprPtr norm = Normalize(item.expr, scope);
    if (!norm || norm->kind != ExprKind::kColumnRef ||
        std::find(keys.begin(), keys.end(), norm->column) == keys.end()) {
      throw ParseError(
          "anonymized select items must be group keys or ANON_ aggregates");
    }
    if (!item.alias.empty() && item.alias != norm->column) {
      throw ParseError("aliasing a group key is not supported");
    }
  }
  if (calls.empty()) {
    throw ParseError("an anonymized query needs at least one ANON_ aggregate");
  }
  PlanPtr node =
      MakeAnonAggregate(std::move(plan), std::move(keys), std::move(calls));
  if (auto violation = ValidateOwnership(*node->children[0])) {
    throw OwnershipError(violation->node + ": " + violation->reason);
  }
  out.plan = std::move(node);
  out.anonymized = true;
  return out;
}

}  // namespace dpquery
