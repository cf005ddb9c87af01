#include "dpquery/plan.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <utility>

#include "dpquery/random_source.hpp"

namespace dpquery {
namespace {

std::string JoinStrings(const std::vector<std::string>& parts,
                        const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) {
      out += sep;
    }
    out += parts[i];
  }
  return out;
}

void CheckUniqueNames(const std::vector<std::string>& names) {
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty()) {
      throw ParseError("empty output column name");
    }
    if (!seen.insert(n).second) {
      throw ParseError("duplicate output column: " + n);
    }
  }
}

bool SchemasMatch(const Schema& a, const Schema& b) {
  if (a.columns.size() != b.columns.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.columns.size(); ++i) {
    if (a.columns[i].name != b.columns[i].name ||
        a.columns[i].type != b.columns[i].type) {
      return false;
    }
  }
  return true;
}

bool IsBareColumnRef(const ExprPtr& e, std::size_t index) {
  return e && e->kind == ExprKind::kColumnRef &&
         e->column_index == static_cast<int>(index);
}

ValueType PlainAggOutputType(PlainAggFunc func) {
  switch (func) {
    case PlainAggFunc::kCountStar:
    case PlainAggFunc::kCount:
    case PlainAggFunc::kCountDistinct:
      return ValueType::kInt64;
    default:
      return ValueType::kFloat64;
  }
}

// Accumulator shared by all plain aggregate functions; only the fields the
// function needs are touched.
struct AggState {
  std::int64_t n = 0;
  double sum = 0.0;
  double sum_squares = 0.0;
  bool any = false;
  std::set<Value, ValueLess> distinct;
  std::vector<double> values;
};

void Accumulate(PlainAggFunc func, AggState& state, const Value& v) {
  if (func == PlainAggFunc::kCountStar) {
    ++state.n;
    return;
  }
  if (IsNull(v)) {
    return;  // nulls are skipped by every function except count(*)
  }
  switch (func) {
    case PlainAggFunc::kCount:
      ++state.n;
      break;
    case PlainAggFunc::kCountDistinct:
      state.distinct.insert(v);
      break;
    case PlainAggFunc::kSum:
    case PlainAggFunc::kAvg:
    case PlainAggFunc::kVar:
    case PlainAggFunc::kStddev: {
      double d = AsDouble(v);  // EvalError on text, caught per row
      state.sum += d;
      state.sum_squares += d * d;
      ++state.n;
      state.any = true;
      break;
    }
    case PlainAggFunc::kQuantile:
      state.values.push_back(AsDouble(v));
      break;
    default:
      break;
  }
}

Value Finalize(const PlainAggregate& agg, AggState& state) {
  switch (agg.func) {
    case PlainAggFunc::kCountStar:
    case PlainAggFunc::kCount:
      return Value{state.n};
    case PlainAggFunc::kCountDistinct:
      return Value{static_cast<std::int64_t>(state.distinct.size())};
    case PlainAggFunc::kSum:
      return state.any ? Value{state.sum} : Value{};
    case PlainAggFunc::kAvg:
      return state.n > 0 ? Value{state.sum / state.n} : Value{};
    case PlainAggFunc::kVar:
    case PlainAggFunc::kStddev: {
      if (state.n == 0) {
        return Value{};
      }
      double mean = state.sum / state.n;
      double var = state.sum_squares / state.n - mean * mean;
      if (var < 0.0) {
        var = 0.0;  // rounding; NaN passes through untouched
      }
      return Value{agg.func == PlainAggFunc::kVar ? var : std::sqrt(var)};
    }
    case PlainAggFunc::kQuantile: {
      if (state.values.empty()) {
        return Value{};
      }
      std::sort(state.values.begin(), state.values.end(),
                [](double x, double y) {
                  bool nx = std::isnan(x);
                  bool ny = std::isnan(y);
                  if (nx || ny) {
                    return !nx && ny;  // NaN sorts last
                  }
                  return x < y;
                });
      auto idx = static_cast<std::size_t>(
          std::floor(agg.quantile_rank *
                     static_cast<double>(state.values.size())));
      idx = std::min(idx, state.values.size() - 1);
      return Value{state.values[idx]};
    }
    default:
      return Value{};
  }
}

std::string RenderPlainAggregate(const PlainAggregate& agg) {
  std::string out;
  switch (agg.func) {
    case PlainAggFunc::kCountStar:
      out = "count(*)";
      break;
    case PlainAggFunc::kQuantile: {
      char rank[32];
      std::snprintf(rank, sizeof(rank), "%g", agg.quantile_rank);
      out = "quantile(" + std::string(rank) + ", " + RenderExpr(agg.arg) + ")";
      break;
    }
    default:
      out = std::string(PlainAggFuncName(agg.func)) + "(" +
            RenderExpr(agg.arg) + ")";
      break;
  }
  return out + " as " + agg.output_name;
}

std::string RenderAnonAggregate(const AnonAggregateCall& call) {
  std::string name = "anon_";
  switch (call.kind) {
    case AggregateKind::kCount:
      name += "count";
      break;
    case AggregateKind::kSum:
      name += "sum";
      break;
    case AggregateKind::kAvg:
      name += "avg";
      break;
    case AggregateKind::kVar:
      name += "var";
      break;
    case AggregateKind::kStddev:
      name += "stddev";
      break;
    case AggregateKind::kNtile:
      name += "ntile";
      break;
  }
  std::string spec;
  if (call.bounds.has_value()) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%g,%g", call.bounds->lower,
                  call.bounds->upper);
    spec = buf;
  } else {
    spec = "auto";
  }
  if (call.kind == AggregateKind::kNtile) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), ";rank=%g", call.ntile_rank);
    spec += buf;
  }
  std::string arg = call.arg ? RenderExpr(call.arg) : "*";
  return name + "[" + spec + "](" + arg + ") as " + call.output_name;
}

std::string RenderNodeHead(const PlanNode& node) {
  switch (node.kind) {
    case PlanKind::kScan:
      return "scan " + node.table +
             (node.strip_ownership ? " (ownership stripped)" : "");
    case PlanKind::kProject: {
      std::vector<std::string> parts;
      for (std::size_t i = 0; i < node.exprs.size(); ++i) {
        const auto& e = node.exprs[i];
        const auto& name = node.output_names[i];
        if (e->kind == ExprKind::kColumnRef && e->column == name) {
          parts.push_back(name);
        } else {
          parts.push_back(name + " := " + RenderExpr(e));
        }
      }
      return "project [" + JoinStrings(parts, ", ") + "]";
    }
    case PlanKind::kSelect:
      return "select " + RenderExpr(node.predicate);
    case PlanKind::kGroupAggregate: {
      std::vector<std::string> aggs;
      for (const auto& a : node.aggregates) {
        aggs.push_back(RenderPlainAggregate(a));
      }
      return "group_aggregate keys=[" + JoinStrings(node.key_names, ", ") +
             "] aggs=[" + JoinStrings(aggs, ", ") + "]";
    }
    case PlanKind::kJoinUsingUid:
      return node.predicate
                 ? "join using (uid) on " + RenderExpr(node.predicate)
                 : "join using (uid)";
    case PlanKind::kReservoirPerUser: {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "reservoir_per_user cap=%lld",
                    static_cast<long long>(node.per_user_cap));
      return buf;
    }
    case PlanKind::kAnonAggregate: {
      std::vector<std::string> aggs;
      for (const auto& a : node.anon_aggregates) {
        aggs.push_back(RenderAnonAggregate(a));
      }
      return "anon_aggregate keys=[" + JoinStrings(node.key_names, ", ") +
             "] aggs=[" + JoinStrings(aggs, ", ") + "]";
    }
  }
  return "?";
}

void RenderInto(const PlanNode& node, int depth, std::string& out) {
  out.append(static_cast<std::size_t>(depth) * 2, ' ');
  out += RenderNodeHead(node);
  out += "\n";
  for (const auto& child : node.children) {
    RenderInto(*child, depth + 1, out);
  }
}

Relation EvalNode(const PlanNode& node, const Catalog& catalog,
                  RandomSource& rng, const std::string& path,
                  ExecDiagnostics* diag);

Value TryEval(const ExprPtr& expr, const Row& row, RandomSource* rng,
              ExecDiagnostics* diag, const char* where, bool* failed) {
  try {
    return EvalExpr(*expr, row, rng);
  } catch (const EvalError& e) {
    if (diag != nullptr) {
      diag->NoteEvalError(where, e.what());
    }
    if (failed != nullptr) {
      *failed = true;
    }
    return Value{};
  }
}

Relation EvalProject(const PlanNode& node, Relation input, RandomSource& rng,
                     ExecDiagnostics* diag) {
  Relation out;
  out.schema = node.schema;
  out.rows.reserve(input.rows.size());
  for (const auto& row : input.rows) {
    Row result;
    result.reserve(node.exprs.size());
    for (const auto& e : node.exprs) {
      // A failing cell becomes null; the row itself survives.
      result.push_back(TryEval(e, row, &rng, diag, "project", nullptr));
    }
    out.rows.push_back(std::move(result));
  }
  return out;
}

Relation EvalSelect(const PlanNode& node, Relation input, RandomSource& rng,
                    ExecDiagnostics* diag) {
  Relation out;
  out.schema = node.schema;
  for (auto& row : input.rows) {
    Value v = TryEval(node.predicate, row, &rng, diag, "select", nullptr);
    if (IsTruthy(v)) {
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

Relation EvalGroupAggregate(const PlanNode& node, Relation input,
                            RandomSource& rng, ExecDiagnostics* diag) {
  if (input.owned()) {
    bool uid_in_keys = false;
    for (const auto& k : node.group_keys) {
      if (IsBareColumnRef(k, *input.schema.uid_index)) {
        uid_in_keys = true;
      }
    }
    if (!uid_in_keys) {
      throw OwnershipError(
          "grouping a user-owned relation without uid among the keys");
    }
  }
  std::map<std::vector<Value>, std::vector<AggState>, ValueLess> groups;
  if (node.group_keys.empty()) {
    // Global aggregation yields one row even over empty input.
    groups.emplace(std::vector<Value>{},
                   std::vector<AggState>(node.aggregates.size()));
  }
  for (const auto& row : input.rows) {
    std::vector<Value> key;
    key.reserve(node.group_keys.size());
    bool failed = false;
    for (const auto& k : node.group_keys) {
      key.push_back(TryEval(k, row, &rng, diag, "group key", &failed));
      if (failed) {
        break;
      }
    }
    if (failed) {
      continue;
    }
    auto it = groups.find(key);
    if (it == groups.end()) {
      it = groups
               .emplace(std::move(key),
                        std::vector<AggState>(node.aggregates.size()))
               .first;
    }
    for (std::size_t i = 0; i < node.aggregates.size(); ++i) {
      const auto& agg = node.aggregates[i];
      Value v;
      if (agg.func != PlainAggFunc::kCountStar) {
        bool arg_failed = false;
        v = TryEval(agg.arg, row, &rng, diag, "aggregate", &arg_failed);
        if (arg_failed) {
          continue;
        }
      }
      try {
        Accumulate(agg.func, it->second[i], v);
      } catch (const EvalError& e) {
        if (diag != nullptr) {
          diag->NoteEvalError("aggregate", e.what());
        }
      }
    }
  }
  Relation out;
  out.schema = node.schema;
  out.rows.reserve(groups.size());
  for (auto& [key, states] : groups) {
    Row row = key;
    for (std::size_t i = 0; i < node.aggregates.size(); ++i) {
      row.push_back(Finalize(node.aggregates[i], states[i]));
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

Relation EvalJoin(const PlanNode& node, Relation left, Relation right,
                  RandomSource& rng, ExecDiagnostics* diag) {
  std::size_t li = *left.schema.uid_index;
  std::size_t ri = *right.schema.uid_index;
  std::map<Value, std::vector<std::size_t>, ValueLess> right_index;
  for (std::size_t r = 0; r < right.rows.size(); ++r) {
    const Value& uid = right.rows[r][ri];
    if (!IsNull(uid)) {
      right_index[uid].push_back(r);
    }
  }
  Relation out;
  out.schema = node.schema;
  for (const auto& lrow : left.rows) {
    const Value& uid = lrow[li];
    if (IsNull(uid)) {
      continue;  // a row without an owner matches nothing
    }
    auto it = right_index.find(uid);
    if (it == right_index.end()) {
      continue;
    }
    for (std::size_t r : it->second) {
      const auto& rrow = right.rows[r];
      Row combined;
      combined.reserve(node.schema.columns.size());
      combined.push_back(uid);
      for (std::size_t i = 0; i < lrow.size(); ++i) {
        if (i != li) {
          combined.push_back(lrow[i]);
        }
      }
      for (std::size_t i = 0; i < rrow.size(); ++i) {
        if (i != ri) {
          combined.push_back(rrow[i]);
        }
      }
      if (node.predicate) {
        Value v =
            TryEval(node.predicate, combined, &rng, diag, "join", nullptr);
        if (!IsTruthy(v)) {
          continue;
        }
      }
      out.rows.push_back(std::move(combined));
    }
  }
  return out;
}

Relation EvalReservoir(const PlanNode& node, Relation input,
                       RandomSource& rng) {
  std::size_t ui = *input.schema.uid_index;
  // Stable sort groups each user's rows contiguously while keeping their
  // input order, which pins that user's draw sequence for a given seed.
  std::stable_sort(input.rows.begin(), input.rows.end(),
                   [ui](const Row& a, const Row& b) {
                     return CompareValues(a[ui], b[ui]) < 0;
                   });
  auto cap = static_cast<std::size_t>(node.per_user_cap);
  Relation out;
  out.schema = node.schema;
  std::size_t start = 0;
  while (start < input.rows.size()) {
    std::size_t end = start + 1;
    while (end < input.rows.size() &&
           CompareValues(input.rows[end][ui], input.rows[start][ui]) == 0) {
      ++end;
    }
    std::size_t len = end - start;
    if (len <= cap) {
      for (std::size_t i = start; i < end; ++i) {
        out.rows.push_back(std::move(input.rows[i]));
      }
    } else {
      // Draws come from a substream keyed by the uid, so one user's
      // selection depends only on their own rows and the seed; adding or
      // removing other users cannot perturb it.
      RandomSource user_rng =
          rng.Substream("uid:" + RenderValue(input.rows[start][ui]));
      std::vector<std::size_t> chosen(cap);
      for (std::size_t i = 0; i < cap; ++i) {
        chosen[i] = i;
      }
      for (std::size_t i = cap; i < len; ++i) {
        std::uint64_t j = user_rng.NextUint64Below(i + 1);
        if (j < cap) {
          chosen[j] = i;
        }
      }
      std::sort(chosen.begin(), chosen.end());
      for (std::size_t i : chosen) {
        out.rows.push_back(std::move(input.rows[start + i]));
      }
    }
    start = end;
  }
  return out;
}

Relation EvalNode(const PlanNode& node, const Catalog& catalog,
                  RandomSource& rng, const std::string& path,
                  ExecDiagnostics* diag) {
  RandomSource node_rng = rng.Substream("node:" + path);
  std::vector<Relation> inputs;
  inputs.reserve(node.children.size());
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    inputs.push_back(EvalNode(*node.children[i], catalog, rng,
                              path + "." + std::to_string(i), diag));
  }
  switch (node.kind) {
    case PlanKind::kScan: {
      Relation out = catalog.Get(node.table);
      if (node.strip_ownership) {
        out.schema.uid_index.reset();
      }
      if (!SchemasMatch(out.schema, node.schema)) {
        throw InternalError("catalog table changed after planning: " +
                            node.table);
      }
      return out;
    }
    case PlanKind::kProject:
      return EvalProject(node, std::move(inputs[0]), node_rng, diag);
    case PlanKind::kSelect:
      return EvalSelect(node, std::move(inputs[0]), node_rng, diag);
    case PlanKind::kGroupAggregate:
      return EvalGroupAggregate(node, std::move(inputs[0]), node_rng, diag);
    case PlanKind::kJoinUsingUid:
      return EvalJoin(node, std::move(inputs[0]), std::move(inputs[1]),
                      node_rng, diag);
    case PlanKind::kReservoirPerUser:
      return EvalReservoir(node, std::move(inputs[0]), node_rng);
    case PlanKind::kAnonAggregate:
      throw InternalError(
          "anonymized aggregation must be rewritten before execution");
  }
  throw InternalError("unhandled plan kind");
}

}  // namespace

const char* PlainAggFuncName(PlainAggFunc func) {
  switch (func) {
    case PlainAggFunc::kCountStar:
      return "count_star";
    case PlainAggFunc::kCount:
      return "count";
    case PlainAggFunc::kCountDistinct:
      return "count_distinct";
    case PlainAggFunc::kSum:
      return "sum";
    case PlainAggFunc::kAvg:
      return "avg";
    case PlainAggFunc::kVar:
      return "var";
    case PlainAggFunc::kStddev:
      return "stddev";
    case PlainAggFunc::kQuantile:
      return "quantile";
  }
  return "unknown";
}

void ExecDiagnostics::NoteEvalError(const std::string& where,
                                    const std::string& what) {
  ++row_eval_errors;
  if (notes.size() < 20) {
    notes.push_back(where + ": " + what);
  }
}

PlanPtr MakeScan(const Catalog& catalog, std::string table,
                 bool strip_ownership) {
  auto node = std::make_unique<PlanNode>();
  node->kind = PlanKind::kScan;
  node->table = std::move(table);
  node->strip_ownership = strip_ownership;
  node->schema = catalog.Get(node->table).schema;
  if (strip_ownership) {
    node->schema.uid_index.reset();
  }
  return node;
}

PlanPtr MakeProject(PlanPtr input, std::vector<ExprPtr> exprs,
                    std::vector<std::string> names) {
  if (exprs.empty() || exprs.size() != names.size()) {
    throw ParseError("projection needs one name per expression");
  }
  auto node = std::make_unique<PlanNode>();
  node->kind = PlanKind::kProject;
  const Schema& in = input->schema;
  for (auto& e : exprs) {
    node->exprs.push_back(BindExpr(e, in));
  }
  node->output_names = std::move(names);
  // An owned input keeps its uid: when the projection does not mention it,
  // the column is appended so ownership survives the operator.
  std::optional<std::size_t> uid_out;
  if (in.owned()) {
    for (std::size_t i = 0; i < node->exprs.size(); ++i) {
      if (IsBareColumnRef(node->exprs[i], *in.uid_index)) {
        uid_out = i;
        break;
      }
    }
    if (!uid_out.has_value()) {
      const Column& uid_col = in.columns[*in.uid_index];
      node->exprs.push_back(
          BoundCol(uid_col.name, static_cast<int>(*in.uid_index)));
      node->output_names.push_back(uid_col.name);
      uid_out = node->exprs.size() - 1;
    }
  }
  CheckUniqueNames(node->output_names);
  for (std::size_t i = 0; i < node->exprs.size(); ++i) {
    node->schema.columns.push_back(
        {node->output_names[i], InferType(node->exprs[i], in)});
  }
  node->schema.uid_index = uid_out;
  node->children.push_back(std::move(input));
  return node;
}

PlanPtr MakeSelect(PlanPtr input, ExprPtr predicate) {
  auto node = std::make_unique<PlanNode>();
  node->kind = PlanKind::kSelect;
  node->predicate = BindExpr(predicate, input->schema);
  InferType(node->predicate, input->schema);
  node->schema = input->schema;
  node->children.push_back(std::move(input));
  return node;
}

PlanPtr MakeGroupAggregate(PlanPtr input, std::vector<std::string> key_names,
                           std::vector<PlainAggregate> aggregates) {
  auto node = std::make_unique<PlanNode>();
  node->kind = PlanKind::kGroupAggregate;
  const Schema& in = input->schema;
  std::optional<std::size_t> uid_out;
  for (std::size_t i = 0; i < key_names.size(); ++i) {
    ExprPtr key = BindExpr(Col(key_names[i]), in);
    if (in.owned() && IsBareColumnRef(key, *in.uid_index)) {
      uid_out = i;
    }
    node->schema.columns.push_back({key_names[i], InferType(key, in)});
    node->group_keys.push_back(std::move(key));
  }
  if (in.owned() && !uid_out.has_value()) {
    throw OwnershipError(
        "grouping a user-owned relation without uid among the keys");
  }
  node->key_names = std::move(key_names);
  for (auto& agg : aggregates) {
    if (agg.func == PlainAggFunc::kCountStar) {
      agg.arg = nullptr;
    } else {
      if (!agg.arg) {
        throw ParseError("aggregate needs an argument");
      }
      agg.arg = BindExpr(agg.arg, in);
      ValueType t = InferType(agg.arg, in);
      bool needs_number = agg.func != PlainAggFunc::kCount &&
                          agg.func != PlainAggFunc::kCountDistinct;
      if (needs_number && t == ValueType::kText) {
        throw ParseError("aggregate argument must be numeric");
      }
    }
    if (agg.func == PlainAggFunc::kQuantile &&
        !(agg.quantile_rank > 0.0 && agg.quantile_rank < 1.0)) {
      throw ParseError("quantile rank must be in (0, 1)");
    }
    node->schema.columns.push_back(
        {agg.output_name, PlainAggOutputType(agg.func)});
  }
  node->aggregates = std::move(aggregates);
  std::vector<std::string> all_names;
  for (const auto& c : node->schema.columns) {
    all_names.push_back(c.name);
  }
  CheckUniqueNames(all_names);
  node->schema.uid_index = uid_out;
  node->children.push_back(std::move(input));
  return node;
}

PlanPtr MakeJoinUsingUid(PlanPtr left, PlanPtr right, ExprPtr extra_condition) {
  if (!left->schema.owned() || !right->schema.owned()) {
    throw OwnershipError("join requires two user-owned inputs");
  }
  const Schema& ls = left->schema;
  const Schema& rs = right->schema;
  const Column& luid = ls.columns[*ls.uid_index];
  const Column& ruid = rs.columns[*rs.uid_index];
  if (luid.type != ruid.type && luid.type != ValueType::kNull &&
      ruid.type != ValueType::kNull) {
    throw ParseError("join uid columns have different types");
  }
  auto node = std::make_unique<PlanNode>();
  node->kind = PlanKind::kJoinUsingUid;
  node->schema.columns.push_back(luid);
  node->schema.uid_index = 0;
  for (std::size_t i = 0; i < ls.columns.size(); ++i) {
    if (i != *ls.uid_index) {
      node->schema.columns.push_back(ls.columns[i]);
    }
  }
  for (std::size_t i = 0; i < rs.columns.size(); ++i) {
    if (i != *rs.uid_index) {
      node->schema.columns.push_back(rs.columns[i]);
    }
  }
  if (extra_condition) {
    node->predicate = BindExpr(extra_condition, node->schema);
    InferType(node->predicate, node->schema);
  }
  node->children.push_back(std::move(left));
  node->children.push_back(std::move(right));
  return node;
}

PlanPtr MakeReservoirPerUser(PlanPtr input, std::int64_t per_user_cap) {
  if (!input->schema.owned()) {
    throw OwnershipError("per-user sampling requires a user-owned input");
  }
  if (per_user_cap < 1) {
    throw PrivacyParameterError("per-user row cap must be at least 1");
  }
  auto node = std::make_unique<PlanNode>();
  node->kind = PlanKind::kReservoirPerUser;
  node->per_user_cap = per_user_cap;
  node->schema = input->schema;
  node->children.push_back(std::move(input));
  return node;
}

PlanPtr MakeAnonAggregate(PlanPtr input, std::vector<std::string> key_names,
                          std::vector<AnonAggregateCall> aggregates) {
  auto node = std::make_unique<PlanNode>();
  node->kind = PlanKind::kAnonAggregate;
  const Schema& in = input->schema;
  for (const auto& name : key_names) {
    ExprPtr key = BindExpr(Col(name), in);
    node->group_keys.push_back(key);
    node->schema.columns.push_back({name, InferType(key, in)});
  }
  node->key_names = std::move(key_names);
  for (auto& call : aggregates) {
    if (call.kind == AggregateKind::kCount) {
      call.arg = nullptr;
    } else {
      if (!call.arg) {
        throw ParseError("anonymized aggregate needs an argument");
      }
      call.arg = BindExpr(call.arg, in);
      if (InferType(call.arg, in) == ValueType::kText) {
        throw ParseError("anonymized aggregate argument must be numeric");
      }
    }
    if (call.kind == AggregateKind::kNtile &&
        !(call.ntile_rank > 0.0 && call.ntile_rank < 1.0)) {
      throw PrivacyParameterError("ntile rank must be in (0, 1)");
    }
    node->schema.columns.push_back({call.output_name, ValueType::kFloat64});
  }
  node->anon_aggregates = std::move(aggregates);
  std::vector<std::string> all_names;
  for (const auto& c : node->schema.columns) {
    all_names.push_back(c.name);
  }
  CheckUniqueNames(all_names);
  node->children.push_back(std::move(input));
  return node;
}

Relation EvalPlan(const PlanNode& plan, const Catalog& catalog,
                  RandomSource& rng, ExecDiagnostics* diag) {
  return EvalNode(plan, catalog, rng, "0", diag);
}

std::optional<OwnershipViolation> ValidateOwnership(const PlanNode& subquery) {
  // Children first, so the report points at the root cause rather than a
  // symptom higher in the tree.
  for (const auto& child : subquery.children) {
    if (auto v = ValidateOwnership(*child)) {
      return v;
    }
  }
  auto violation = [&](const char* reason) {
    return OwnershipViolation{RenderNodeHead(subquery), reason};
  };
  switch (subquery.kind) {
    case PlanKind::kScan:
      if (!subquery.schema.owned()) {
        return violation("table is not user-owned");
      }
      return std::nullopt;
    case PlanKind::kProject:
      if (!subquery.schema.owned()) {
        return violation("projection drops the uid column");
      }
      return std::nullopt;
    case PlanKind::kSelect:
      return std::nullopt;
    case PlanKind::kGroupAggregate:
      if (!subquery.schema.owned()) {
        return violation("grouping does not key on uid");
      }
      return std::nullopt;
    case PlanKind::kJoinUsingUid:
      for (const auto& child : subquery.children) {
        if (!child->schema.owned()) {
          return violation("join input is not user-owned");
        }
      }
      return std::nullopt;
    case PlanKind::kReservoirPerUser:
      if (!subquery.children[0]->schema.owned()) {
        return violation("per-user sampling over an un-owned input");
      }
      return std::nullopt;
    case PlanKind::kAnonAggregate:
      return violation("anonymized aggregation cannot be nested");
  }
  return std::nullopt;
}

std::string RenderPlan(const PlanNode& plan) {
  std::string out;
  RenderInto(plan, 0, out);
  return out;
}

}  // namespace dpquery
