#include "dpquery/anon.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <utility>

#include "dpquery/noise.hpp"
#include "dpquery/random_source.hpp"

namespace dpquery {
namespace {

PlainAggFunc PartialFuncFor(AggregateKind kind) {
  switch (kind) {
    case AggregateKind::kCount:
      return PlainAggFunc::kCountStar;
    case AggregateKind::kSum:
      return PlainAggFunc::kSum;
    case AggregateKind::kAvg:
      return PlainAggFunc::kAvg;
    case AggregateKind::kVar:
      return PlainAggFunc::kVar;
    case AggregateKind::kStddev:
      return PlainAggFunc::kStddev;
    case AggregateKind::kNtile:
      return PlainAggFunc::kQuantile;
  }
  throw InternalError("unhandled aggregate kind");
}

std::string GroupLabel(const std::vector<Value>& key) {
  std::string label;
  for (const auto& v : key) {
    label += RenderValue(v);
    label += '\x1f';
  }
  return label;
}

// Rows of one surviving group, all from distinct users by construction.
struct GroupData {
  std::vector<const Row*> rows;
};

struct ReleaseOutcome {
  bool ok = false;  // false: bounds inference failed, group is suppressed
  std::vector<NoisyResult> values;
};

ReleaseOutcome ReleaseGroup(const RewrittenPlan& plan,
                            const std::vector<const Row*>& rows,
                            const std::string& label_ns,
                            const std::string& label, RandomSource& rng,
                            const ExecOptions& options,
                            ExecDiagnostics* diag) {
  const auto& calls = plan.cross_user_stage->anon_aggregates;
  ReleaseOutcome outcome;
  for (const auto& call : calls) {
    std::vector<double> values;
    if (call.arg) {
      values.reserve(rows.size());
      for (const Row* row : rows) {
        values.push_back(
            AsDouble((*row)[static_cast<std::size_t>(call.arg->column_index)]));
      }
    }
    double eps = plan.shares.per_aggregate_epsilon;
    std::optional<ClampBounds> bounds = call.bounds;
    if (!bounds.has_value() && call.kind != AggregateKind::kCount) {
      // Missing bounds: infer them per group from half the share, release
      // from the other half.
      eps /= 2.0;
      RandomSource bounds_rng =
          rng.Substream("bounds:" + label_ns + label + ":" + call.output_name);
      try {
        bounds = InferBounds(values, ApproxBoundsConfig{}, eps,
                             options.noise_enabled ? &bounds_rng : nullptr);
      } catch (const BoundsInferenceError& e) {
        if (diag != nullptr) {
          diag->notes.push_back("group suppressed, bounds inference failed: " +
                                std::string(e.what()));
        }
        return outcome;
      }
    }
    AggregatorSpec spec;
    spec.kind = call.kind;
    spec.bounds = bounds;
    spec.ntile_rank = call.ntile_rank;
    Aggregator agg(spec);
    if (call.arg) {
      for (double v : values) {
        agg.Accumulate(v);
      }
    } else {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        agg.Accumulate(0.0);
      }
    }
    if (options.noise_enabled) {
      RandomSource agg_rng = rng.Substream("aggregate:" + label_ns + label +
                                           ":" + call.output_name);
      outcome.values.push_back(agg.Release(eps, options.ci_level, agg_rng));
    } else {
      double v = agg.UnnoisedValue();
      outcome.values.push_back(NoisyResult{v, v, v, 0.0});
    }
  }
  outcome.ok = true;
  return outcome;
}

char* FormatDouble(char* buf, std::size_t n, double v) {
  std::snprintf(buf, n, "%.6g", v);
  return buf;
}

}  // namespace

double ComputeTau(double eps_threshold, double delta,
                  std::int64_t max_contribution) {
  if (!(eps_threshold > 0) || !std::isfinite(eps_threshold)) {
    throw PrivacyParameterError("threshold epsilon must be positive");
  }
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw PrivacyParameterError(
        "thresholded release needs delta strictly between 0 and 1");
  }
  if (max_contribution < 1) {
    throw PrivacyParameterError("contribution bound must be at least 1");
  }
  double cu = static_cast<double>(max_contribution);
  double inner = 2.0 - 2.0 * std::pow(1.0 - delta, 1.0 / cu);
  return 1.0 - (cu / eps_threshold) * std::log(inner);
}

BudgetSplit SplitBudget(const PrivacyBudget& budget, int num_aggregates) {
  if (num_aggregates < 1) {
    throw PrivacyParameterError("budget split needs at least one aggregate");
  }
  double share = budget.epsilon /
                 (static_cast<double>(budget.max_contribution) *
                  (num_aggregates + 1));
  return BudgetSplit{share, share, num_aggregates};
}

double ReleaseProbability(double tau, double eps_threshold,
                          std::int64_t max_contribution) {
  if (!(eps_threshold > 0) || !std::isfinite(eps_threshold)) {
    throw PrivacyParameterError("threshold epsilon must be positive");
  }
  if (max_contribution < 1) {
    throw PrivacyParameterError("contribution bound must be at least 1");
  }
  if (!(tau >= 1.0)) {
    throw PrivacyParameterError("release probability defined for tau >= 1");
  }
  return 0.5 * std::exp(-(tau - 1.0) * eps_threshold /
                        static_cast<double>(max_contribution));
}

RewrittenPlan RewriteAnonymized(PlanPtr anon_root, const PrivacyBudget& budget,
                                bool leftovers_enabled) {
  if (!anon_root || anon_root->kind != PlanKind::kAnonAggregate) {
    throw InternalError("rewrite expects an anonymized aggregation root");
  }
  if (anon_root->anon_aggregates.empty()) {
    throw ParseError("anonymized query needs at least one aggregate");
  }
  PlanPtr subquery = std::move(anon_root->children[0]);
  if (auto violation = ValidateOwnership(*subquery)) {
    throw OwnershipError(violation->node + ": " + violation->reason);
  }
  const Schema& sub_schema = subquery->schema;
  const std::string uid_name = sub_schema.columns[*sub_schema.uid_index].name;

  std::vector<std::string> group_cols;
  group_cols.push_back(uid_name);
  for (const auto& k : anon_root->key_names) {
    group_cols.push_back(k);
  }
  std::vector<PlainAggregate> partials;
  for (const auto& call : anon_root->anon_aggregates) {
    PlainAggregate p;
    p.func = PartialFuncFor(call.kind);
    p.arg = call.arg;
    p.quantile_rank = call.ntile_rank;
    p.output_name = "pu_" + call.output_name;
    partials.push_back(std::move(p));
  }
  PlanPtr per_user = MakeReservoirPerUser(
      MakeGroupAggregate(std::move(subquery), group_cols, std::move(partials)),
      budget.max_contribution);

  const Schema& u_schema = per_user->schema;
  std::size_t num_keys = anon_root->key_names.size();

  auto cross = std::make_unique<PlanNode>();
  cross->kind = PlanKind::kAnonAggregate;
  cross->key_names = anon_root->key_names;
  for (std::size_t i = 0; i < num_keys; ++i) {
    // Key i sits right after uid in the per-user stage output.
    int pos = static_cast<int>(1 + i);
    cross->group_keys.push_back(
        BoundCol(u_schema.columns[static_cast<std::size_t>(pos)].name, pos));
    cross->schema.columns.push_back(
        u_schema.columns[static_cast<std::size_t>(pos)]);
  }
  for (std::size_t i = 0; i < anon_root->anon_aggregates.size(); ++i) {
    const auto& call = anon_root->anon_aggregates[i];
    int pos = static_cast<int>(1 + num_keys + i);
    AnonAggregateCall mapped;
    mapped.output_name = call.output_name;
    mapped.ntile_rank = call.ntile_rank;
    mapped.bounds = call.bounds;
    if (call.kind == AggregateKind::kCount && call.bounds.has_value()) {
      // A bounded count is a sum of clamped per-user row counts.
      mapped.kind = AggregateKind::kSum;
    } else {
      mapped.kind = call.kind;
    }
    if (!(mapped.kind == AggregateKind::kCount)) {
      mapped.arg = BoundCol(
          u_schema.columns[static_cast<std::size_t>(pos)].name, pos);
    }
    cross->schema.columns.push_back({call.output_name, ValueType::kFloat64});
    cross->anon_aggregates.push_back(std::move(mapped));
  }

  RewrittenPlan plan;
  plan.shares =
      SplitBudget(budget, static_cast<int>(cross->anon_aggregates.size()));
  plan.tau = ComputeTau(plan.shares.threshold_epsilon, budget.delta,
                        budget.max_contribution);
  plan.per_user_stage = std::move(per_user);
  plan.cross_user_stage = std::move(cross);
  plan.budget = budget;
  plan.leftovers_enabled = leftovers_enabled;
  return plan;
}

std::string RenderRewrittenPlan(const RewrittenPlan& plan) {
  std::string u = RenderPlan(*plan.per_user_stage);
  std::string out = "per-user stage:\n";
  std::size_t start = 0;
  while (start < u.size()) {
    std::size_t end = u.find('\n', start);
    out += "  " + u.substr(start, end - start) + "\n";
    start = end + 1;
  }
  out += "cross-user stage:\n";
  out += "  " + RenderPlan(*plan.cross_user_stage);
  char tau[40];
  char scale[40];
  char share[40];
  out += "  threshold: noisy user count >= ";
  out += FormatDouble(tau, sizeof(tau), plan.tau);
  out += " (laplace scale ";
  out += FormatDouble(scale, sizeof(scale),
                      static_cast<double>(plan.budget.max_contribution) /
                          plan.shares.threshold_epsilon);
  out += ")\n";
  out += "  budget: per-aggregate share ";
  out += FormatDouble(share, sizeof(share), plan.shares.per_aggregate_epsilon);
  out += ", threshold share ";
  out += FormatDouble(share, sizeof(share), plan.shares.threshold_epsilon);
  out += "\n";
  return out;
}

ResultTable ExecuteAnonymized(const RewrittenPlan& plan,
                              const Catalog& catalog, RandomSource& rng,
                              const ExecOptions& options) {
  ExecDiagnostics diag;
  RandomSource stage_rng = rng.Substream("per-user-stage");
  Relation u =
      EvalPlan(*plan.per_user_stage, catalog, stage_rng, &diag);

  const std::size_t ui = *u.schema.uid_index;
  const std::int64_t cu = plan.budget.max_contribution;
  const auto& cross = *plan.cross_user_stage;

  // Contribution-bound invariants; violations mean the per-user stage is
  // broken, not that the input is bad.
  {
    std::map<Value, std::int64_t, ValueLess> per_user;
    std::set<std::vector<Value>, ValueLess> per_user_group;
    for (const auto& row : u.rows) {
      if (++per_user[row[ui]] > cu) {
        throw InternalError(
            "per-user stage emitted more rows for one user than the "
            "contribution bound allows");
      }
      std::vector<Value> key;
      key.push_back(row[ui]);
      for (const auto& k : cross.group_keys) {
        key.push_back(row[static_cast<std::size_t>(k->column_index)]);
      }
      if (!per_user_group.insert(std::move(key)).second) {
        throw InternalError(
            "per-user stage emitted two rows for the same user and group");
      }
    }
  }

  std::map<std::vector<Value>, GroupData, ValueLess> groups;
  for (const auto& row : u.rows) {
    std::vector<Value> key;
    key.reserve(cross.group_keys.size());
    for (const auto& k : cross.group_keys) {
      key.push_back(row[static_cast<std::size_t>(k->column_index)]);
    }
    groups[std::move(key)].rows.push_back(&row);
  }

  ResultTable result;
  result.key_names = cross.key_names;
  for (const auto& call : cross.anon_aggregates) {
    result.value_names.push_back(call.output_name);
  }
  const double tau = options.tau_override.value_or(plan.tau);
  result.tau = tau;
  result.epsilon = plan.budget.epsilon;
  result.delta = plan.budget.delta;
  result.max_contribution = cu;

  const double threshold_scale =
      static_cast<double>(cu) / plan.shares.threshold_epsilon;
  std::vector<const Row*> leftover_rows;

  for (const auto& [key, data] : groups) {
    std::string label = GroupLabel(key);
    double noisy_users = static_cast<double>(data.rows.size());
    if (options.noise_enabled) {
      RandomSource t_rng = rng.Substream("threshold:g:" + label);
      noisy_users += SampleLaplace(threshold_scale, t_rng);
    }
    bool released = noisy_users >= tau;
    if (released) {
      ReleaseOutcome outcome = ReleaseGroup(plan, data.rows, "g:", label, rng,
                                            options, &diag);
      released = outcome.ok;
      if (outcome.ok) {
        result.rows.push_back(ResultRow{key, std::move(outcome.values), false});
      }
    }
    if (!released) {
      ++result.suppressed_partitions;
      if (plan.leftovers_enabled) {
        leftover_rows.insert(leftover_rows.end(), data.rows.begin(),
                             data.rows.end());
      }
    }
  }

  if (plan.leftovers_enabled && !leftover_rows.empty()) {
    // Merged bucket of every suppressed group, thresholded on its distinct
    // user count with fresh noise. Keys are null in the released row.
    std::set<Value, ValueLess> users;
    for (const Row* row : leftover_rows) {
      users.insert((*row)[ui]);
    }
    double noisy_users = static_cast<double>(users.size());
    if (options.noise_enabled) {
      RandomSource t_rng = rng.Substream("threshold:leftovers");
      noisy_users += SampleLaplace(threshold_scale, t_rng);
    }
    if (noisy_users >= tau) {
      ReleaseOutcome outcome = ReleaseGroup(plan, leftover_rows, "leftovers",
                                            "", rng, options, &diag);
      if (outcome.ok) {
        ResultRow row;
        row.keys.assign(cross.key_names.size(), Value{});
        row.values = std::move(outcome.values);
        row.is_leftover = true;
        result.rows.push_back(std::move(row));
      }
    }
  }

  result.row_eval_errors = diag.row_eval_errors;
  return result;
}

}  // namespace dpquery
