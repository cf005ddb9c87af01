#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dpquery/aggregates.hpp"
#include "dpquery/plan.hpp"

namespace dpquery {

// Noisy-count release threshold tau for user-level (epsilon, delta)-DP:
// tau = 1 - (cu/eps) * ln(2 - 2*(1-delta)^(1/cu)). A group whose noisy
// unique-user count clears tau may be released; calibration makes the
// chance that a lone user's groups ever clear it exactly delta.
double ComputeTau(double eps_threshold, double delta,
                  std::int64_t max_contribution);

// Uniform budget split: each of the N aggregates and the threshold count
// gets epsilon / (cu * (N+1)).
struct BudgetSplit {
  double per_aggregate_epsilon = 0.0;
  double threshold_epsilon = 0.0;
  int num_aggregates = 0;
};

BudgetSplit SplitBudget(const PrivacyBudget& budget, int num_aggregates);

// Probability that a single-user group passes one noisy threshold test,
// with count noise Laplace(cu/eps). Requires tau >= 1.
double ReleaseProbability(double tau, double eps_threshold,
                          std::int64_t max_contribution);

// An anonymized aggregation split into the two executable halves: the
// per-user stage bounds each user's influence (one row per (uid, group),
// at most cu groups per user), the cross-user stage adds calibrated noise
// per group and applies the tau threshold.
struct RewrittenPlan {
  PlanPtr per_user_stage;
  // Childless kAnonAggregate node bound to per_user_stage's output:
  // group keys and aggregate inputs are column references into it.
  // Bounded ANON_COUNT arrives here as a sum over the per-user counts.
  PlanPtr cross_user_stage;
  double tau = 0.0;
  BudgetSplit shares;
  PrivacyBudget budget{1.0, 0.0, 1};
  bool leftovers_enabled = false;
};

// Expands a kAnonAggregate plan root. Throws OwnershipError when the
// subquery breaks the ownership rules, PrivacyParameterError when the
// budget cannot support thresholded release (delta = 0).
RewrittenPlan RewriteAnonymized(PlanPtr anon_root, const PrivacyBudget& budget,
                                bool leftovers_enabled = false);

std::string RenderRewrittenPlan(const RewrittenPlan& plan);

struct ExecOptions {
  bool noise_enabled = true;
  // Test hook: replaces the calibrated tau, making suppression exact when
  // noise is disabled.
  std::optional<double> tau_override;
  double ci_level = 0.95;
};

struct ResultRow {
  std::vector<Value> keys;  // all null on the merged leftovers row
  std::vector<NoisyResult> values;
  bool is_leftover = false;
};

struct ResultTable {
  std::vector<std::string> key_names;
  std::vector<std::string> value_names;
  std::vector<ResultRow> rows;
  std::int64_t suppressed_partitions = 0;
  double tau = 0.0;
  double epsilon = 0.0;
  double delta = 0.0;
  std::int64_t max_contribution = 1;
  std::int64_t row_eval_errors = 0;
};

// Runs both stages. Deterministic per (plan, catalog, seed): every group
// draws from a substream labeled by its key values, so one group's noise
// never depends on which other groups exist. Groups are released in key
// order; a released leftovers row, when enabled, comes last.
ResultTable ExecuteAnonymized(const RewrittenPlan& plan,
                              const Catalog& catalog, RandomSource& rng,
                              const ExecOptions& options = {});

}  // namespace dpquery
