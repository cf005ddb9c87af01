#include "dpquery/accuracy.hpp"

#include <cmath>

#include "dpquery/anon.hpp"
#include "dpquery/errors.hpp"
#include "dpquery/noise.hpp"

namespace dpquery {

AccuracyReport ComputeAccuracy(const AccuracyParams& params) {
  PrivacyBudget budget(params.epsilon, params.delta, params.max_contribution);
  if (!(params.delta > 0)) {
    throw PrivacyParameterError(
        "accuracy report needs delta > 0; thresholded release is impossible "
        "at delta = 0");
  }
  if (!(params.sensitivity > 0) || !std::isfinite(params.sensitivity)) {
    throw PrivacyParameterError("sensitivity must be positive and finite");
  }

  AccuracyReport report;
  report.median_noise =
      std::log(2.0) * params.sensitivity / params.epsilon;
  if (params.true_value.has_value()) {
    if (*params.true_value == 0) {
      throw PrivacyParameterError(
          "true value must be nonzero for a relative error");
    }
    report.median_relative_error =
        report.median_noise / std::abs(*params.true_value);
  }

  BudgetSplit shares = SplitBudget(budget, 1);
  report.tau = ComputeTau(shares.threshold_epsilon, budget.delta,
                          budget.max_contribution);
  report.release_probability = ReleaseProbability(
      report.tau, shares.threshold_epsilon, budget.max_contribution);
  report.suppression_single = 1 - report.release_probability;
  report.suppression_any =
      1 - std::pow(report.release_probability,
                   static_cast<double>(budget.max_contribution));
  report.suppression_asymptote =
      std::pow(1 - budget.delta,
               1.0 / static_cast<double>(budget.max_contribution));

  int clamp_args = params.uniform_a.has_value() +
                   params.uniform_b.has_value() +
                   params.clamp_upper.has_value();
  if (clamp_args != 0) {
    if (clamp_args != 3) {
      throw PrivacyParameterError(
          "the clamp model needs all of uniform-a, uniform-b, clamp-upper");
    }
    double a = *params.uniform_a;
    double b = *params.uniform_b;
    double u = *params.clamp_upper;
    if (!(b > a)) {
      throw PrivacyParameterError("uniform range needs b > a");
    }
    if (u < a) {
      throw PrivacyParameterError(
          "clamp upper bound below the uniform range");
    }
    report.clamp_error = u >= b ? 0.0 : (b - u) * (b - u) / (2 * (b - a));
  }
  return report;
}

}  // namespace dpquery
