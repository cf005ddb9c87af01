#pragma once

#include <cstdint>
#include <optional>

namespace dpquery {

// Closed-form accuracy predictions for a single released aggregate, the
// numbers an analyst wants before spending any budget: how big the noise
// is, how likely a small partition is to be suppressed, and how much a
// clamp range cuts off.

struct AccuracyParams {
  double epsilon = 1.0;
  double delta = 1e-9;
  std::int64_t max_contribution = 1;
  // Worst-case change of the un-noised aggregate when one user's data is
  // added or removed.
  double sensitivity = 1.0;
  // Exact result the noisy release approximates; enables the relative
  // error line. Must be nonzero when present.
  std::optional<double> true_value;
  // Clamping model: inputs uniform on [a, b] against clamp upper bound u.
  // All three present or all absent.
  std::optional<double> uniform_a;
  std::optional<double> uniform_b;
  std::optional<double> clamp_upper;
};

struct AccuracyReport {
  // Median |noise| of a Laplace release spending the whole budget on this
  // one aggregate: ln(2) * sensitivity / epsilon.
  double median_noise = 0;
  std::optional<double> median_relative_error;  // median_noise / |true value|

  // Threshold behavior of a one-aggregate anonymized query, where the
  // noisy-user-count test gets epsilon / (2 Cu).
  double tau = 0;
  double release_probability = 0;   // one single-user partition surviving
  double suppression_single = 0;    // 1 - release_probability
  double suppression_any = 0;       // 1 - release_probability^Cu: at least
                                    // one of a lone user's Cu partitions
                                    // suppressed
  double suppression_asymptote = 0; // (1 - delta)^(1/Cu), the single-
                                    // partition suppression floor the
                                    // calibration approaches

  // Expected mass a clamp at u removes from one uniform [a, b] input:
  // 0 when u >= b, else (b - u)^2 / (2 (b - a)).
  std::optional<double> clamp_error;
};

// Evaluates the closed forms. Throws PrivacyParameterError on domain
// violations (delta outside (0, 1), non-positive sensitivity, zero true
// value, a partial clamp triple, or a clamp model with b <= a or u < a).
AccuracyReport ComputeAccuracy(const AccuracyParams& params);

}  // namespace dpquery
