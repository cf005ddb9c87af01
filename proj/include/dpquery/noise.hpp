#pragma once

#include <cstdint>

#include "dpquery/random_source.hpp"

namespace dpquery {

// Inclusive clamp range for aggregate inputs. Both ends must be finite and
// ordered; construction throws PrivacyParameterError otherwise.
struct ClampBounds {
  ClampBounds(double lower_in, double upper_in);

  double Width() const { return upper - lower; }

  bool operator==(const ClampBounds& other) const = default;

  double lower;
  double upper;
};

// Query-level privacy parameters. epsilon must be positive and finite,
// delta in [0, 1), max_contribution (per-user partition bound) >= 1.
struct PrivacyBudget {
  PrivacyBudget(double epsilon_in, double delta_in,
                std::int64_t max_contribution_in);

  double epsilon;
  double delta;
  std::int64_t max_contribution;
};

// Total clamp: every double, including NaN and infinities, maps into
// [bounds.lower, bounds.upper]. NaN and -inf go to the lower bound, +inf to
// the upper, so a hostile expression cannot smuggle an unbounded or poisoned
// value into an aggregate.
double Clamp(double x, const ClampBounds& bounds);

// Smallest power of two strictly greater than scale. pre: scale > 0, finite.
double SnapGranularity(double scale);

// Zero-centered Laplace draw with the given scale (inverse-CDF sampling).
// pre: scale > 0, finite.
double SampleLaplace(double scale, RandomSource& rng);

// center + Laplace(scale), rounded to the nearest multiple of
// SnapGranularity(scale). When center sits on that grid the released value is
// exactly k * granularity for integer k, which closes the floating-point
// low-order-bit side channel of textbook Laplace releases.
double SampleSnappedLaplace(double center, double scale, RandomSource& rng);

// Inverse CDF of the zero-centered Laplace distribution.
// pre: scale > 0, 0 < p < 1. Exactly antisymmetric around p = 0.5 whenever
// 1 - p is exactly representable; the median is exactly 0.
double LaplaceQuantile(double scale, double p);

}  // namespace dpquery
