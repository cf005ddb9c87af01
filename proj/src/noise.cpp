#include "dpquery/noise.hpp"

#include <cmath>
#include <string>

#include "dpquery/errors.hpp"

namespace dpquery {

ClampBounds::ClampBounds(double lower_in, double upper_in)
    : lower(lower_in), upper(upper_in) {
  if (!std::isfinite(lower) || !std::isfinite(upper)) {
    throw PrivacyParameterError("clamp bounds must be finite");
  }
  if (lower > upper) {
    throw PrivacyParameterError("clamp lower bound exceeds upper bound");
  }
}

PrivacyBudget::PrivacyBudget(double epsilon_in, double delta_in,
                             std::int64_t max_contribution_in)
    : epsilon(epsilon_in),
      delta(delta_in),
      max_contribution(max_contribution_in) {
  if (!std::isfinite(epsilon) || epsilon <= 0) {
    throw PrivacyParameterError("epsilon must be positive and finite");
  }
  if (!(delta >= 0 && delta < 1)) {
    throw PrivacyParameterError("delta must lie in [0, 1)");
  }
  if (max_contribution < 1) {
    throw PrivacyParameterError("per-user contribution bound must be >= 1");
  }
}

double Clamp(double x, const ClampBounds& bounds) {
  if (std::isnan(x)) return bounds.lower;
  if (x > bounds.upper) return bounds.upper;
  if (x < bounds.lower) return bounds.lower;
  return x;
}

double SnapGranularity(double scale) {
  if (!(scale > 0) || !std::isfinite(scale)) {
    throw PrivacyParameterError("noise scale must be positive and finite");
  }
  // frexp yields scale = m * 2^e with m in [0.5, 1). 2^e is strictly greater
  // than scale except when m == 0.5 (scale an exact power of two), where 2^e
  // equals 2 * scale, which is the strictly-greater power required.
  int e = 0;
  std::frexp(scale, &e);
  return std::ldexp(1.0, e);
}

double SampleLaplace(double scale, RandomSource& rng) {
  return LaplaceQuantile(scale, rng.NextUniform());
}

double SampleSnappedLaplace(double center, double scale, RandomSource& rng) {
  const double granularity = SnapGranularity(scale);
  const double noisy = center + SampleLaplace(scale, rng);
  return std::round(noisy / granularity) * granularity;
}

double LaplaceQuantile(double scale, double p) {
  if (!(scale > 0) || !std::isfinite(scale)) {
    throw PrivacyParameterError("noise scale must be positive and finite");
  }
  if (!(p > 0 && p < 1)) {
    throw PrivacyParameterError("quantile probability must lie in (0, 1)");
  }
  // Evaluated through u = p - 1/2 so the two tails share one magnitude
  // computation: quantile(p) and quantile(1-p) are bitwise negations when
  // both u values are exact.
  const double u = p - 0.5;
  if (u == 0.0) return 0.0;
  const double magnitude = -scale * std::log1p(-2.0 * std::fabs(u));
  return u < 0 ? -magnitude : magnitude;
}

const char* ErrorCategoryName(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kParse:
      return "parse";
    case ErrorCategory::kOwnership:
      return "ownership";
    case ErrorCategory::kPrivacyParameter:
      return "privacy-parameter";
    case ErrorCategory::kIo:
      return "io";
    case ErrorCategory::kUsage:
      return "usage";
    case ErrorCategory::kInternal:
      return "internal";
  }
  return "unknown";
}

}  // namespace dpquery
