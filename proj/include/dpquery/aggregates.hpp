#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dpquery/errors.hpp"
#include "dpquery/noise.hpp"
#include "dpquery/random_source.hpp"

namespace dpquery {

// Cross-user anonymized aggregate kinds. COUNT counts contributing rows and
// carries no clamp bounds; every other kind clamps its inputs on
// accumulation. A bounded count over per-user partial counts is expressed as
// SUM by the planner, so the sensitivity of COUNT here is always exactly 1.
enum class AggregateKind { kCount, kSum, kAvg, kVar, kStddev, kNtile };

const char* AggregateKindName(AggregateKind kind);

struct AggregatorSpec {
  AggregateKind kind = AggregateKind::kCount;
  std::optional<ClampBounds> bounds;  // present iff kind != kCount
  double ntile_rank = 0.5;            // NTILE only, in (0, 1)

  // Throws PrivacyParameterError on an inconsistent spec.
  void Validate() const;

  bool operator==(const AggregatorSpec& other) const = default;
};

// Worst-case change of the un-noised aggregate when one input row is added
// or removed (inputs already clamped).
double SensitivityBound(const AggregatorSpec& spec);

struct NoisyResult {
  double value = 0;
  double ci_low = 0;
  double ci_high = 0;
  double epsilon_spent = 0;
};

// Symmetric half-width of the noise interval that contains the released
// value's noise with probability `level`. Approximate for composite
// aggregates (AVG and above), exact for the Laplace releases modulo the
// snapping grid.
double NoiseConfidenceHalfWidth(const AggregatorSpec& spec, double eps_share,
                                double level);

// Accumulates clamped inputs for one (group, aggregate) cell and releases a
// differentially private result. States for the same spec merge by
// accumulator addition.
class Aggregator {
 public:
  explicit Aggregator(AggregatorSpec spec);

  const AggregatorSpec& spec() const { return spec_; }
  std::int64_t input_count() const { return count_; }

  // NaN and infinite inputs clamp like any other value; nothing an input row
  // produces can widen the release's sensitivity.
  void Accumulate(double x);

  void Merge(const Aggregator& other);  // pre: identical spec

  // pre: input_count() >= 1. The engine's thresholding guarantees empty
  // groups never reach release.
  NoisyResult Release(double eps_share, double ci_level,
                      RandomSource& rng) const;

  // The noisy value alone: exactly the draw Release wraps with its
  // confidence interval. Distribution testers call this in a tight loop,
  // where recomputing the deterministic interval would dominate.
  double ReleaseValue(double eps_share, RandomSource& rng) const;

  // The exact aggregate of the clamped inputs; used by tests and
  // noise-disabled debug execution. pre: input_count() >= 1.
  double UnnoisedValue() const;

 private:
  double NoisyAverage(double center, double normalized_sum, double width,
                      double eps_share, RandomSource& rng) const;
  double BisectRank(double eps_share, RandomSource* rng) const;

  AggregatorSpec spec_;
  std::int64_t count_ = 0;
  double sum_ = 0;
  double sum_squares_ = 0;
  std::vector<double> values_;  // NTILE rank search only
};

// Automatic clamp-bounds inference over a base-2 logarithmic histogram.
struct ApproxBoundsConfig {
  int num_bins = 64;                        // bins per sign/regime, >= 2
  double success_probability = 1 - 1e-9;    // P in (0, 1)

  void Validate() const;
};

// Minimum noisy bin count at which a bin is trusted to contain real data:
// t = -(1/eps) * ln(1 - P^(1/(B-1))).
double BoundsFailureThreshold(double eps_share, const ApproxBoundsConfig& cfg);

// Thrown when no histogram bin clears the threshold; callers may retry with
// explicit bounds.
class BoundsInferenceError : public PrivacyParameterError {
 public:
  explicit BoundsInferenceError(const std::string& message)
      : PrivacyParameterError(message) {}
};

// Differentially private bounds estimate: each value increments one bin of a
// sign-aware power-of-two histogram, every bin count gets Laplace(1/eps)
// noise, and the returned range spans the least to the most significant bin
// whose noisy count exceeds the failure threshold. A null rng skips the bin
// noise for deterministic dry runs; the threshold still applies.
// pre: values non-empty. Throws BoundsInferenceError when nothing clears t.
ClampBounds InferBounds(const std::vector<double>& values,
                        const ApproxBoundsConfig& cfg, double eps_share,
                        RandomSource* rng);

}  // namespace dpquery
