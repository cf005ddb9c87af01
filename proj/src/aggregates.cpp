#include "dpquery/aggregates.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dpquery/errors.hpp"

namespace dpquery {
namespace {

// Range of x^2 when x ranges over [b.lower, b.upper].
ClampBounds SquareBounds(const ClampBounds& b) {
  const double l2 = b.lower * b.lower;
  const double u2 = b.upper * b.upper;
  const double hi = std::max(l2, u2);
  const double lo = (b.lower <= 0 && b.upper >= 0) ? 0.0 : std::min(l2, u2);
  return ClampBounds(lo, hi);
}

}  // namespace

const char* AggregateKindName(AggregateKind kind) {
  switch (kind) {
    case AggregateKind::kCount:
      return "count";
    case AggregateKind::kSum:
      return "sum";
    case AggregateKind::kAvg:
      return "avg";
    case AggregateKind::kVar:
      return "var";
    case AggregateKind::kStddev:
      return "stddev";
    case AggregateKind::kNtile:
      return "ntile";
  }
  return "unknown";
}

void AggregatorSpec::Validate() const {
  if (kind == AggregateKind::kCount) {
    if (bounds.has_value()) {
      throw PrivacyParameterError(
          "COUNT takes no clamp bounds; bounded counts aggregate per-user "
          "partial counts as SUM");
    }
    return;
  }
  if (!bounds.has_value()) {
    throw PrivacyParameterError(std::string(AggregateKindName(kind)) +
                                " requires clamp bounds");
  }
  if (kind == AggregateKind::kNtile && !(ntile_rank > 0 && ntile_rank < 1)) {
    throw PrivacyParameterError("ntile rank must lie in (0, 1)");
  }
}

double SensitivityBound(const AggregatorSpec& spec) {
  spec.Validate();
  switch (spec.kind) {
    case AggregateKind::kCount:
      return 1.0;
    case AggregateKind::kSum:
      return std::max(std::fabs(spec.bounds->lower),
                      std::fabs(spec.bounds->upper));
    case AggregateKind::kAvg:
      return spec.bounds->Width();
    case AggregateKind::kVar:
      return spec.bounds->Width() * spec.bounds->Width();
    case AggregateKind::kStddev:
      return spec.bounds->Width();
    case AggregateKind::kNtile:
      return spec.bounds->Width();
  }
  throw InternalError("unhandled aggregate kind");
}

double NoiseConfidenceHalfWidth(const AggregatorSpec& spec, double eps_share,
                                double level) {
  if (!(eps_share > 0) || !std::isfinite(eps_share)) {
    throw PrivacyParameterError("epsilon share must be positive and finite");
  }
  if (!(level > 0 && level < 1)) {
    throw PrivacyParameterError("confidence level must lie in (0, 1)");
  }
  const double sensitivity = SensitivityBound(spec);
  if (sensitivity == 0) return 0.0;
  return LaplaceQuantile(sensitivity / eps_share, 0.5 + level / 2);
}

Aggregator::Aggregator(AggregatorSpec spec) : spec_(std::move(spec)) {
  spec_.Validate();
}

void Aggregator::Accumulate(double x) {
  ++count_;
  if (spec_.kind == AggregateKind::kCount) return;
  const double clamped = Clamp(x, *spec_.bounds);
  sum_ += clamped;
  sum_squares_ += clamped * clamped;
  if (spec_.kind == AggregateKind::kNtile) values_.push_back(clamped);
}

void Aggregator::Merge(const Aggregator& other) {
  if (!(spec_ == other.spec_)) {
    throw InternalError("merging aggregator states with different specs");
  }
  count_ += other.count_;
  sum_ += other.sum_;
  sum_squares_ += other.sum_squares_;
  values_.insert(values_.end(), other.values_.begin(), other.values_.end());
}

double Aggregator::NoisyAverage(double center, double normalized_sum,
                                double width, double eps_share,
                                RandomSource& rng) const {
  // Half the share noises the centered sum (per-row sensitivity width/2),
  // the other half noises the count (sensitivity 1), so the quotient stands
  // alone as an eps_share release. Draw order (sum first, count second) is
  // part of the deterministic seeding contract.
  if (width == 0) return center;
  const double noisy_sum = normalized_sum + SampleLaplace(width / eps_share, rng);
  const double noisy_count =
      static_cast<double>(count_) + SampleLaplace(2.0 / eps_share, rng);
  return center + noisy_sum / std::max(1.0, noisy_count);
}

namespace {
double ClipTo(double x, double lo, double hi) {
  return std::min(std::max(x, lo), hi);
}
}  // namespace

NoisyResult Aggregator::Release(double eps_share, double ci_level,
                                RandomSource& rng) const {
  const double value = ReleaseValue(eps_share, rng);
  const double half = NoiseConfidenceHalfWidth(spec_, eps_share, ci_level);
  return NoisyResult{value, value - half, value + half, eps_share};
}

double Aggregator::ReleaseValue(double eps_share, RandomSource& rng) const {
  if (count_ < 1) {
    throw InternalError("release over an empty input set");
  }
  if (!(eps_share > 0) || !std::isfinite(eps_share)) {
    throw PrivacyParameterError("epsilon share must be positive and finite");
  }

  double value = 0;
  switch (spec_.kind) {
    case AggregateKind::kCount:
      value = SampleSnappedLaplace(static_cast<double>(count_),
                                   1.0 / eps_share, rng);
      break;
    case AggregateKind::kSum: {
      const double sensitivity = SensitivityBound(spec_);
      value = sensitivity > 0
                  ? SampleSnappedLaplace(sum_, sensitivity / eps_share, rng)
                  : sum_;
      break;
    }
    case AggregateKind::kAvg: {
      const ClampBounds& b = *spec_.bounds;
      const double center = 0.5 * (b.lower + b.upper);
      value = NoisyAverage(center, sum_ - static_cast<double>(count_) * center,
                           b.Width(), eps_share, rng);
      break;
    }
    case AggregateKind::kVar:
    case AggregateKind::kStddev: {
      const ClampBounds& b = *spec_.bounds;
      const double width = b.Width();
      double variance = 0;
      if (width > 0) {
        // Mean of squares and mean each take half the share; the difference
        // is clipped back into the feasible range of a variance.
        const ClampBounds sq = SquareBounds(b);
        const double sq_center = 0.5 * (sq.lower + sq.upper);
        const double mean_sq = NoisyAverage(
            sq_center, sum_squares_ - static_cast<double>(count_) * sq_center,
            sq.Width(), eps_share / 2, rng);
        const double center = 0.5 * (b.lower + b.upper);
        const double mean = NoisyAverage(
            center, sum_ - static_cast<double>(count_) * center, width,
            eps_share / 2, rng);
        variance = ClipTo(mean_sq - mean * mean, 0.0, width * width);
      }
      value = spec_.kind == AggregateKind::kVar ? variance
                                                : std::sqrt(variance);
      break;
    }
    case AggregateKind::kNtile:
      value = BisectRank(eps_share, &rng);
      break;
  }
  return value;
}

double Aggregator::BisectRank(double eps_share, RandomSource* rng) const {
  const ClampBounds& b = *spec_.bounds;
  const double width = b.Width();
  if (width == 0) return b.lower;

  // Fixed resolution of width * 2^-20 keeps the iteration count, and with it
  // the per-iteration budget slice, data-independent.
  const double resolution = std::ldexp(width, -20);
  const int iterations = std::min(
      64, static_cast<int>(std::ceil(std::log2(width / resolution))));
  const double scale = static_cast<double>(iterations) / eps_share;

  double lo = b.lower;
  double hi = b.upper;
  const double target = spec_.ntile_rank * static_cast<double>(count_);
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    std::int64_t below = 0;
    for (double v : values_) below += v < mid ? 1 : 0;
    const double stat =
        static_cast<double>(below) +
        (rng != nullptr ? SampleLaplace(scale, *rng) : 0.0);
    if (stat < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double Aggregator::UnnoisedValue() const {
  if (count_ < 1) {
    throw InternalError("un-noised value over an empty input set");
  }
  const double n = static_cast<double>(count_);
  switch (spec_.kind) {
    case AggregateKind::kCount:
      return n;
    case AggregateKind::kSum:
      return sum_;
    case AggregateKind::kAvg:
      return sum_ / n;
    case AggregateKind::kVar:
    case AggregateKind::kStddev: {
      const double width = spec_.bounds->Width();
      const double mean = sum_ / n;
      const double variance =
          ClipTo(sum_squares_ / n - mean * mean, 0.0, width * width);
      return spec_.kind == AggregateKind::kVar ? variance
                                               : std::sqrt(variance);
    }
    case AggregateKind::kNtile:
      return BisectRank(1.0, nullptr);
  }
  throw InternalError("unhandled aggregate kind");
}

void ApproxBoundsConfig::Validate() const {
  if (num_bins < 2 || num_bins > 1020) {
    throw PrivacyParameterError("bounds histogram needs 2..1020 bins per regime");
  }
  if (!(success_probability > 0 && success_probability < 1)) {
    throw PrivacyParameterError("bounds success probability must lie in (0, 1)");
  }
}

double BoundsFailureThreshold(double eps_share, const ApproxBoundsConfig& cfg) {
  cfg.Validate();
  if (!(eps_share > 0) || !std::isfinite(eps_share)) {
    throw PrivacyParameterError("epsilon share must be positive and finite");
  }
  const double root =
      std::pow(cfg.success_probability, 1.0 / (cfg.num_bins - 1));
  return -std::log(1.0 - root) / eps_share;
}

ClampBounds InferBounds(const std::vector<double>& values,
                        const ApproxBoundsConfig& cfg, double eps_share,
                        RandomSource* rng) {
  cfg.Validate();
  if (values.empty()) {
    throw PrivacyParameterError("bounds inference over an empty input set");
  }

  // Bin ladder, least to most significant by value:
  //   [0, 2B)    negative magnitudes, exponent e = B-1-i, edges (-2^(e+1), -2^e]
  //   2B         near-zero bin, edges [-2^-B, 2^-B)
  //   (2B, 4B]   positive magnitudes, exponent e = i-3B-1, edges [2^e, 2^(e+1))
  const int b = cfg.num_bins;
  const int total = 4 * b + 1;
  const int zero_bin = 2 * b;
  std::vector<std::int64_t> counts(static_cast<size_t>(total), 0);

  auto bin_of = [&](double x) -> int {
    const double magnitude = std::fabs(x);
    if (std::isnan(x) || magnitude < std::ldexp(1.0, -b)) return zero_bin;
    int e = std::ilogb(magnitude);
    e = std::min(e, b - 1);  // clamps overflow and +/-inf into the edge bins
    return x > 0 ? zero_bin + 1 + (e + b) : (b - 1 - e);
  };
  for (double v : values) ++counts[static_cast<size_t>(bin_of(v))];

  const double t = BoundsFailureThreshold(eps_share, cfg);
  int first = -1;
  int last = -1;
  for (int i = 0; i < total; ++i) {
    double noisy = static_cast<double>(counts[static_cast<size_t>(i)]);
    if (rng != nullptr) {
      noisy += SampleLaplace(1.0 / eps_share, *rng);
    }
    if (noisy > t) {
      if (first < 0) first = i;
      last = i;
    }
  }
  if (first < 0) {
    throw BoundsInferenceError(
        "no histogram bin cleared the bounds-inference threshold; supply "
        "explicit clamp bounds or lower the success probability");
  }

  auto lower_edge = [&](int i) -> double {
    if (i < zero_bin) return -std::ldexp(1.0, (b - 1 - i) + 1);
    if (i == zero_bin) return -std::ldexp(1.0, -b);
    return std::ldexp(1.0, i - 2 * b - 1 - b);
  };
  auto upper_edge = [&](int i) -> double {
    if (i < zero_bin) return -std::ldexp(1.0, b - 1 - i);
    if (i == zero_bin) return std::ldexp(1.0, -b);
    return std::ldexp(1.0, (i - 2 * b - 1 - b) + 1);
  };
  return ClampBounds(lower_edge(first), upper_edge(last));
}

}  // namespace dpquery
