#include "dpquery/noise.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "dpquery/errors.hpp"
#include "dpquery/random_source.hpp"

namespace dpquery {
namespace {

// Analytic CDF of the zero-centered Laplace distribution; the independent
// oracle for the sampling and quantile tests below.
double LaplaceCdf(double x, double scale) {
  if (x < 0) return 0.5 * std::exp(x / scale);
  return 1.0 - 0.5 * std::exp(-x / scale);
}

// Oracle quantile: bisect the analytic CDF instead of trusting any closed
// form shared with the implementation.
double BisectQuantile(double scale, double p) {
  double lo = -1e9 * scale, hi = 1e9 * scale;
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    (LaplaceCdf(mid, scale) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

double MedianAbs(std::vector<double> xs) {
  for (double& x : xs) x = std::fabs(x);
  std::nth_element(xs.begin(), xs.begin() + xs.size() / 2, xs.end());
  return xs[xs.size() / 2];
}

TEST_CASE("laplace samples match the analytic distribution") {
  constexpr int kDraws = 100000;
  RandomSource rng(20240817);
  std::vector<double> xs;
  xs.reserve(kDraws);
  double sum = 0;
  for (int i = 0; i < kDraws; ++i) {
    double x = SampleLaplace(1.0, rng);
    xs.push_back(x);
    sum += x;
  }

  // Median of |X| for Laplace(b) is b*ln2 = 0.6931..., mean is 0.
  CHECK(MedianAbs(xs) == doctest::Approx(0.6931471805599453).epsilon(0.02));
  CHECK(std::fabs(sum / kDraws) < 0.02);

  // Kolmogorov-Smirnov distance against the analytic CDF.
  std::sort(xs.begin(), xs.end());
  double ks = 0;
  for (int i = 0; i < kDraws; ++i) {
    double f = LaplaceCdf(xs[i], 1.0);
    ks = std::max(ks, std::fabs(f - static_cast<double>(i) / kDraws));
    ks = std::max(ks, std::fabs(static_cast<double>(i + 1) / kDraws - f));
  }
  CHECK(ks < 0.01);
}

TEST_CASE("laplace sampling rejects non-positive scale") {
  RandomSource rng(1);
  CHECK_THROWS_AS(SampleLaplace(0.0, rng), PrivacyParameterError);
  CHECK_THROWS_AS(SampleLaplace(-1.0, rng), PrivacyParameterError);
}

TEST_CASE("snap granularity is the smallest power of two above the scale") {
  CHECK(SnapGranularity(1.0) == 2.0);
  CHECK(SnapGranularity(10.0) == 16.0);
  CHECK(SnapGranularity(0.75) == 1.0);
  CHECK(SnapGranularity(16.0) == 32.0);
  CHECK(SnapGranularity(5e-6) == 7.62939453125e-06);  // 2^-17
  for (double scale : {0.013, 0.4, 1.0, 3.7, 123.0, 9999.5}) {
    double r = SnapGranularity(scale);
    CHECK(r > scale);
    CHECK(r / 2 <= scale);
    int e = 0;
    CHECK(std::frexp(r, &e) == 0.5);  // exact power of two
  }
}

TEST_CASE("snapped laplace lands on the granularity grid") {
  for (std::uint64_t seed : {0ULL, 7ULL, 991ULL}) {
    RandomSource rng(seed);
    for (double scale : {1.0, 10.0, 0.3}) {
      const double r = SnapGranularity(scale);
      // Grid-aligned centers: output - center must be an integer multiple
      // of r for every draw.
      for (double center : {0.0, 4 * r, -1024 * r}) {
        for (int i = 0; i < 200; ++i) {
          double out = SampleSnappedLaplace(center, scale, rng);
          double steps = (out - center) / r;
          CHECK(steps == std::round(steps));
        }
      }
    }
  }
}

TEST_CASE("snapped laplace stays near the center at tiny scale") {
  // scale 5e-6 gives granularity 2^-17; sums released this way keep ~4
  // decimal digits.
  RandomSource rng(5);
  for (int i = 0; i < 1000; ++i) {
    CHECK(std::fabs(SampleSnappedLaplace(6.0, 5e-6, rng) - 6.0) < 0.01);
  }
}

TEST_CASE("laplace quantile matches a CDF-bisection oracle") {
  CHECK(LaplaceQuantile(3730.0, 0.75) ==
        doctest::Approx(2585.438983488596).epsilon(1e-12));
  for (double scale : {0.1, 1.0, 3730.0}) {
    for (double p : {0.001, 0.2, 0.4, 0.5, 0.6, 0.9, 0.999}) {
      CHECK(LaplaceQuantile(scale, p) ==
            doctest::Approx(BisectQuantile(scale, p)).epsilon(1e-9));
    }
  }
}

TEST_CASE("laplace quantile antisymmetry is exact on dyadic probabilities") {
  // p = k/256 makes 1 - p exactly representable, so the contract's exact
  // antisymmetry applies.
  for (int k = 1; k < 256; ++k) {
    double p = k / 256.0;
    CHECK(LaplaceQuantile(1.7, p) == -LaplaceQuantile(1.7, 1.0 - p));
  }
  CHECK(LaplaceQuantile(123.0, 0.5) == 0.0);
}

TEST_CASE("clamp is total, idempotent, and monotone") {
  const ClampBounds bounds(-1.5, 2.0);
  CHECK(Clamp(std::nan(""), bounds) == -1.5);
  CHECK(Clamp(HUGE_VAL, bounds) == 2.0);
  CHECK(Clamp(-HUGE_VAL, bounds) == -1.5);
  CHECK(Clamp(0.25, bounds) == 0.25);
  CHECK(Clamp(-7.0, bounds) == -1.5);
  CHECK(Clamp(3.0, bounds) == 2.0);

  RandomSource rng(99);
  double prev_x = -8.0, prev_c = Clamp(prev_x, bounds);
  for (int i = 0; i < 2000; ++i) {
    double x = (rng.NextUniform() - 0.5) * 16.0;
    double c = Clamp(x, bounds);
    CHECK(c >= bounds.lower);
    CHECK(c <= bounds.upper);
    CHECK(Clamp(c, bounds) == c);  // idempotent
    if (x >= prev_x) CHECK(c >= prev_c);
    if (x <= prev_x) CHECK(c <= prev_c);
    prev_x = x;
    prev_c = c;
  }
}

TEST_CASE("parameter structs validate on construction") {
  CHECK_THROWS_AS(ClampBounds(2.0, 1.0), PrivacyParameterError);
  CHECK_THROWS_AS(ClampBounds(0.0, HUGE_VAL), PrivacyParameterError);
  CHECK_NOTHROW(ClampBounds(1.0, 1.0));

  CHECK_THROWS_AS(PrivacyBudget(0.0, 0.1, 1), PrivacyParameterError);
  CHECK_THROWS_AS(PrivacyBudget(-1.0, 0.1, 1), PrivacyParameterError);
  CHECK_THROWS_AS(PrivacyBudget(1.0, 1.0, 1), PrivacyParameterError);
  CHECK_THROWS_AS(PrivacyBudget(1.0, -0.1, 1), PrivacyParameterError);
  CHECK_THROWS_AS(PrivacyBudget(1.0, 0.1, 0), PrivacyParameterError);
  CHECK_NOTHROW(PrivacyBudget(1.0, 0.0, 1));
}

TEST_CASE("random source substreams are reproducible and label-dependent") {
  RandomSource a(42);
  RandomSource b(42);
  for (int i = 0; i < 64; ++i) CHECK(a.NextUint64() == b.NextUint64());

  // Substream derivation ignores the parent's draw position.
  RandomSource parent1(7);
  RandomSource parent2(7);
  parent2.NextUint64();
  parent2.NextUniform();
  RandomSource c1 = parent1.Substream("group:alpha");
  RandomSource c2 = parent2.Substream("group:alpha");
  for (int i = 0; i < 64; ++i) CHECK(c1.NextUint64() == c2.NextUint64());

  RandomSource d1 = parent1.Substream("group:alpha");
  RandomSource d2 = parent1.Substream("group:beta");
  bool differs = false;
  for (int i = 0; i < 64; ++i) {
    differs |= d1.NextUint64() != d2.NextUint64();
  }
  CHECK(differs);
}

TEST_CASE("uniform draws stay inside the open unit interval") {
  RandomSource rng(17);
  for (int i = 0; i < 100000; ++i) {
    double u = rng.NextUniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
  for (std::uint64_t bound : {1ULL, 2ULL, 3ULL, 97ULL}) {
    for (int i = 0; i < 1000; ++i) {
      CHECK(rng.NextUint64Below(bound) < bound);
    }
  }
}

}  // namespace
}  // namespace dpquery
