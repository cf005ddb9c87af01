#include "dpquery/tester.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>

#include "dpquery/aggregates.hpp"
#include "dpquery/errors.hpp"

namespace dpquery {
namespace {

constexpr int kPrimes[] = {2,  3,  5,  7,  11, 13, 17, 19,
                           23, 29, 31, 37, 41, 43, 47, 53};
constexpr int kMaxDims = static_cast<int>(sizeof(kPrimes) / sizeof(kPrimes[0]));

// Acklam's rational approximation to the standard normal quantile,
// |error| < 1.2e-9 over (0, 1). More than enough precision for a z value
// feeding a Wilson interval.
double InverseNormalCdf(double p) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double kLow = 0.02425;
  if (!(p > 0 && p < 1)) {
    throw InternalError("normal quantile argument outside (0, 1)");
  }
  if (p < kLow) {
    double q = std::sqrt(-2 * std::log(p));
    return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
            c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  if (p > 1 - kLow) {
    double q = std::sqrt(-2 * std::log(1 - p));
    return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
             c[5]) /
           ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  }
  double q = p - 0.5;
  double r = q * q;
  return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r +
          a[5]) *
         q /
         (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
}

struct Interval {
  double lower;
  double upper;
};

// Wilson score interval for successes/n at the given z. Stays inside [0, 1]
// and has nonzero width even at 0 or n successes, which is what keeps the
// predicate check honest in near-empty tail buckets.
Interval WilsonInterval(std::int64_t successes, std::int64_t n, double z) {
  double p_hat = static_cast<double>(successes) / static_cast<double>(n);
  double zz = z * z;
  double denom = 1 + zz / static_cast<double>(n);
  double center = (p_hat + zz / (2.0 * static_cast<double>(n))) / denom;
  double half =
      z *
      std::sqrt(p_hat * (1 - p_hat) / static_cast<double>(n) +
                zz / (4.0 * static_cast<double>(n) * static_cast<double>(n))) /
      denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

std::string DatabaseLabel(const Database& db) {
  std::string label = "tester:db:";
  char buf[40];
  for (std::size_t i = 0; i < db.size(); ++i) {
    if (i > 0) label += ',';
    std::snprintf(buf, sizeof buf, "%.17g", db[i]);
    label += buf;
  }
  return label;
}

// True when `small` is a sub-multiset of `big`. Both sorted. Record values
// come from shared construction, so exact double equality is the right test.
bool IsSubMultiset(const Database& small, const Database& big) {
  std::size_t j = 0;
  for (std::size_t i = 0; i < small.size(); ++i) {
    while (j < big.size() && big[j] < small[i]) ++j;
    if (j >= big.size() || big[j] != small[i]) return false;
    ++j;
  }
  return true;
}

PairResult CompareHistograms(const std::vector<double>& s1,
                             const std::vector<double>& s2,
                             const TesterConfig& cfg) {
  PairResult res;
  auto [min1, max1] = std::minmax_element(s1.begin(), s1.end());
  auto [min2, max2] = std::minmax_element(s2.begin(), s2.end());
  double lo = std::min(*min1, *min2);
  double hi = std::max(*max1, *max2);
  res.lo = lo;
  res.hi = hi;

  // Degenerate range: every release identical, both histograms are a single
  // all-mass bucket and the predicate holds at any eps >= 0.
  int k = hi > lo ? cfg.buckets : 1;
  std::vector<std::int64_t> c1(k, 0);
  std::vector<std::int64_t> c2(k, 0);
  if (k == 1) {
    c1[0] = static_cast<std::int64_t>(s1.size());
    c2[0] = static_cast<std::int64_t>(s2.size());
  } else {
    double width = (hi - lo) / k;
    auto bucket_of = [&](double x) {
      int b = static_cast<int>((x - lo) / width);
      return std::clamp(b, 0, k - 1);
    };
    for (double x : s1) ++c1[bucket_of(x)];
    for (double x : s2) ++c2[bucket_of(x)];
  }

  double z = InverseNormalCdf(0.5 + cfg.ci_level / 2);
  double amp = std::exp(cfg.epsilon);
  auto check_direction = [&](const std::vector<std::int64_t>& target,
                             const std::vector<std::int64_t>& bound,
                             std::int64_t n_target, std::int64_t n_bound,
                             std::vector<int>* buckets,
                             std::vector<double>* ratios) {
    int violations = 0;
    for (int i = 0; i < k; ++i) {
      Interval t = WilsonInterval(target[i], n_target, z);
      Interval b = WilsonInterval(bound[i], n_bound, z);
      if (t.lower > amp * b.upper + cfg.delta) {
        ++violations;
        if (buckets != nullptr) {
          buckets->push_back(i);
          double p_t = static_cast<double>(target[i]) / n_target;
          double p_b = static_cast<double>(bound[i]) / n_bound;
          ratios->push_back(p_t / p_b);
        }
      }
    }
    return violations > cfg.alpha * k;
  };

  auto n1 = static_cast<std::int64_t>(s1.size());
  auto n2 = static_cast<std::int64_t>(s2.size());
  std::vector<int> fail_fwd;
  std::vector<double> ratio_fwd;
  bool fwd = check_direction(c1, c2, n1, n2, &fail_fwd, &ratio_fwd);
  if (fwd) {
    res.passed = false;
    res.swapped = false;
    res.failing_buckets = std::move(fail_fwd);
    res.measured_ratios = std::move(ratio_fwd);
  } else {
    std::vector<int> fail_rev;
    std::vector<double> ratio_rev;
    if (check_direction(c2, c1, n2, n1, &fail_rev, &ratio_rev)) {
      res.passed = false;
      res.swapped = true;
      res.failing_buckets = std::move(fail_rev);
      res.measured_ratios = std::move(ratio_rev);
    }
  }
  res.densities_d1.reserve(k);
  res.densities_d2.reserve(k);
  for (int i = 0; i < k; ++i) {
    res.densities_d1.push_back(static_cast<double>(c1[i]) / n1);
    res.densities_d2.push_back(static_cast<double>(c2[i]) / n2);
  }
  return res;
}

}  // namespace

void TesterConfig::Validate() const {
  if (num_databases < 1) {
    throw PrivacyParameterError("tester needs at least one root database");
  }
  if (db_sizes.empty()) {
    throw PrivacyParameterError("tester needs at least one database size");
  }
  for (int s : db_sizes) {
    if (s < 1 || s > kMaxDims) {
      throw PrivacyParameterError("tester database size out of range");
    }
  }
  if (samples < 1000) {
    throw PrivacyParameterError(
        "tester needs at least 1000 samples per database");
  }
  if (buckets < 2) {
    throw PrivacyParameterError("tester needs at least 2 histogram buckets");
  }
  if (!(epsilon > 0) || !std::isfinite(epsilon)) {
    throw PrivacyParameterError("tester epsilon must be positive and finite");
  }
  if (!(delta >= 0 && delta < 1)) {
    throw PrivacyParameterError("tester delta must lie in [0, 1)");
  }
  if (!(alpha >= 0 && alpha <= 1)) {
    throw PrivacyParameterError("tester alpha must lie in [0, 1]");
  }
  if (!(value_range > 0) || !std::isfinite(value_range)) {
    throw PrivacyParameterError("tester value range must be positive");
  }
  if (!(ci_level > 0 && ci_level < 1)) {
    throw PrivacyParameterError("tester ci level must lie in (0, 1)");
  }
}

double Halton(std::int64_t index, int base) {
  if (index < 1) throw InternalError("Halton index must be >= 1");
  if (base < 2) throw InternalError("Halton base must be >= 2");
  double digit_weight = 1.0;
  double result = 0.0;
  while (index > 0) {
    digit_weight /= base;
    result += digit_weight * static_cast<double>(index % base);
    index /= base;
  }
  return result;
}

std::vector<Database> GenDatabases(int dims, double value_range, int count) {
  if (dims < 1 || dims > kMaxDims) {
    throw PrivacyParameterError("tester database size out of range");
  }
  if (count < 0) throw InternalError("negative database count");
  std::vector<Database> dbs;
  dbs.reserve(count);
  for (int k = 1; k <= count; ++k) {
    Database db;
    db.reserve(dims);
    for (int j = 0; j < dims; ++j) {
      db.push_back((Halton(k, kPrimes[j]) - 0.5) * 2 * value_range);
    }
    dbs.push_back(std::move(db));
  }
  return dbs;
}

PairResult DpPredicateTest(const Primitive& f, const Database& d1,
                           const Database& d2, const TesterConfig& cfg,
                           RandomSource& rng) {
  cfg.Validate();
  if (d1.empty() || d2.empty()) {
    throw InternalError("tester databases must be non-empty");
  }
  const Database& big = d1.size() >= d2.size() ? d1 : d2;
  const Database& small = d1.size() >= d2.size() ? d2 : d1;
  Database big_sorted = big;
  Database small_sorted = small;
  std::sort(big_sorted.begin(), big_sorted.end());
  std::sort(small_sorted.begin(), small_sorted.end());
  if (big.size() != small.size() + 1 ||
      !IsSubMultiset(small_sorted, big_sorted)) {
    throw InternalError("tester databases are not at row distance 1");
  }
  std::vector<double> s1;
  std::vector<double> s2;
  s1.reserve(cfg.samples);
  s2.reserve(cfg.samples);
  ReleaseSampler draw1 = f(d1);
  for (int i = 0; i < cfg.samples; ++i) s1.push_back(draw1(rng));
  ReleaseSampler draw2 = f(d2);
  for (int i = 0; i < cfg.samples; ++i) s2.push_back(draw2(rng));
  return CompareHistograms(s1, s2, cfg);
}

Verdict RunDpTest(const Primitive& f, const TesterConfig& cfg,
                  std::uint64_t seed) {
  cfg.Validate();
  RandomSource root(seed);
  Verdict verdict;
  std::map<Database, std::vector<double>> cache;
  auto samples_for = [&](const Database& db) -> const std::vector<double>& {
    auto it = cache.find(db);
    if (it == cache.end()) {
      // Substream keyed by the record multiset: the draw sequence for a
      // database is independent of when the traversal first reaches it.
      RandomSource rng = root.Substream(DatabaseLabel(db));
      std::vector<double> samples;
      samples.reserve(cfg.samples);
      ReleaseSampler draw = f(db);
      for (int i = 0; i < cfg.samples; ++i) samples.push_back(draw(rng));
      it = cache.emplace(db, std::move(samples)).first;
      ++verdict.databases_sampled;
    }
    return it->second;
  };

  std::set<Database> expanded;
  // Returns true once a failing pair is found; verdict already records it.
  std::function<bool(const Database&)> dfs = [&](const Database& db) {
    if (db.size() < 2) return false;
    std::set<Database> tried;
    for (std::size_t drop = 0; drop < db.size(); ++drop) {
      Database succ;
      succ.reserve(db.size() - 1);
      for (std::size_t i = 0; i < db.size(); ++i) {
        if (i != drop) succ.push_back(db[i]);
      }
      // Duplicate record values would yield the same successor twice.
      if (!tried.insert(succ).second) continue;
      if (db.size() - succ.size() != 1) {
        throw InternalError("tester edge is not a single-record removal");
      }
      PairResult res = CompareHistograms(samples_for(db), samples_for(succ),
                                         cfg);
      ++verdict.pairs_tested;
      if (!res.passed) {
        verdict.passed = false;
        verdict.witness = PairReport{db, succ, std::move(res)};
        return true;
      }
      if (expanded.insert(succ).second && dfs(succ)) return true;
    }
    return false;
  };

  for (int dims : cfg.db_sizes) {
    for (Database& db : GenDatabases(dims, cfg.value_range,
                                     cfg.num_databases)) {
      // Sorted roots keep every database in canonical multiset order, which
      // the cache and the substream labels rely on.
      std::sort(db.begin(), db.end());
      if (expanded.insert(db).second && dfs(db)) return verdict;
    }
  }
  return verdict;
}

namespace {

Primitive MakeAggregatorPrimitive(AggregatorSpec spec, double epsilon) {
  spec.Validate();
  return [epsilon, spec](const Database& db) -> ReleaseSampler {
    // shared_ptr keeps the bound sampler copyable, as std::function requires.
    auto agg = std::make_shared<Aggregator>(spec);
    for (double v : db) agg->Accumulate(v);
    return [epsilon, agg](RandomSource& rng) {
      return agg->ReleaseValue(epsilon, rng);
    };
  };
}

}  // namespace

Primitive MakeCountPrimitive(double epsilon) {
  AggregatorSpec spec;
  spec.kind = AggregateKind::kCount;
  return MakeAggregatorPrimitive(spec, epsilon);
}

Primitive MakeSumPrimitive(double epsilon, ClampBounds bounds) {
  AggregatorSpec spec;
  spec.kind = AggregateKind::kSum;
  spec.bounds = bounds;
  return MakeAggregatorPrimitive(spec, epsilon);
}

Primitive MakeAvgPrimitive(double epsilon, ClampBounds bounds) {
  AggregatorSpec spec;
  spec.kind = AggregateKind::kAvg;
  spec.bounds = bounds;
  return MakeAggregatorPrimitive(spec, epsilon);
}

Primitive MakeBrokenAvgPrimitive(double epsilon, ClampBounds bounds) {
  return [epsilon, bounds](const Database& db) -> ReleaseSampler {
    // Correctly noised numerator over the exact record count. The un-noised
    // denominator leaks membership; kept as a fixture the stochastic test
    // must flag.
    double sum = 0;
    for (double v : db) sum += Clamp(v, bounds);
    double scale =
        std::max(std::abs(bounds.lower), std::abs(bounds.upper)) / epsilon;
    double n = static_cast<double>(db.size());
    return [sum, scale, n](RandomSource& rng) {
      return (sum + SampleLaplace(scale, rng)) / n;
    };
  };
}

Primitive MakeBrokenSumPrimitive(double epsilon, ClampBounds bounds) {
  return [epsilon, bounds](const Database& db) -> ReleaseSampler {
    // Half the add/remove sensitivity of a clamped sum: under-noised by 2x.
    double scale = std::max(std::abs(bounds.lower), std::abs(bounds.upper)) /
                   (2 * epsilon);
    double sum = 0;
    for (double v : db) sum += Clamp(v, bounds);
    return [sum, scale](RandomSource& rng) {
      return sum + SampleLaplace(scale, rng);
    };
  };
}

}  // namespace dpquery
