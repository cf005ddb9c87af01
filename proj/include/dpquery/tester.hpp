#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "dpquery/noise.hpp"
#include "dpquery/random_source.hpp"

namespace dpquery {

// Stochastic checker for the (eps, delta)-DP predicate of scalar aggregation
// primitives. It generates small databases from a low-discrepancy sequence,
// walks every adjacent pair reachable by removing records one at a time, and
// compares empirical output histograms widened by per-bucket confidence
// intervals. A failure therefore comes with a concrete database pair and the
// buckets whose densities cannot be explained by the claimed budget.
//
// The check targets row-level privacy of primitives in isolation;
// contribution bounding across rows of one user is enforced (and tested)
// upstream of the release and is out of scope here.

// A database is a multiset of scalar records.
using Database = std::vector<double>;

// Primitive under test, split into two stages: binding a database yields a
// sampler that draws independent releases over that database's accumulated
// state. The split keeps per-database work (accumulation, spec validation)
// out of the sampling loop, which a full search runs tens of millions of
// times.
using ReleaseSampler = std::function<double(RandomSource&)>;
using Primitive = std::function<ReleaseSampler(const Database&)>;

struct TesterConfig {
  int num_databases = 16;           // root databases generated per size
  std::vector<int> db_sizes = {1, 2, 3, 4};
  int samples = 50000;              // releases drawn per database
  int buckets = 50;                 // histogram resolution
  double epsilon = 1.0;             // budget the primitive claims to satisfy
  double delta = 0.0;
  double alpha = 0.02;              // tolerated fraction of failing buckets
  double value_range = 0.5;         // records drawn from [-r, r]
  double ci_level = 0.999;          // per-bucket confidence level

  // Throws PrivacyParameterError on nonsense (samples < 1000, buckets < 2,
  // alpha outside [0, 1], ...). alpha = 1 is legal and makes every pair
  // pass: the tolerance then covers all buckets.
  void Validate() const;
};

// Histogram comparison outcome for one adjacent pair. `swapped` records the
// direction that failed: false means d1's densities exceeded the budgeted
// envelope over d2's, true the reverse. Densities cover all buckets of the
// shared histogram over [lo, hi]; ratios are the raw density quotients
// target/bound for the failing buckets (inf where the bound side is empty).
struct PairResult {
  bool passed = true;
  bool swapped = false;
  std::vector<int> failing_buckets;
  std::vector<double> measured_ratios;
  std::vector<double> densities_d1;
  std::vector<double> densities_d2;
  double lo = 0;
  double hi = 0;
};

// Failing pair plus everything needed to re-run it in isolation.
struct PairReport {
  Database d1;
  Database d2;
  PairResult result;
};

struct Verdict {
  bool passed = true;
  std::optional<PairReport> witness;  // present iff !passed
  std::int64_t pairs_tested = 0;
  std::int64_t databases_sampled = 0;
};

// Radical inverse of index in the given base. pre: index >= 1, base >= 2.
// Output lies in (0, 1).
double Halton(std::int64_t index, int base);

// count databases of `dims` records each, the k-th built from the k-th
// element of the Halton sequence in bases = the first `dims` primes, shifted
// and scaled to [-value_range, value_range]. Deterministic.
std::vector<Database> GenDatabases(int dims, double value_range, int count);

// Draws cfg.samples releases of f on each database and checks, in both
// directions, that no more than alpha * buckets histogram buckets violate
//   lower(p_target) <= e^eps * upper(p_bound) + delta
// where lower/upper are Wilson score bounds at cfg.ci_level. Degenerate
// sample ranges collapse to a single all-mass bucket.
// pre: d1 and d2 non-empty and at row distance exactly 1 (checked; throws
// InternalError otherwise).
PairResult DpPredicateTest(const Primitive& f, const Database& d1,
                           const Database& d2, const TesterConfig& cfg,
                           RandomSource& rng);

// Full search: for every configured size, generates root databases and
// depth-first walks remove-one-record successors down to singletons, testing
// every edge once and stopping at the first failing pair. Each distinct
// database is sampled exactly once per run (keyed by its sorted record
// multiset), no matter how many edges touch it, and sampling uses a
// substream labeled by that multiset, so results do not depend on traversal
// order. Roots could be dispatched to parallel workers under the same
// labeling; the implementation is sequential.
Verdict RunDpTest(const Primitive& f, const TesterConfig& cfg,
                  std::uint64_t seed);

// Production release paths wrapped as tester primitives.
Primitive MakeCountPrimitive(double epsilon);
Primitive MakeSumPrimitive(double epsilon, ClampBounds bounds);
Primitive MakeAvgPrimitive(double epsilon, ClampBounds bounds);

// Regression fixtures the tester must flag.
//
// BrokenAvg divides a correctly noised sum by the exact record count; the
// un-noised denominator leaks membership.
// BrokenSum noises with half the add/remove sensitivity of a clamped sum
// (max(|L|, |U|) / (2 eps) instead of max(|L|, |U|) / eps).
Primitive MakeBrokenAvgPrimitive(double epsilon, ClampBounds bounds);
Primitive MakeBrokenSumPrimitive(double epsilon, ClampBounds bounds);

}  // namespace dpquery
