#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "dpquery/accuracy.hpp"
#include "dpquery/errors.hpp"
#include "dpquery/tester.hpp"

namespace dpquery {

// The command implementations behind the dpquery binary. Each takes
// explicit output streams and returns the process exit code, so tests can
// drive them in-process; tools/dpquery_main.cpp only parses flags.
//
// Exit codes: 0 success, 1 dp-test failure, then one per error category
// (2 parse, 3 ownership, 4 privacy-parameter, 5 io, 64 usage, 70
// internal).

int ExitCodeFor(ErrorCategory category);

// Explicit seed, else the DPQUERY_SEED environment variable, else
// hardware entropy. Throws UsageError when the environment value is not
// an unsigned integer.
std::uint64_t ResolveSeed(const std::optional<std::uint64_t>& explicit_seed);

struct RunConfig {
  std::string data_dir;           // holds one <table>.csv per referenced table
  std::string query_path;
  std::string uid_column = "uid";
  double epsilon = 1.0;
  // Absent: derived as n^(-epsilon ln n) over the n distinct users in the
  // loaded tables (n >= 2 required).
  std::optional<double> delta;
  std::int64_t max_contribution = 1;
  std::optional<std::uint64_t> seed;
  std::string format = "csv";     // "csv" | "json"
  bool leftovers = false;
  double ci_level = 0.95;
};

// Executes an anonymized query over CSV tables. CSV output carries one
// column per group key and value/ci_low/ci_high triples per aggregate,
// then "# delta=..." and "# suppressed_partitions=..." footer lines; JSON
// output is one object per row plus a trailing summary object. Rows the
// evaluator skipped over expression errors are counted on `err`. Output
// is byte-identical for identical inputs and seed.
int CmdRun(const RunConfig& config, std::ostream& out, std::ostream& err);

struct TestDpConfig {
  // anon_count | anon_sum | anon_avg | broken_avg | broken_sum, the last
  // two being the deliberately broken fixtures.
  std::string function;
  // Budget the primitive is claimed (and built) to satisfy. Absent: the
  // builtin's default claim, 1.0 except broken_avg's 0.1; its violation
  // hides inside histogram averaging at looser budgets.
  std::optional<double> epsilon;
  TesterConfig tester;            // epsilon field is overwritten per the above
  std::optional<std::uint64_t> seed;
  std::string report_path = "dp-test-witness.json";
};

// Stochastic DP search over the named builtin. Pass: prints a summary,
// returns 0. Fail: writes a JSON witness report (databases, failing
// buckets, densities) to report_path and returns 1.
int CmdTestDp(const TestDpConfig& config, std::ostream& out,
              std::ostream& err);

struct AccuracyConfig {
  AccuracyParams params;
  std::string format = "csv";     // "csv" (key=value lines) | "json"
};

int CmdAccuracy(const AccuracyConfig& config, std::ostream& out,
                std::ostream& err);

}  // namespace dpquery
