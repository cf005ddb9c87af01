#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "dpquery/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "dpquery: differentially private aggregation queries over CSV data"};
  app.require_subcommand(1);

  dpquery::RunConfig run_config;
  CLI::App* run = app.add_subcommand(
      "run", "execute an anonymized query and print noisy results");
  run->add_option("--data", run_config.data_dir,
                  "directory holding one <table>.csv per referenced table")
      ->required();
  run->add_option("--query", run_config.query_path,
                  "file containing one SQL query")
      ->required();
  run->add_option("--uid-col", run_config.uid_column,
                  "ownership column name in the CSV files (default uid)");
  run->add_option("--epsilon", run_config.epsilon, "privacy budget")
      ->required();
  run->add_option("--delta", run_config.delta,
                  "privacy delta (default: n^(-epsilon ln n) over the n "
                  "distinct users)");
  run->add_option("--cu", run_config.max_contribution,
                  "partitions one user may influence (default 1)");
  run->add_option("--seed", run_config.seed,
                  "rng seed (fallback: DPQUERY_SEED, then entropy)");
  run->add_option("--format", run_config.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));
  run->add_flag("--leftovers", run_config.leftovers,
                "re-test suppressed partitions as one merged row");
  run->add_option("--ci-level", run_config.ci_level,
                  "confidence level of the reported noise intervals");

  dpquery::TestDpConfig test_config;
  CLI::App* test = app.add_subcommand(
      "test-dp", "stochastic DP check of a builtin release primitive");
  test->add_option("function", test_config.function,
                   "anon_count | anon_sum | anon_avg | broken_avg | "
                   "broken_sum")
      ->required();
  test->add_option("--epsilon", test_config.epsilon,
                   "budget the primitive claims (default: per builtin)");
  test->add_option("--delta", test_config.tester.delta, "claimed delta");
  test->add_option("--samples", test_config.tester.samples,
                   "releases drawn per database");
  test->add_option("--buckets", test_config.tester.buckets,
                   "histogram buckets");
  test->add_option("--alpha", test_config.tester.alpha,
                   "tolerated fraction of failing buckets");
  test->add_option("--ci-level", test_config.tester.ci_level,
                   "per-bucket confidence level");
  test->add_option("--roots", test_config.tester.num_databases,
                   "root databases per size");
  test->add_option("--db-sizes", test_config.tester.db_sizes,
                   "database sizes to search");
  test->add_option("--seed", test_config.seed,
                   "rng seed (fallback: DPQUERY_SEED, then entropy)");
  test->add_option("--report", test_config.report_path,
                   "where to write the witness report on failure");

  dpquery::AccuracyConfig accuracy_config;
  CLI::App* accuracy = app.add_subcommand(
      "accuracy", "closed-form noise, suppression, and clamp predictions");
  accuracy->add_option("--epsilon", accuracy_config.params.epsilon,
                       "privacy budget")
      ->required();
  accuracy->add_option("--delta", accuracy_config.params.delta,
                       "privacy delta")
      ->required();
  accuracy->add_option("--cu", accuracy_config.params.max_contribution,
                       "partitions one user may influence");
  accuracy->add_option("--sensitivity", accuracy_config.params.sensitivity,
                       "user-level L1 sensitivity of the aggregate")
      ->required();
  accuracy->add_option("--true-value", accuracy_config.params.true_value,
                       "exact result, enables the relative error line");
  accuracy->add_option("--uniform-a", accuracy_config.params.uniform_a,
                       "clamp model: uniform lower end");
  accuracy->add_option("--uniform-b", accuracy_config.params.uniform_b,
                       "clamp model: uniform upper end");
  accuracy->add_option("--clamp-upper", accuracy_config.params.clamp_upper,
                       "clamp model: clamp upper bound");
  accuracy->add_option("--format", accuracy_config.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 64;
  }

  if (run->parsed()) {
    return dpquery::CmdRun(run_config, std::cout, std::cerr);
  }
  if (test->parsed()) {
    return dpquery::CmdTestDp(test_config, std::cout, std::cerr);
  }
  return dpquery::CmdAccuracy(accuracy_config, std::cout, std::cerr);
}
