#include "dpquery/cli.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "dpquery/anon.hpp"
#include "dpquery/csv.hpp"
#include "dpquery/sql.hpp"

namespace dpquery {
namespace {

using Json = nlohmann::ordered_json;

std::string G17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Runs a command body, mapping engine errors to their exit codes and a
// one-line message on err.
int Guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << ErrorCategoryName(e.category()) << " error: " << e.what() << "\n";
    return ExitCodeFor(e.category());
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return ExitCodeFor(ErrorCategory::kInternal);
  }
}

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot read " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void CollectTables(const QueryAst& query, std::set<std::string>* names) {
  for (const TableRefAst& ref : query.from) {
    if (ref.subquery != nullptr) {
      CollectTables(*ref.subquery, names);
    } else {
      names->insert(ref.table);
    }
  }
}

// Number of distinct users across every loaded table.
std::int64_t CountDistinctUsers(const Catalog& catalog) {
  std::set<Value, ValueLess> uids;
  for (const auto& [name, rel] : catalog.tables) {
    std::size_t uid = *rel.schema.uid_index;
    for (const Row& row : rel.rows) {
      uids.insert(row[uid]);
    }
  }
  return static_cast<std::int64_t>(uids.size());
}

std::string CsvCell(const std::string& raw) {
  if (raw.find_first_of(",\"\n\r") == std::string::npos) return raw;
  std::string quoted = "\"";
  for (char c : raw) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

void WriteCsvResult(const ResultTable& result, std::ostream& out) {
  std::string line;
  for (const std::string& key : result.key_names) {
    if (!line.empty()) line += ',';
    line += CsvCell(key);
  }
  for (const std::string& name : result.value_names) {
    for (const char* suffix : {"", "_ci_low", "_ci_high"}) {
      if (!line.empty()) line += ',';
      line += CsvCell(name + suffix);
    }
  }
  out << line << "\n";
  for (const ResultRow& row : result.rows) {
    line.clear();
    for (const Value& key : row.keys) {
      if (!line.empty()) line += ',';
      line += CsvCell(RenderValue(key));
    }
    for (const NoisyResult& cell : row.values) {
      for (double v : {cell.value, cell.ci_low, cell.ci_high}) {
        if (!line.empty()) line += ',';
        line += G17(v);
      }
    }
    out << line << "\n";
  }
  out << "# delta=" << G17(result.delta) << "\n";
  out << "# suppressed_partitions=" << result.suppressed_partitions << "\n";
}

Json ValueToJson(const Value& v) {
  switch (TypeOf(v)) {
    case ValueType::kNull:
      return nullptr;
    case ValueType::kInt64:
      return std::get<std::int64_t>(v);
    case ValueType::kFloat64:
      return std::get<double>(v);
    default:
      return std::get<std::string>(v);
  }
}

void WriteJsonResult(const ResultTable& result, std::ostream& out) {
  for (const ResultRow& row : result.rows) {
    Json obj;
    for (std::size_t i = 0; i < result.key_names.size(); ++i) {
      obj[result.key_names[i]] = ValueToJson(row.keys[i]);
    }
    for (std::size_t i = 0; i < result.value_names.size(); ++i) {
      const std::string& name = result.value_names[i];
      obj[name] = row.values[i].value;
      obj[name + "_ci_low"] = row.values[i].ci_low;
      obj[name + "_ci_high"] = row.values[i].ci_high;
    }
    if (row.is_leftover) obj["leftover"] = true;
    out << obj.dump() << "\n";
  }
  Json summary;
  summary["delta"] = result.delta;
  summary["suppressed_partitions"] = result.suppressed_partitions;
  out << summary.dump() << "\n";
}

struct Builtin {
  const char* name;
  double default_epsilon;
  Primitive (*make)(double epsilon);
};

const Builtin kBuiltins[] = {
    {"anon_count", 1.0,
     [](double eps) { return MakeCountPrimitive(eps); }},
    {"anon_sum", 1.0,
     [](double eps) { return MakeSumPrimitive(eps, ClampBounds(-0.5, 0.5)); }},
    {"anon_avg", 1.0,
     [](double eps) { return MakeAvgPrimitive(eps, ClampBounds(-0.5, 0.5)); }},
    {"broken_avg", 0.1,
     [](double eps) {
       return MakeBrokenAvgPrimitive(eps, ClampBounds(-0.5, 0.5));
     }},
    {"broken_sum", 1.0,
     [](double eps) {
       return MakeBrokenSumPrimitive(eps, ClampBounds(-0.5, 0.5));
     }},
};

Json RatioToJson(double ratio) {
  if (std::isfinite(ratio)) return ratio;
  return "inf";
}

void WriteWitnessReport(const std::string& path, const std::string& function,
                        const TesterConfig& cfg, const Verdict& verdict) {
  const PairReport& w = *verdict.witness;
  Json report;
  report["function"] = function;
  report["epsilon"] = cfg.epsilon;
  report["delta"] = cfg.delta;
  report["samples"] = cfg.samples;
  report["buckets"] = cfg.buckets;
  report["alpha"] = cfg.alpha;
  report["ci_level"] = cfg.ci_level;
  report["d1"] = w.d1;
  report["d2"] = w.d2;
  report["swapped"] = w.result.swapped;
  report["failing_buckets"] = w.result.failing_buckets;
  Json ratios = Json::array();
  for (double r : w.result.measured_ratios) ratios.push_back(RatioToJson(r));
  report["measured_ratios"] = std::move(ratios);
  report["densities_d1"] = w.result.densities_d1;
  report["densities_d2"] = w.result.densities_d2;
  report["histogram_lo"] = w.result.lo;
  report["histogram_hi"] = w.result.hi;
  report["pairs_tested"] = verdict.pairs_tested;
  report["databases_sampled"] = verdict.databases_sampled;
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot write " + path);
  }
  out << report.dump(2) << "\n";
}

void EmitReportLine(std::ostream& out, const char* key, double value,
                    bool json, Json* obj) {
  if (json) {
    (*obj)[key] = value;
  } else {
    out << key << "=" << G17(value) << "\n";
  }
}

}  // namespace

int ExitCodeFor(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kParse:
      return 2;
    case ErrorCategory::kOwnership:
      return 3;
    case ErrorCategory::kPrivacyParameter:
      return 4;
    case ErrorCategory::kIo:
      return 5;
    case ErrorCategory::kUsage:
      return 64;
    default:
      return 70;
  }
}

std::uint64_t ResolveSeed(const std::optional<std::uint64_t>& explicit_seed) {
  if (explicit_seed.has_value()) return *explicit_seed;
  if (const char* env = std::getenv("DPQUERY_SEED")) {
    errno = 0;
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (errno == ERANGE || *env == '\0' || end != env + std::strlen(env)) {
      throw UsageError("DPQUERY_SEED is not an unsigned integer");
    }
    return v;
  }
  std::random_device entropy;
  return (static_cast<std::uint64_t>(entropy()) << 32) ^ entropy();
}

int CmdRun(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return Guarded(err, [&]() -> int {
    if (config.format != "csv" && config.format != "json") {
      throw UsageError("unknown output format '" + config.format + "'");
    }
    if (!(config.ci_level > 0 && config.ci_level < 1)) {
      throw PrivacyParameterError("ci level must lie in (0, 1)");
    }
    QueryAst ast = ParseQuery(ReadFile(config.query_path));
    if (!ast.with_anonymization) {
      throw PrivacyParameterError(
          "run executes anonymized queries and this one has no SELECT WITH "
          "ANONYMIZATION; plain execution would release raw rows");
    }
    std::set<std::string> tables;
    CollectTables(ast, &tables);
    Catalog catalog;
    for (const std::string& name : tables) {
      catalog.tables.emplace(
          name, IngestCsv(config.data_dir + "/" + name + ".csv",
                          config.uid_column));
    }
    double delta;
    if (config.delta.has_value()) {
      delta = *config.delta;
    } else {
      std::int64_t users = CountDistinctUsers(catalog);
      if (users < 2) {
        throw PrivacyParameterError(
            "delta omitted and fewer than two distinct users present; pass "
            "--delta explicitly");
      }
      double log_n = std::log(static_cast<double>(users));
      delta = std::exp(-config.epsilon * log_n * log_n);
    }
    PrivacyBudget budget(config.epsilon, delta, config.max_contribution);
    LoweredQuery lowered = LowerQuery(ast, catalog);
    RewrittenPlan plan = RewriteAnonymized(std::move(lowered.plan), budget,
                                           config.leftovers);
    RandomSource rng(ResolveSeed(config.seed));
    ExecOptions options;
    options.ci_level = config.ci_level;
    ResultTable result = ExecuteAnonymized(plan, catalog, rng, options);
    if (result.row_eval_errors > 0) {
      err << "note: skipped " << result.row_eval_errors
          << " rows over expression errors\n";
    }
    if (config.format == "json") {
      WriteJsonResult(result, out);
    } else {
      WriteCsvResult(result, out);
    }
    return 0;
  });
}

int CmdTestDp(const TestDpConfig& config, std::ostream& out,
              std::ostream& err) {
  return Guarded(err, [&]() -> int {
    const Builtin* builtin = nullptr;
    for (const Builtin& b : kBuiltins) {
      if (config.function == b.name) builtin = &b;
    }
    if (builtin == nullptr) {
      std::string names;
      for (const Builtin& b : kBuiltins) {
        if (!names.empty()) names += ", ";
        names += b.name;
      }
      throw UsageError("unknown primitive '" + config.function +
                       "'; builtins: " + names);
    }
    TesterConfig cfg = config.tester;
    cfg.epsilon = config.epsilon.value_or(builtin->default_epsilon);
    cfg.Validate();
    Verdict verdict = RunDpTest(builtin->make(cfg.epsilon), cfg,
                                ResolveSeed(config.seed));
    if (verdict.passed) {
      out << "dp predicate test: PASS (" << config.function << ", epsilon "
          << G17(cfg.epsilon) << ", " << verdict.pairs_tested << " pairs, "
          << verdict.databases_sampled << " databases)\n";
      return 0;
    }
    WriteWitnessReport(config.report_path, config.function, cfg, verdict);
    out << "dp predicate test: FAIL (" << config.function << ", epsilon "
        << G17(cfg.epsilon) << ", "
        << verdict.witness->result.failing_buckets.size()
        << " failing buckets)\n";
    out << "witness report: " << config.report_path << "\n";
    return 1;
  });
}

int CmdAccuracy(const AccuracyConfig& config, std::ostream& out,
                std::ostream& err) {
  return Guarded(err, [&]() -> int {
    if (config.format != "csv" && config.format != "json") {
      throw UsageError("unknown output format '" + config.format + "'");
    }
    AccuracyReport report = ComputeAccuracy(config.params);
    bool json = config.format == "json";
    Json obj;
    EmitReportLine(out, "median_noise", report.median_noise, json, &obj);
    if (report.median_relative_error.has_value()) {
      EmitReportLine(out, "median_relative_error",
                     *report.median_relative_error, json, &obj);
    }
    EmitReportLine(out, "tau", report.tau, json, &obj);
    EmitReportLine(out, "release_probability", report.release_probability,
                   json, &obj);
    EmitReportLine(out, "suppression_single", report.suppression_single, json,
                   &obj);
    EmitReportLine(out, "suppression_any_of_cu", report.suppression_any, json,
                   &obj);
    EmitReportLine(out, "suppression_asymptote", report.suppression_asymptote,
                   json, &obj);
    if (report.clamp_error.has_value()) {
      EmitReportLine(out, "clamp_error", *report.clamp_error, json, &obj);
    }
    if (json) out << obj.dump(2) << "\n";
    return 0;
  });
}

}  // namespace dpquery
