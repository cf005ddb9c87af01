#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "doctest.h"
#include "dpquery/anon.hpp"
#include "dpquery/random_source.hpp"
#include "dpquery/sql.hpp"

namespace dpquery {
namespace {

Value I(std::int64_t v) { return Value{v}; }
Value D(double v) { return Value{v}; }
Value T(const char* v) { return Value{std::string(v)}; }

// access_logs: two distinct chrome users (one with a duplicate visit) and
// one firefox user. Employee/Order mirror the two-table join examples:
// the it department has an employee but no orders.
Catalog TestCatalog() {
  Catalog catalog;

  Relation logs;
  logs.schema.columns = {{"uid", ValueType::kInt64},
                         {"browser_agent", ValueType::kText}};
  logs.schema.uid_index = 0;
  logs.rows = {
      {I(1), T("chrome")},
      {I(1), T("chrome")},
      {I(2), T("chrome")},
      {I(3), T("firefox")},
  };
  catalog.tables["access_logs"] = std::move(logs);

  Relation t1;
  t1.schema.columns = {{"uid", ValueType::kInt64},
                       {"cohort", ValueType::kText}};
  t1.schema.uid_index = 0;
  t1.rows = {{I(1), T("A")}, {I(2), T("A")}};
  catalog.tables["Table1"] = std::move(t1);

  Relation t2;
  t2.schema.columns = {{"uid", ValueType::kInt64},
                       {"val", ValueType::kFloat64}};
  t2.schema.uid_index = 0;
  t2.rows = {{I(1), D(0.4)}, {I(1), D(0.4)}, {I(2), D(0.9)}};
  catalog.tables["Table2"] = std::move(t2);

  Relation emp;
  emp.schema.columns = {{"uid", ValueType::kInt64},
                        {"dept", ValueType::kText}};
  emp.schema.uid_index = 0;
  emp.rows = {{I(1), T("eng")}, {I(2), T("eng")}, {I(3), T("it")}};
  catalog.tables["Employee"] = std::move(emp);

  Relation ord;
  ord.schema.columns = {{"uid", ValueType::kInt64},
                        {"item", ValueType::kText}};
  ord.schema.uid_index = 0;
  ord.rows = {{I(1), T("kb")}, {I(1), T("mouse")}, {I(2), T("desk")}};
  catalog.tables["Order"] = std::move(ord);

  Relation open;
  open.schema.columns = {{"k", ValueType::kInt64}};
  open.rows = {{I(1)}, {I(2)}};
  catalog.tables["open_data"] = std::move(open);

  return catalog;
}

std::string Canon(const std::string& text, const ParseOptions& opts = {}) {
  return RenderQuery(ParseQuery(text, opts));
}

void CheckFixpoint(const std::string& text, const ParseOptions& opts = {}) {
  std::string once = Canon(text, opts);
  CHECK(Canon(once, opts) == once);
}

long FailOffset(const std::string& text, const ParseOptions& opts = {}) {
  try {
    ParseQuery(text, opts);
  } catch (const ParseError& e) {
    return e.offset();
  }
  return -2;
}

TEST_CASE("tokenizer classifies keywords, literals, and symbols") {
  auto toks = Tokenize("sElEcT x1, 'it''s' FROM t1 -- comment\n  >= 1.5e2;");
  REQUIRE(toks.size() == 10);
  CHECK(toks[0].kind == TokenKind::kKeyword);
  CHECK(toks[0].text == "SELECT");
  CHECK(toks[0].offset == 0);
  CHECK(toks[1].kind == TokenKind::kIdentifier);
  CHECK(toks[1].text == "x1");
  CHECK(toks[2].text == ",");
  CHECK(toks[3].kind == TokenKind::kText);
  CHECK(toks[3].text == "it's");
  CHECK(toks[4].kind == TokenKind::kKeyword);
  CHECK(toks[5].kind == TokenKind::kIdentifier);
  CHECK(toks[6].kind == TokenKind::kSymbol);
  CHECK(toks[6].text == ">=");
  CHECK(toks[7].kind == TokenKind::kFloat);
  CHECK(toks[7].float_value == 150.0);
  CHECK(toks[8].text == ";");
  CHECK(toks[9].kind == TokenKind::kEnd);

  auto ints = Tokenize("12 12.5 12e3 12e x.5");
  CHECK(ints[0].kind == TokenKind::kInt);
  CHECK(ints[0].int_value == 12);
  CHECK(ints[1].kind == TokenKind::kFloat);
  CHECK(ints[2].kind == TokenKind::kFloat);
  CHECK(ints[2].float_value == 12000.0);
  // "12e" is an int followed by an identifier, not a malformed float.
  CHECK(ints[3].kind == TokenKind::kInt);
  CHECK(ints[4].kind == TokenKind::kIdentifier);
  CHECK(ints[5].kind == TokenKind::kIdentifier);
  CHECK(ints[6].kind == TokenKind::kSymbol);
  CHECK(ints[6].text == ".");
  CHECK(ints[7].kind == TokenKind::kInt);
}

TEST_CASE("tokenizer reports offsets for bad input") {
  try {
    Tokenize("SELECT 'oops");
    FAIL("expected a lex error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 7);
    CHECK(std::string(e.what()).find("unterminated") != std::string::npos);
  }
  try {
    Tokenize("SELECT @x");
    FAIL("expected a lex error");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 7);
    CHECK(std::string(e.what()).find("unexpected character") !=
          std::string::npos);
  }
  CHECK_THROWS_AS(Tokenize("99999999999999999999"), ParseError);
}

TEST_CASE("histogram query parses and renders canonically") {
  QueryAst q = ParseQuery(
      "SELECT browser_agent, COUNT(*) AS visits\n"
      "FROM access_logs\n"
      "GROUP BY browser_agent;");
  CHECK_FALSE(q.with_anonymization);
  REQUIRE(q.items.size() == 2);
  CHECK(q.items[0].expr->kind == ExprKind::kColumnRef);
  CHECK(q.items[0].alias.empty());
  CHECK(q.items[1].alias == "visits");
  CHECK(q.items[1].expr->kind == ExprKind::kCall);
  CHECK(q.items[1].expr->call_star);
  REQUIRE(q.from.size() == 1);
  CHECK(q.from[0].table == "access_logs");
  REQUIRE(q.group_by.size() == 1);
  CHECK(q.group_by[0] == "browser_agent");

  CHECK(RenderQuery(q) ==
        "SELECT browser_agent, COUNT(*) AS visits FROM access_logs "
        "GROUP BY browser_agent;");
}

TEST_CASE("noisy distinct-count query with HAVING parses") {
  // The pedagogical fixes: a hand-noised distinct count, then the same
  // with an alias and a HAVING floor on it.
  QueryAst q1 = ParseQuery(
      "SELECT browser_agent,\n"
      "       COUNT(DISTINCT uid) + Laplace(1/0.1)\n"
      "FROM access_logs\n"
      "GROUP BY browser_agent;");
  REQUIRE(q1.items.size() == 2);
  CHECK(q1.items[1].alias.empty());
  CHECK(q1.items[1].expr->kind == ExprKind::kBinary);

  QueryAst q2 = ParseQuery(
      "SELECT browser_agent,\n"
      "       COUNT(DISTINCT uid) + Laplace(1/0.5) AS c\n"
      "FROM access_logs\n"
      "GROUP BY browser_agent\n"
      "HAVING c >= 21;");
  CHECK(q2.items[1].alias == "c");
  REQUIRE(q2.having != nullptr);
  CHECK(RenderQuery(q2) ==
        "SELECT browser_agent, (COUNT(DISTINCT uid) + LAPLACE((1 / 0.5))) "
        "AS c FROM access_logs GROUP BY browser_agent HAVING (c >= 21);");
}

TEST_CASE("subquery with reservoir sampling parses in debug mode") {
  const std::string text =
      "SELECT browser_agent,\n"
      "       COUNT(DISTINCT uid) + Laplace(20) AS c\n"
      "FROM (SELECT browser_agent, uid\n"
      "      FROM access_logs\n"
      "      GROUP BY browser_agent, uid)\n"
      "TABLESAMPLE RESERVOIR\n"
      "  (2 ROWS PARTITION BY uid)\n"
      "GROUP BY browser_agent\n"
      "HAVING c >= 21;";
  ParseOptions debug;
  debug.allow_reservoir_sample = true;
  QueryAst q = ParseQuery(text, debug);
  REQUIRE(q.from.size() == 1);
  REQUIRE(q.from[0].subquery != nullptr);
  CHECK(q.from[0].has_sample);
  CHECK(q.from[0].sample_rows == 2);
  CHECK(q.from[0].subquery->group_by.size() == 2);
  CHECK(q.from[0].subquery->items.size() == 2);

  // Outside debug mode the clause is refused at parse time.
  CHECK_THROWS_AS(ParseQuery(text), ParseError);
  try {
    ParseQuery(text);
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("debug") != std::string::npos);
  }
}

TEST_CASE("anonymized sum query parses with join and qualified names") {
  QueryAst q = ParseQuery(
      "SELECT WITH ANONYMIZATION\n"
      "  T1.cohort, ANON_SUM(T2.val, 0, 1)\n"
      "FROM Table1 T1, Table2 T2 USING(uid)\n"
      "GROUP BY T1.cohort;");
  CHECK(q.with_anonymization);
  REQUIRE(q.items.size() == 2);
  CHECK(q.items[0].expr->column == "T1.cohort");
  REQUIRE(q.items[1].anon.has_value());
  CHECK(q.items[1].anon->kind == AggregateKind::kSum);
  REQUIRE(q.items[1].anon->bounds.has_value());
  CHECK(q.items[1].anon->bounds->lower == 0.0);
  CHECK(q.items[1].anon->bounds->upper == 1.0);
  REQUIRE(q.from.size() == 2);
  CHECK(q.from[0].table == "Table1");
  CHECK(q.from[0].alias == "T1");
  CHECK(q.from[1].alias == "T2");
  CHECK(q.group_by == std::vector<std::string>{"T1.cohort"});

  CHECK(RenderQuery(q) ==
        "SELECT WITH ANONYMIZATION T1.cohort, ANON_SUM(T2.val, 0, 1) "
        "FROM Table1 T1, Table2 T2 USING (uid) GROUP BY T1.cohort;");
}

TEST_CASE("anonymized count query parses with bounds sugar") {
  QueryAst q = ParseQuery(
      "SELECT WITH ANONYMIZATION\n"
      "  dept, ANON_COUNT(*, 0, 5) as c\n"
      "FROM Employee E, Order O USING(uid)\n"
      "GROUP BY dept;");
  CHECK(q.with_anonymization);
  REQUIRE(q.items[1].anon.has_value());
  CHECK(q.items[1].anon->kind == AggregateKind::kCount);
  CHECK(q.items[1].anon->arg == nullptr);
  REQUIRE(q.items[1].anon->bounds.has_value());
  CHECK(q.items[1].anon->bounds->upper == 5.0);
  CHECK(q.items[1].alias == "c");

  CHECK(RenderQuery(q) ==
        "SELECT WITH ANONYMIZATION dept, ANON_COUNT(*, 0, 5) AS c "
        "FROM Employee E, Order O USING (uid) GROUP BY dept;");
}

TEST_CASE("parse and render reach a fixpoint across the grammar") {
  CheckFixpoint("SELECT a, b AS two FROM t;");
  CheckFixpoint("SELECT a FROM t WHERE NOT a = 1 AND b < 2 OR c >= 3;");
  CheckFixpoint("SELECT a + b * c - d / e FROM t;");
  CheckFixpoint("SELECT -a, -(a + b), 'quo''te', NULL FROM t;");
  CheckFixpoint("SELECT IF(a > 0, a, 0 - a) AS mag FROM t;");
  CheckFixpoint("SELECT COUNT(*), COUNT(x), COUNT(DISTINCT x) FROM t;");
  CheckFixpoint("SELECT SUM(v), AVG(v), VAR(v), STDDEV(v) FROM t;");
  CheckFixpoint("SELECT QUANTILE(0.5, v) FROM t GROUP BY g;");
  CheckFixpoint("SELECT x + LAPLACE(0.25) FROM t;");
  CheckFixpoint("SELECT T.a FROM big T WHERE T.b <> 'x' GROUP BY T.a;");
  CheckFixpoint("SELECT a FROM t1, t2 USING (uid), t3 USING (uid);");
  CheckFixpoint("SELECT a FROM t1 JOIN t2 USING (uid);");
  CheckFixpoint("SELECT a FROM (SELECT a, uid FROM t GROUP BY a, uid) s;");
  CheckFixpoint(
      "SELECT WITH ANONYMIZATION g, ANON_COUNT(*), ANON_SUM(v, -2, 3.5), "
      "ANON_AVG(v, 0, 1) AS m, ANON_VAR(v, 0, 1), ANON_STDDEV(v, 0, 1), "
      "ANON_NTILE(v, 0.9, 0, 10) FROM t WHERE v > 0 GROUP BY g;");
  CheckFixpoint("SELECT WITH ANONYMIZATION ANON_SUM(v) AS s FROM t;");
  ParseOptions debug;
  debug.allow_reservoir_sample = true;
  CheckFixpoint(
      "SELECT c FROM t TABLESAMPLE RESERVOIR (3 ROWS PARTITION BY uid);",
      debug);

  // Canonicalization flattens case and whitespace.
  CHECK(Canon("select a from t;") == "SELECT a FROM t;");
}

TEST_CASE("precedence renders explicitly") {
  CHECK(Canon("SELECT a + b * c - d FROM t;") ==
        "SELECT ((a + (b * c)) - d) FROM t;");
  CHECK(Canon("SELECT NOT a = 1 AND b OR c FROM t;") ==
        "SELECT (((NOT (a = 1)) AND b) OR c) FROM t;");
  CHECK(Canon("SELECT -a * b FROM t;") == "SELECT ((-a) * b) FROM t;");
  CHECK(Canon("SELECT (a + b) * c FROM t;") ==
        "SELECT ((a + b) * c) FROM t;");
}

TEST_CASE("parser rejects misplaced anonymized syntax") {
  // Anonymized aggregates need the marker.
  try {
    ParseQuery("SELECT ANON_SUM(x) FROM t;");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("WITH ANONYMIZATION") !=
          std::string::npos);
  }
  // ... and cannot hide inside expressions.
  CHECK_THROWS_AS(
      ParseQuery("SELECT WITH ANONYMIZATION g, ANON_COUNT(*) FROM t "
                 "WHERE ANON_SUM(v, 0, 1) > 1 GROUP BY g;"),
      ParseError);
  // HAVING is a plain-query construct.
  CHECK_THROWS_AS(
      ParseQuery("SELECT WITH ANONYMIZATION g, ANON_COUNT(*) FROM t "
                 "GROUP BY g HAVING g > 1;"),
      ParseError);
  // The marker is for the outermost query only.
  CHECK_THROWS_AS(
      ParseQuery("SELECT a FROM (SELECT WITH ANONYMIZATION g, "
                 "ANON_COUNT(*) FROM t GROUP BY g);"),
      ParseError);
  // The rewrite owns contribution bounding.
  ParseOptions debug;
  debug.allow_reservoir_sample = true;
  CHECK_THROWS_AS(
      ParseQuery("SELECT WITH ANONYMIZATION g, ANON_COUNT(*) FROM t "
                 "TABLESAMPLE RESERVOIR (1 ROWS PARTITION BY uid) "
                 "GROUP BY g;",
                 debug),
      ParseError);
  // ANON_COUNT counts rows, so it only takes *.
  CHECK_THROWS_AS(ParseQuery("SELECT WITH ANONYMIZATION g, ANON_COUNT(x) "
                             "FROM t GROUP BY g;"),
                  ParseError);
}

TEST_CASE("parser reports what it expected and where") {
  CHECK(FailOffset("SELECT a FROM t") == 15);  // missing ';'
  try {
    ParseQuery("SELECT a FROM t WHERE;");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("expected an expression") !=
          std::string::npos);
    CHECK(e.offset() == 21);
  }
  try {
    ParseQuery("SELECT FROM t;");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("expected") != std::string::npos);
    CHECK(std::string(e.what()).find("'FROM'") != std::string::npos);
  }
  // Joins are uid-equijoins only.
  CHECK_THROWS_AS(ParseQuery("SELECT a FROM t1, t2 USING (other);"),
                  ParseError);
  // Subqueries do not nest.
  CHECK_THROWS_AS(
      ParseQuery("SELECT a FROM (SELECT a FROM (SELECT a FROM t));"),
      ParseError);
  // Trailing garbage after the terminator.
  CHECK_THROWS_AS(ParseQuery("SELECT a FROM t; SELECT b FROM t;"),
                  ParseError);
}

TEST_CASE("plain histogram query lowers to grouping plus projection") {
  Catalog catalog = TestCatalog();
  LoweredQuery lowered = LowerQuery(
      ParseQuery("SELECT browser_agent, COUNT(*) AS visits FROM access_logs "
                 "GROUP BY browser_agent;"),
      catalog);
  CHECK_FALSE(lowered.anonymized);
  CHECK(RenderPlan(*lowered.plan) ==
        "project [browser_agent, visits := COUNT(*)]\n"
        "  group_aggregate keys=[browser_agent] aggs=[count(*) as "
        "COUNT(*)]\n"
        "    scan access_logs (ownership stripped)\n");

  RandomSource rng(7);
  Relation out = EvalPlan(*lowered.plan, catalog, rng);
  REQUIRE(out.rows.size() == 2);
  CHECK(out.schema.columns[0].name == "browser_agent");
  CHECK(out.schema.columns[1].name == "visits");
  CHECK(out.rows[0][0] == T("chrome"));
  CHECK(out.rows[0][1] == I(3));
  CHECK(out.rows[1][0] == T("firefox"));
  CHECK(out.rows[1][1] == I(1));
}

TEST_CASE("noisy distinct count lowers and draws fresh noise per seed") {
  Catalog catalog = TestCatalog();
  LoweredQuery lowered = LowerQuery(
      ParseQuery("SELECT browser_agent, COUNT(DISTINCT uid) + Laplace(0.5) "
                 "AS c FROM access_logs GROUP BY browser_agent;"),
      catalog);
  RandomSource rng_a(11);
  Relation a = EvalPlan(*lowered.plan, catalog, rng_a);
  REQUIRE(a.rows.size() == 2);
  // chrome has two distinct users, firefox one; the noise draw is pinned
  // by the seed, so loose windows around the exact counts are stable.
  double chrome = std::get<double>(a.rows[0][1]);
  double firefox = std::get<double>(a.rows[1][1]);
  CHECK(chrome > -3.0);
  CHECK(chrome < 7.0);
  CHECK(firefox > -4.0);
  CHECK(firefox < 6.0);
  CHECK(chrome != 2.0);  // noise actually applied

  RandomSource rng_b(11);
  Relation b = EvalPlan(*lowered.plan, catalog, rng_b);
  CHECK(std::get<double>(b.rows[0][1]) == chrome);
  CHECK(std::get<double>(b.rows[1][1]) == firefox);
}

TEST_CASE("reservoir-sampled query lowers and runs end to end") {
  Catalog catalog = TestCatalog();
  ParseOptions debug;
  debug.allow_reservoir_sample = true;
  LoweredQuery lowered = LowerQuery(
      ParseQuery("SELECT browser_agent, COUNT(DISTINCT uid) + "
                 "Laplace(0.001) AS c FROM (SELECT browser_agent, uid FROM "
                 "access_logs GROUP BY browser_agent, uid) TABLESAMPLE "
                 "RESERVOIR (1 ROWS PARTITION BY uid) GROUP BY "
                 "browser_agent HAVING c >= 1.5;",
                 debug),
      catalog);
  CHECK(RenderPlan(*lowered.plan) ==
        "select (c >= 1.5)\n"
        "  project [browser_agent, c := (COUNT(DISTINCT uid) + "
        "LAPLACE(0.001))]\n"
        "    group_aggregate keys=[browser_agent] aggs=[count_distinct(uid) "
        "as COUNT(DISTINCT uid)]\n"
        "      reservoir_per_user cap=1\n"
        "        project [browser_agent, uid]\n"
        "          group_aggregate keys=[browser_agent, uid] aggs=[]\n"
        "            scan access_logs\n");

  RandomSource rng(3);
  Relation out = EvalPlan(*lowered.plan, catalog, rng);
  // Deduped partitions: chrome x {1, 2}, firefox x {3}; the cap of one
  // partition per user keeps all three. Only chrome clears the floor.
  REQUIRE(out.rows.size() == 1);
  CHECK(out.rows[0][0] == T("chrome"));
  CHECK(std::get<double>(out.rows[0][1]) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("anonymized sum query lowers to the two-stage plan") {
  Catalog catalog = TestCatalog();
  LoweredQuery lowered = LowerQuery(
      ParseQuery("SELECT WITH ANONYMIZATION T1.cohort, ANON_SUM(T2.val, 0, "
                 "1) FROM Table1 T1, Table2 T2 USING(uid) GROUP BY "
                 "T1.cohort;"),
      catalog);
  CHECK(lowered.anonymized);
  REQUIRE(lowered.plan->kind == PlanKind::kAnonAggregate);

  PrivacyBudget budget{1.0, 0.05, 1};
  RewrittenPlan rewritten = RewriteAnonymized(std::move(lowered.plan), budget);
  CHECK(RenderPlan(*rewritten.per_user_stage) ==
        "reservoir_per_user cap=1\n"
        "  group_aggregate keys=[uid, cohort] aggs=[sum(val) as "
        "pu_anon_sum]\n"
        "    join using (uid)\n"
        "      scan Table1\n"
        "      scan Table2\n");
  CHECK(RenderPlan(*rewritten.cross_user_stage) ==
        "anon_aggregate keys=[cohort] aggs=[anon_sum[0,1](pu_anon_sum) as "
        "anon_sum]\n");

  // Noise off, threshold forced low: exact clamped per-user sums. User 1
  // holds 0.4 + 0.4 clamped to 1 at release time... the clamp applies to
  // each per-user partial: 0.8 and 0.9 both stay inside [0, 1].
  RandomSource rng(5);
  ExecOptions opts;
  opts.noise_enabled = false;
  opts.tau_override = 0.0;
  ResultTable result = ExecuteAnonymized(rewritten, catalog, rng, opts);
  REQUIRE(result.rows.size() == 1);
  CHECK(result.rows[0].keys[0] == T("A"));
  CHECK(result.rows[0].values[0].value == doctest::Approx(1.7).epsilon(1e-12));
}

TEST_CASE("anonymized count query matches the worked two-stage example") {
  Catalog catalog = TestCatalog();
  LoweredQuery lowered = LowerQuery(
      ParseQuery("SELECT WITH ANONYMIZATION dept, ANON_COUNT(*, 0, 5) as c "
                 "FROM Employee E, Order O USING(uid) GROUP BY dept;"),
      catalog);
  PrivacyBudget budget{1.0, 0.05, 1};
  RewrittenPlan rewritten = RewriteAnonymized(std::move(lowered.plan), budget);
  CHECK(RenderRewrittenPlan(rewritten) ==
        "per-user stage:\n"
        "  reservoir_per_user cap=1\n"
        "    group_aggregate keys=[uid, dept] aggs=[count(*) as pu_c]\n"
        "      join using (uid)\n"
        "        scan Employee\n"
        "        scan Order\n"
        "cross-user stage:\n"
        "  anon_aggregate keys=[dept] aggs=[anon_sum[0,5](pu_c) as c]\n"
        "  threshold: noisy user count >= 5.60517 (laplace scale 2)\n"
        "  budget: per-aggregate share 0.5, threshold share 0.5\n");

  // tau = 2, cu = 1, noise off: eng has two contributing users and is
  // released with the exact order count; it has no orders and no row.
  RandomSource rng(5);
  ExecOptions opts;
  opts.noise_enabled = false;
  opts.tau_override = 2.0;
  ResultTable result = ExecuteAnonymized(rewritten, catalog, rng, opts);
  REQUIRE(result.rows.size() == 1);
  CHECK(result.rows[0].keys[0] == T("eng"));
  CHECK(result.rows[0].values[0].value == doctest::Approx(3.0));
  CHECK(result.suppressed_partitions == 0);
}

TEST_CASE("lowering resolves and validates names") {
  Catalog catalog = TestCatalog();
  auto lower_text = [&catalog](const std::string& text) {
    return LowerQuery(ParseQuery(text), catalog);
  };
  CHECK_THROWS_AS(lower_text("SELECT a FROM nope;"), ParseError);
  CHECK_THROWS_AS(lower_text("SELECT nope FROM access_logs;"), ParseError);
  CHECK_THROWS_AS(
      lower_text("SELECT X.cohort FROM Table1 T1 GROUP BY X.cohort;"),
      ParseError);
  CHECK_THROWS_AS(
      lower_text("SELECT T1.nope FROM Table1 T1 GROUP BY T1.nope;"),
      ParseError);
  // Aliasing hides the table name.
  CHECK_THROWS_AS(
      lower_text("SELECT Table1.cohort FROM Table1 T1 GROUP BY "
                 "Table1.cohort;"),
      ParseError);
  CHECK_THROWS_AS(
      lower_text("SELECT a FROM Table1 T, Table2 T USING (uid);"),
      ParseError);
  // HAVING sees output columns, not raw input ones.
  CHECK_THROWS_AS(
      lower_text("SELECT dept, COUNT(*) AS n FROM Employee GROUP BY dept "
                 "HAVING item = 'kb';"),
      ParseError);
  // Aggregates cannot nest or appear in WHERE.
  CHECK_THROWS_AS(
      lower_text("SELECT SUM(COUNT(*)) FROM Employee;"), ParseError);
  CHECK_THROWS_AS(
      lower_text("SELECT dept FROM Employee WHERE COUNT(*) > 1;"),
      ParseError);
  // Anonymized select items are keys or aggregates, nothing else.
  CHECK_THROWS_AS(
      lower_text("SELECT WITH ANONYMIZATION item, ANON_COUNT(*) FROM "
                 "Order GROUP BY uid;"),
      ParseError);
  CHECK_THROWS_AS(
      lower_text("SELECT WITH ANONYMIZATION dept FROM Employee GROUP BY "
                 "dept;"),
      ParseError);
  // Ownership violations surface at lowering.
  CHECK_THROWS_AS(
      lower_text("SELECT WITH ANONYMIZATION k, ANON_COUNT(*) FROM "
                 "open_data GROUP BY k;"),
      OwnershipError);
}

TEST_CASE("plain join keeps ordinary SQL semantics") {
  Catalog catalog = TestCatalog();
  LoweredQuery lowered = LowerQuery(
      ParseQuery("SELECT E.dept, O.item FROM Employee E, Order O USING "
                 "(uid) WHERE O.item <> 'desk';"),
      catalog);
  RandomSource rng(1);
  Relation out = EvalPlan(*lowered.plan, catalog, rng);
  // uid 1 contributes two orders, one filtered set stays: kb, mouse.
  REQUIRE(out.rows.size() == 2);
  CHECK(out.schema.columns.size() == 2);  // no uid appended in plain mode
  CHECK(out.rows[0][0] == T("eng"));

  // The grouped form works over the join too.
  LoweredQuery grouped = LowerQuery(
      ParseQuery("SELECT E.dept, COUNT(*) AS n FROM Employee E, Order O "
                 "USING (uid) GROUP BY E.dept;"),
      catalog);
  Relation counts = EvalPlan(*grouped.plan, catalog, rng);
  REQUIRE(counts.rows.size() == 1);
  CHECK(counts.rows[0][0] == T("eng"));
  CHECK(counts.rows[0][1] == I(3));
}

}  // namespace
}  // namespace dpquery
