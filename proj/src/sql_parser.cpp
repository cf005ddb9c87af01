#include "dpquery/sql.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <initializer_list>
#include <set>
#include <utility>

#include "dpquery/errors.hpp"

namespace dpquery {

namespace {

const std::set<std::string>& Keywords() {
  static const std::set<std::string> kSet = {
      "SELECT", "WITH",   "ANONYMIZATION", "FROM",      "WHERE",
      "GROUP",  "BY",     "HAVING",        "AS",        "JOIN",
      "USING",  "AND",    "OR",            "NOT",       "NULL",
      "DISTINCT", "TABLESAMPLE", "RESERVOIR", "ROWS",   "PARTITION",
  };
  return kSet;
}

std::string Upper(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

bool IsIdentStart(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}

bool IsIdentChar(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Anonymized aggregate function names, usable only as select items of a
// WITH ANONYMIZATION query.
std::optional<AggregateKind> AnonFuncKind(const std::string& upper) {
  if (upper == "ANON_COUNT") return AggregateKind::kCount;
  if (upper == "ANON_SUM") return AggregateKind::kSum;
  if (upper == "ANON_AVG") return AggregateKind::kAvg;
  if (upper == "ANON_VAR") return AggregateKind::kVar;
  if (upper == "ANON_STDDEV") return AggregateKind::kStddev;
  if (upper == "ANON_NTILE") return AggregateKind::kNtile;
  return std::nullopt;
}

std::string FormatNumber(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::vector<Token> Tokenize(const std::string& text) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == '-' && i + 1 < n && text[i + 1] == '-') {
      while (i < n && text[i] != '\n') {
        ++i;
      }
      continue;
    }
    Token tok;
    tok.offset = i;
    if (IsIdentStart(c)) {
      std::size_t start = i;
      while (i < n && IsIdentChar(text[i])) {
        ++i;
      }
      std::string word = text.substr(start, i - start);
      std::string upper = Upper(word);
      if (Keywords().count(upper)) {
        tok.kind = TokenKind::kKeyword;
        tok.text = upper;
      } else {
        tok.kind = TokenKind::kIdentifier;
        tok.text = word;
      }
      out.push_back(std::move(tok));
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t start = i;
      bool is_float = false;
      while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) {
        ++i;
      }
      if (i < n && text[i] == '.' && i + 1 < n &&
          std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
        is_float = true;
        ++i;
        while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) {
          ++i;
        }
      }
      if (i < n && (text[i] == 'e' || text[i] == 'E')) {
        std::size_t exp = i + 1;
        if (exp < n && (text[exp] == '+' || text[exp] == '-')) {
          ++exp;
        }
        if (exp < n && std::isdigit(static_cast<unsigned char>(text[exp]))) {
          is_float = true;
          i = exp;
          while (i < n && std::isdigit(static_cast<unsigned char>(text[i]))) {
            ++i;
          }
        }
      }
      std::string digits = text.substr(start, i - start);
      tok.text = digits;
      if (is_float) {
        tok.kind = TokenKind::kFloat;
        tok.float_value = std::strtod(digits.c_str(), nullptr);
      } else {
        tok.kind = TokenKind::kInt;
        errno = 0;
        char* end = nullptr;
        long long v = std::strtoll(digits.c_str(), &end, 10);
        if (errno == ERANGE) {
          throw ParseError("integer literal out of range: " + digits,
                           static_cast<long>(start));
        }
        tok.int_value = v;
      }
      out.push_back(std::move(tok));
      continue;
    }
    if (c == '\'') {
      std::size_t start = i;
      ++i;
      std::string value;
      bool closed = false;
      while (i < n) {
        if (text[i] == '\'') {
          if (i + 1 < n && text[i + 1] == '\'') {
            value += '\'';
            i += 2;
            continue;
          }
          ++i;
          closed = true;
          break;
        }
        value += text[i];
        ++i;
      }
      if (!closed) {
        throw ParseError("unterminated text literal",
                         static_cast<long>(start));
      }
      tok.kind = TokenKind::kText;
      tok.text = std::move(value);
      out.push_back(std::move(tok));
      continue;
    }
    // Two-character operators before their one-character prefixes.
    static const char* const kTwoChar[] = {"<=", ">=", "<>", "!="};
    bool matched = false;
    for (const char* op : kTwoChar) {
      if (c == op[0] && i + 1 < n && text[i + 1] == op[1]) {
        tok.kind = TokenKind::kSymbol;
        tok.text = op;
        i += 2;
        matched = true;
        break;
      }
    }
    if (matched) {
      out.push_back(std::move(tok));
      continue;
    }
    static const std::string kSingles = "()*,;+-/=<>.";
    if (kSingles.find(c) != std::string::npos) {
      tok.kind = TokenKind::kSymbol;
      tok.text = std::string(1, c);
      ++i;
      out.push_back(std::move(tok));
      continue;
    }
    throw ParseError(std::string("unexpected character '") + c + "'",
                     static_cast<long>(i));
  }
  Token end_tok;
  end_tok.kind = TokenKind::kEnd;
  end_tok.offset = n;
  out.push_back(std::move(end_tok));
  return out;
}

namespace {

class Parser {
 public:
  Parser(std::vector<Token> tokens, const ParseOptions& options)
      : tokens_(std::move(tokens)), options_(options) {}

  QueryAst ParseTop() {
    QueryAst q = ParseQueryBody(/*nested=*/false, /*under_anon=*/false);
    ExpectSymbol(";");
    if (Peek().kind != TokenKind::kEnd) {
      Fail("end of input");
    }
    return q;
  }

 private:
  const Token& Peek(std::size_t ahead = 0) const {
    std::size_t i = pos_ + ahead;
    if (i >= tokens_.size()) {
      i = tokens_.size() - 1;
    }
    return tokens_[i];
  }

  const Token& Next() {
    const Token& t = Peek();
    if (pos_ + 1 < tokens_.size()) {
      ++pos_;
    }
    return t;
  }

  bool AtKeyword(const char* kw, std::size_t ahead = 0) const {
    const Token& t = Peek(ahead);
    return t.kind == TokenKind::kKeyword && t.text == kw;
  }

  bool AtSymbol(const char* sym, std::size_t ahead = 0) const {
    const Token& t = Peek(ahead);
    return t.kind == TokenKind::kSymbol && t.text == sym;
  }

  bool AcceptKeyword(const char* kw) {
    if (AtKeyword(kw)) {
      Next();
      return true;
    }
    return false;
  }

  bool AcceptSymbol(const char* sym) {
    if (AtSymbol(sym)) {
      Next();
      return true;
    }
    return false;
  }

  void ExpectKeyword(const char* kw) {
    if (!AcceptKeyword(kw)) {
      Fail(std::string("'") + kw + "'");
    }
  }

  void ExpectSymbol(const char* sym) {
    if (!AcceptSymbol(sym)) {
      Fail(std::string("'") + sym + "'");
    }
  }

  std::string ExpectIdentifier(const char* what) {
    if (Peek().kind != TokenKind::kIdentifier) {
      Fail(what);
    }
    return Next().text;
  }

  static std::string Describe(const Token& t) {
    switch (t.kind) {
      case TokenKind::kKeyword:
      case TokenKind::kSymbol:
        return "'" + t.text + "'";
      case TokenKind::kIdentifier:
        return "identifier '" + t.text + "'";
      case TokenKind::kInt:
      case TokenKind::kFloat:
        return "number " + t.text;
      case TokenKind::kText:
        return "text literal";
      case TokenKind::kEnd:
        return "end of input";
    }
    return "token";
  }

  [[noreturn]] void Fail(const std::string& expected) const {
    const Token& t = Peek();
    throw ParseError("expected " + expected + ", found " + Describe(t),
                     static_cast<long>(t.offset));
  }

  [[noreturn]] void FailAt(const Token& t, const std::string& message) const {
    throw ParseError(message, static_cast<long>(t.offset));
  }

  QueryAst ParseQueryBody(bool nested, bool under_anon) {
    QueryAst q;
    ExpectKeyword("SELECT");
    if (AcceptKeyword("WITH")) {
      ExpectKeyword("ANONYMIZATION");
      q.with_anonymization = true;
    }
    if (nested && q.with_anonymization) {
      FailAt(Peek(),
             "WITH ANONYMIZATION applies only to the outermost query");
    }
    q.items.push_back(ParseSelectItem(q.with_anonymization));
    while (AcceptSymbol(",")) {
      q.items.push_back(ParseSelectItem(q.with_anonymization));
    }
    ExpectKeyword("FROM");
    bool anon_scope = under_anon || q.with_anonymization;
    q.from.push_back(ParseTableRef(nested, anon_scope));
    while (true) {
      if (AcceptSymbol(",") || AcceptKeyword("JOIN")) {
        q.from.push_back(ParseTableRef(nested, anon_scope));
        ExpectKeyword("USING");
        ExpectSymbol("(");
        const Token& uid = Peek();
        std::string name = ExpectIdentifier("'uid'");
        if (name != "uid") {
          FailAt(uid, "joins must use the uid column");
        }
        ExpectSymbol(")");
        continue;
      }
      break;
    }
    if (AcceptKeyword("WHERE")) {
      q.where = ParseExpr();
    }
    if (AcceptKeyword("GROUP")) {
      ExpectKeyword("BY");
      q.group_by.push_back(ParseQualifiedName());
      while (AcceptSymbol(",")) {
        q.group_by.push_back(ParseQualifiedName());
      }
    }
    if (AtKeyword("HAVING")) {
      if (q.with_anonymization) {
        FailAt(Peek(),
               "HAVING is not allowed in anonymized queries; low-count "
               "groups are dropped by the threshold instead");
      }
      Next();
      q.having = ParseExpr();
    }
    return q;
  }

  SelectItemAst ParseSelectItem(bool with_anonymization) {
    SelectItemAst item;
    if (Peek().kind == TokenKind::kIdentifier && AtSymbol("(", 1)) {
      auto kind = AnonFuncKind(Upper(Peek().text));
      if (kind.has_value()) {
        if (!with_anonymization) {
          FailAt(Peek(), Upper(Peek().text) +
                             " requires SELECT WITH ANONYMIZATION");
        }
        item.anon = ParseAnonCall(*kind);
      }
    }
    if (!item.anon.has_value()) {
      item.expr = ParseExpr();
    }
    if (AcceptKeyword("AS")) {
      item.alias = ExpectIdentifier("an alias identifier");
    } else if (Peek().kind == TokenKind::kIdentifier) {
      item.alias = Next().text;
    }
    return item;
  }

  AnonCallAst ParseAnonCall(AggregateKind kind) {
    AnonCallAst call;
    call.kind = kind;
    Next();  // function name
    ExpectSymbol("(");
    if (kind == AggregateKind::kCount) {
      if (!AcceptSymbol("*")) {
        Fail("'*' (ANON_COUNT counts rows per group)");
      }
    } else {
      call.arg = ParseExpr();
    }
    if (kind == AggregateKind::kNtile) {
      ExpectSymbol(",");
      call.ntile_rank = ParseSignedNumber("a quantile rank literal");
    }
    if (AcceptSymbol(",")) {
      double lower = ParseSignedNumber("a lower-bound literal");
      ExpectSymbol(",");
      double upper = ParseSignedNumber("an upper-bound literal");
      call.bounds = ClampBounds(lower, upper);
    }
    ExpectSymbol(")");
    return call;
  }

  double ParseSignedNumber(const char* what) {
    bool negative = AcceptSymbol("-");
    const Token& t = Peek();
    double v = 0.0;
    if (t.kind == TokenKind::kInt) {
      v = static_cast<double>(t.int_value);
    } else if (t.kind == TokenKind::kFloat) {
      v = t.float_value;
    } else {
      Fail(what);
    }
    Next();
    return negative ? -v : v;
  }

  TableRefAst ParseTableRef(bool nested, bool under_anon) {
    TableRefAst ref;
    if (AtSymbol("(")) {
      if (nested) {
        FailAt(Peek(), "table subqueries cannot nest");
      }
      Next();
      auto sub = std::make_unique<QueryAst>(
          ParseQueryBody(/*nested=*/true, under_anon));
      ExpectSymbol(")");
      ref.subquery = std::move(sub);
    } else {
      ref.table = ExpectIdentifier("a table name or subquery");
    }
    if (AcceptKeyword("AS")) {
      ref.alias = ExpectIdentifier("an alias identifier");
    } else if (Peek().kind == TokenKind::kIdentifier) {
      ref.alias = Next().text;
    }
    if (AtKeyword("TABLESAMPLE")) {
      const Token& at = Peek();
      if (under_anon) {
        FailAt(at,
               "TABLESAMPLE is not allowed in anonymized queries; the "
               "rewrite inserts its own contribution bounding");
      }
      if (!options_.allow_reservoir_sample) {
        FailAt(at, "TABLESAMPLE RESERVOIR is accepted only in debug mode");
      }
      Next();
      ExpectKeyword("RESERVOIR");
      ExpectSymbol("(");
      const Token& rows = Peek();
      if (rows.kind != TokenKind::kInt) {
        Fail("a row-count literal");
      }
      if (rows.int_value < 1) {
        FailAt(rows, "reservoir row count must be at least 1");
      }
      ref.has_sample = true;
      ref.sample_rows = rows.int_value;
      Next();
      ExpectKeyword("ROWS");
      ExpectKeyword("PARTITION");
      ExpectKeyword("BY");
      const Token& uid = Peek();
      std::string name = ExpectIdentifier("'uid'");
      if (name != "uid") {
        FailAt(uid, "reservoir sampling must partition by the uid column");
      }
      ExpectSymbol(")");
    }
    return ref;
  }

  std::string ParseQualifiedName() {
    std::string name = ExpectIdentifier("a column name");
    if (AcceptSymbol(".")) {
      name += "." + ExpectIdentifier("a column name after '.'");
    }
    return name;
  }

  // Expression grammar, loosest binding first:
  //   OR < AND < NOT < comparison < additive < multiplicative < unary.
  ExprPtr ParseExpr() { return ParseOr(); }

  ExprPtr ParseOr() {
    ExprPtr e = ParseAnd();
    while (AcceptKeyword("OR")) {
      e = Bin(BinaryOp::kOr, e, ParseAnd());
    }
    return e;
  }

  ExprPtr ParseAnd() {
    ExprPtr e = ParseNot();
    while (AcceptKeyword("AND")) {
      e = Bin(BinaryOp::kAnd, e, ParseNot());
    }
    return e;
  }

  ExprPtr ParseNot() {
    if (AcceptKeyword("NOT")) {
      return Unary(UnaryOp::kNot, ParseNot());
    }
    return ParseComparison();
  }

  ExprPtr ParseComparison() {
    ExprPtr e = ParseAdditive();
    struct CmpOp {
      const char* sym;
      BinaryOp op;
    };
    static const CmpOp kOps[] = {
        {"<=", BinaryOp::kLe}, {">=", BinaryOp::kGe}, {"<>", BinaryOp::kNe},
        {"!=", BinaryOp::kNe}, {"=", BinaryOp::kEq},  {"<", BinaryOp::kLt},
        {">", BinaryOp::kGt},
    };
    for (const auto& cmp : kOps) {
      if (AcceptSymbol(cmp.sym)) {
        return Bin(cmp.op, e, ParseAdditive());
      }
    }
    return e;
  }

  ExprPtr ParseAdditive() {
    ExprPtr e = ParseMultiplicative();
    while (true) {
      if (AcceptSymbol("+")) {
        e = Bin(BinaryOp::kAdd, e, ParseMultiplicative());
      } else if (AcceptSymbol("-")) {
        e = Bin(BinaryOp::kSub, e, ParseMultiplicative());
      } else {
        return e;
      }
    }
  }

  ExprPtr ParseMultiplicative() {
    ExprPtr e = ParseUnary();
    while (true) {
      if (AcceptSymbol("*")) {
        e = Bin(BinaryOp::kMul, e, ParseUnary());
      } else if (AcceptSymbol("/")) {
        e = Bin(BinaryOp::kDiv, e, ParseUnary());
      } else {
        return e;
      }
    }
  }

  ExprPtr ParseUnary() {
    if (AcceptSymbol("-")) {
      return Unary(UnaryOp::kNeg, ParseUnary());
    }
    return ParsePrimary();
  }

  ExprPtr ParsePrimary() {
    const Token& t = Peek();
    switch (t.kind) {
      case TokenKind::kInt: {
        std::int64_t v = t.int_value;
        Next();
        return Lit(Value(v));
      }
      case TokenKind::kFloat: {
        double v = t.float_value;
        Next();
        return Lit(Value(v));
      }
      case TokenKind::kText: {
        std::string v = t.text;
        Next();
        return Lit(Value(std::move(v)));
      }
      case TokenKind::kKeyword:
        if (t.text == "NULL") {
          Next();
          return Lit(Value());
        }
        Fail("an expression");
      case TokenKind::kSymbol:
        if (t.text == "(") {
          Next();
          ExprPtr e = ParseExpr();
          ExpectSymbol(")");
          return e;
        }
        Fail("an expression");
      case TokenKind::kIdentifier:
        break;
      default:
        Fail("an expression");
    }
    std::string name = Next().text;
    if (AtSymbol("(")) {
      if (AnonFuncKind(Upper(name)).has_value()) {
        FailAt(t, Upper(name) +
                      " is only allowed as a select item of a query "
                      "with SELECT WITH ANONYMIZATION");
      }
      return ParseCallArgs(std::move(name));
    }
    if (AcceptSymbol(".")) {
      name += "." + ExpectIdentifier("a column name after '.'");
    }
    return Col(std::move(name));
  }

  ExprPtr ParseCallArgs(std::string name) {
    ExpectSymbol("(");
    bool star = false;
    bool distinct = false;
    std::vector<ExprPtr> args;
    if (AcceptSymbol("*")) {
      star = true;
    } else if (AcceptKeyword("DISTINCT")) {
      distinct = true;
      args.push_back(ParseExpr());
    } else if (!AtSymbol(")")) {
      args.push_back(ParseExpr());
      while (AcceptSymbol(",")) {
        args.push_back(ParseExpr());
      }
    }
    ExpectSymbol(")");
    return Call(std::move(name), std::move(args), star, distinct);
  }

  std::vector<Token> tokens_;
  ParseOptions options_;
  std::size_t pos_ = 0;
};

std::string RenderAnonCall(const AnonCallAst& call) {
  std::string out = Upper(std::string("anon_") + AggregateKindName(call.kind));
  out += "(";
  if (call.kind == AggregateKind::kCount) {
    out += "*";
  } else {
    out += RenderExpr(call.arg);
  }
  if (call.kind == AggregateKind::kNtile) {
    out += ", " + FormatNumber(call.ntile_rank);
  }
  if (call.bounds.has_value()) {
    out += ", " + FormatNumber(call.bounds->lower);
    out += ", " + FormatNumber(call.bounds->upper);
  }
  return out + ")";
}

std::string RenderQueryBody(const QueryAst& q) {
  std::string out = "SELECT ";
  if (q.with_anonymization) {
    out += "WITH ANONYMIZATION ";
  }
  for (std::size_t i = 0; i < q.items.size(); ++i) {
    if (i > 0) {
      out += ", ";
    }
    const SelectItemAst& item = q.items[i];
    out += item.anon.has_value() ? RenderAnonCall(*item.anon)
                                 : RenderExpr(item.expr);
    if (!item.alias.empty()) {
      out += " AS " + item.alias;
    }
  }
  out += " FROM ";
  for (std::size_t i = 0; i < q.from.size(); ++i) {
    if (i > 0) {
      out += ", ";
    }
    const TableRefAst& ref = q.from[i];
    if (ref.subquery) {
      out += "(" + RenderQueryBody(*ref.subquery) + ")";
    } else {
      out += ref.table;
    }
    if (!ref.alias.empty()) {
      out += " " + ref.alias;
    }
    if (ref.has_sample) {
      out += " TABLESAMPLE RESERVOIR (" + std::to_string(ref.sample_rows) +
             " ROWS PARTITION BY uid)";
    }
    if (i > 0) {
      out += " USING (uid)";
    }
  }
  if (q.where) {
    out += " WHERE " + RenderExpr(q.where);
  }
  if (!q.group_by.empty()) {
    out += " GROUP BY ";
    for (std::size_t i = 0; i < q.group_by.size(); ++i) {
      if (i > 0) {
        out += ", ";
      }
      out += q.group_by[i];
    }
  }
  if (q.having) {
    out += " HAVING " + RenderExpr(q.having);
  }
  return out;
}

}  // namespace

QueryAst ParseQuery(const std::string& text, const ParseOptions& options) {
  Parser parser(Tokenize(text), options);
  return parser.ParseTop();
}

std::string RenderQuery(const QueryAst& query) {
  return RenderQueryBody(query) + ";";
}

}  // namespace dpquery
