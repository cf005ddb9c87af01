#include "dpquery/relation.hpp"

#include <cmath>
#include <cstdio>

#include "dpquery/errors.hpp"
#include "dpquery/expr.hpp"

namespace dpquery {

const char* ValueTypeName(ValueType type) {
  switch (type) {
    case ValueType::kNull:
      return "null";
    case ValueType::kInt64:
      return "int64";
    case ValueType::kFloat64:
      return "float64";
    case ValueType::kText:
      return "text";
  }
  return "unknown";
}

ValueType TypeOf(const Value& v) {
  return static_cast<ValueType>(v.index());
}

bool IsNull(const Value& v) {
  return std::holds_alternative<std::monostate>(v);
}

bool IsNumeric(ValueType type) {
  return type == ValueType::kInt64 || type == ValueType::kFloat64;
}

double AsDouble(const Value& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) {
    return static_cast<double>(*i);
  }
  if (const auto* d = std::get_if<double>(&v)) {
    return *d;
  }
  if (IsNull(v)) {
    return std::nan("");
  }
  throw EvalError("text value where a number is required");
}

std::string RenderValue(const Value& v) {
  switch (TypeOf(v)) {
    case ValueType::kNull:
      return "";
    case ValueType::kInt64: {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%lld",
                    static_cast<long long>(std::get<std::int64_t>(v)));
      return buf;
    }
    case ValueType::kFloat64: {
      double d = std::get<double>(v);
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", d);
      return buf;
    }
    case ValueType::kText:
      return std::get<std::string>(v);
  }
  return "";
}

int CompareValues(const Value& a, const Value& b) {
  if (a.index() != b.index()) {
    return a.index() < b.index() ? -1 : 1;
  }
  switch (TypeOf(a)) {
    case ValueType::kNull:
      return 0;
    case ValueType::kInt64: {
      auto x = std::get<std::int64_t>(a);
      auto y = std::get<std::int64_t>(b);
      return x < y ? -1 : (x > y ? 1 : 0);
    }
    case ValueType::kFloat64: {
      double x = std::get<double>(a);
      double y = std::get<double>(b);
      // NaN sorts above every number and equal to itself.
      bool nx = std::isnan(x);
      bool ny = std::isnan(y);
      if (nx || ny) {
        return nx == ny ? 0 : (nx ? 1 : -1);
      }
      return x < y ? -1 : (x > y ? 1 : 0);
    }
    case ValueType::kText:
      return std::get<std::string>(a).compare(std::get<std::string>(b)) < 0
                 ? -1
                 : (std::get<std::string>(a) == std::get<std::string>(b) ? 0
                                                                         : 1);
  }
  return 0;
}

bool ValueLess::operator()(const std::vector<Value>& a,
                           const std::vector<Value>& b) const {
  std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    int c = CompareValues(a[i], b[i]);
    if (c != 0) {
      return c < 0;
    }
  }
  return a.size() < b.size();
}

int Schema::FindColumn(std::string_view name) const {
  int found = -1;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == name) {
      if (found >= 0) {
        throw ParseError("ambiguous column name: " + std::string(name));
      }
      found = static_cast<int>(i);
    }
  }
  return found;
}

const Relation& Catalog::Get(const std::string& name) const {
  auto it = tables.find(name);
  if (it == tables.end()) {
    throw ParseError("unknown table: " + name);
  }
  return it->second;
}

}  // namespace dpquery
