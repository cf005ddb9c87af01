#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace dpquery {

// Null, 64-bit integer, double, or text. Nulls use monostate.
using Value = std::variant<std::monostate, std::int64_t, double, std::string>;

enum class ValueType { kNull, kInt64, kFloat64, kText };

const char* ValueTypeName(ValueType type);
ValueType TypeOf(const Value& v);
bool IsNull(const Value& v);
bool IsNumeric(ValueType type);

// Numeric coercion; NaN for null or non-numeric inputs is not implicit --
// throws EvalError for text, returns the stored number otherwise.
double AsDouble(const Value& v);

// Deterministic text form: %.17g for doubles so round-trips and golden
// output are bit-stable; empty string for null.
std::string RenderValue(const Value& v);

// Total order over all values: null < int64 < float64 < text by type tag,
// then by value. NaN compares greater than every other double and equal to
// itself, keeping sort-based grouping deterministic.
int CompareValues(const Value& a, const Value& b);

struct ValueLess {
  bool operator()(const Value& a, const Value& b) const {
    return CompareValues(a, b) < 0;
  }
  bool operator()(const std::vector<Value>& a,
                  const std::vector<Value>& b) const;
};

using Row = std::vector<Value>;

struct Column {
  std::string name;
  ValueType type = ValueType::kNull;
};

struct Schema {
  std::vector<Column> columns;
  // A relation is user-owned iff it designates a uid column; ownership is
  // carried through the operators that preserve it.
  std::optional<std::size_t> uid_index;

  bool owned() const { return uid_index.has_value(); }
  // Index of the unique column with this name; -1 when absent. Throws
  // ParseError when the name is ambiguous.
  int FindColumn(std::string_view name) const;
};

struct Relation {
  Schema schema;
  std::vector<Row> rows;

  bool owned() const { return schema.owned(); }
};

struct Catalog {
  std::map<std::string, Relation> tables;

  const Relation& Get(const std::string& name) const;  // ParseError if absent
};

}  // namespace dpquery
