#include "dpquery/csv.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

#include "dpquery/errors.hpp"

namespace dpquery {
namespace {

using Record = std::vector<std::string>;

// Splits text into records and fields. A field starting with '"' runs to
// the matching close quote, with "" as the escaped quote; such a field may
// contain commas and newlines. "\r\n" counts as one record separator.
std::vector<Record> SplitRecords(const std::string& text,
                                 const std::string& origin) {
  std::vector<Record> records;
  Record fields;
  std::string field;
  bool in_quotes = false;
  bool record_started = false;
  std::size_t i = 0;
  while (i < text.size()) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          i += 2;
          continue;
        }
        in_quotes = false;
        ++i;
        continue;
      }
      field += c;
      ++i;
      continue;
    }
    if (c == '"' && field.empty()) {
      in_quotes = true;
      record_started = true;
      ++i;
      continue;
    }
    if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
      record_started = true;
      ++i;
      continue;
    }
    if (c == '\n' || (c == '\r' && i + 1 < text.size() &&
                      text[i + 1] == '\n')) {
      if (record_started) {
        fields.push_back(std::move(field));
        field.clear();
        records.push_back(std::move(fields));
        fields.clear();
        record_started = false;
      }
      i += c == '\r' ? 2 : 1;
      continue;
    }
    field += c;
    record_started = true;
    ++i;
  }
  if (in_quotes) {
    throw IoError(origin + ": unterminated quoted field");
  }
  if (record_started) {
    fields.push_back(std::move(field));
    records.push_back(std::move(fields));
  }
  return records;
}

bool ParsesAsInt64(const std::string& s, std::int64_t* value) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(s.c_str(), &end, 10);
  if (errno == ERANGE || end != s.c_str() + s.size()) return false;
  *value = v;
  return true;
}

bool ParsesAsDouble(const std::string& s, double* value) {
  if (s.empty()) return false;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) return false;
  *value = v;
  return true;
}

}  // namespace

Relation IngestCsvText(const std::string& text, const std::string& uid_col,
                       const std::string& origin) {
  std::vector<Record> records = SplitRecords(text, origin);
  if (records.empty()) {
    throw IoError(origin + ": empty input, expected a header record");
  }
  const Record& header = records[0];
  int uid_index = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == uid_col) {
      if (uid_index >= 0) {
        throw IoError(origin + ": duplicate uid column '" + uid_col + "'");
      }
      uid_index = static_cast<int>(i);
    }
  }
  if (uid_index < 0) {
    throw IoError(origin + ": missing uid column '" + uid_col + "'");
  }

  Relation rel;
  std::set<std::string> names;
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::string name =
        i == static_cast<std::size_t>(uid_index) ? "uid" : header[i];
    if (!names.insert(name).second) {
      throw IoError(origin + ": column name collision on '" + name + "'");
    }
    rel.schema.columns.push_back({std::move(name), ValueType::kNull});
  }
  rel.schema.uid_index = static_cast<std::size_t>(uid_index);

  std::size_t width = header.size();
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != width) {
      throw IoError(origin + ": record " + std::to_string(r) + " has " +
                    std::to_string(records[r].size()) + " fields, expected " +
                    std::to_string(width));
    }
  }

  // Narrowest type every non-empty field fits: int64, else float64, else
  // text. A column of only empty fields stays null-typed.
  for (std::size_t c = 0; c < width; ++c) {
    bool any = false;
    bool all_int = true;
    bool all_double = true;
    for (std::size_t r = 1; r < records.size(); ++r) {
      const std::string& s = records[r][c];
      if (s.empty()) continue;
      any = true;
      std::int64_t iv;
      double dv;
      if (!ParsesAsInt64(s, &iv)) all_int = false;
      if (!ParsesAsDouble(s, &dv)) all_double = false;
      if (!all_double) break;
    }
    if (!any) continue;
    rel.schema.columns[c].type = all_int     ? ValueType::kInt64
                                 : all_double ? ValueType::kFloat64
                                              : ValueType::kText;
  }

  for (std::size_t r = 1; r < records.size(); ++r) {
    Row row;
    row.reserve(width);
    for (std::size_t c = 0; c < width; ++c) {
      const std::string& s = records[r][c];
      if (s.empty()) {
        row.emplace_back(std::monostate{});
        continue;
      }
      switch (rel.schema.columns[c].type) {
        case ValueType::kInt64: {
          std::int64_t iv = 0;
          ParsesAsInt64(s, &iv);
          row.emplace_back(iv);
          break;
        }
        case ValueType::kFloat64: {
          double dv = 0;
          ParsesAsDouble(s, &dv);
          row.emplace_back(dv);
          break;
        }
        default:
          row.emplace_back(s);
          break;
      }
    }
    if (IsNull(row[uid_index])) {
      throw IoError(origin + ": record " + std::to_string(r) +
                    " has a null uid");
    }
    rel.rows.push_back(std::move(row));
  }
  return rel;
}

Relation IngestCsv(const std::string& path, const std::string& uid_col) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot read " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return IngestCsvText(buffer.str(), uid_col, path);
}

}  // namespace dpquery
