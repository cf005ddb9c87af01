#pragma once

#include <string>

#include "dpquery/relation.hpp"

namespace dpquery {

// Parses CSV text into a user-owned relation. The first record is the
// header; `uid_col` names the ownership column, which comes out renamed to
// "uid". Column types are inferred from the non-empty fields (every field
// parses as int64, else every field parses as float64, else text); empty
// fields load as null, and "NaN" is a legal float64 that the clamp later
// maps to the lower bound like any other non-finite input. Quoted fields
// support embedded commas, newlines, and doubled quotes.
//
// `origin` labels error messages. Throws IoError on structural problems:
// an empty file, a ragged record, a missing uid column, a column name
// collision after the rename, a null uid, or an unterminated quote.
Relation IngestCsvText(const std::string& text, const std::string& uid_col,
                       const std::string& origin);

// File variant; also IoError when the file cannot be read.
Relation IngestCsv(const std::string& path, const std::string& uid_col);

}  // namespace dpquery
