#pragma once

#include <stdexcept>
#include <string>

namespace dpquery {

// Error taxonomy surfaced by the CLI as distinct exit codes. Everything the
// engine throws on purpose derives from Error; anything else escaping to the
// CLI is a bug and reported as internal.
enum class ErrorCategory {
  kParse,             // lexing, parsing, name resolution, type checking
  kOwnership,         // user-ownership rules violated below the anonymization op
  kPrivacyParameter,  // invalid epsilon/delta/contribution bound/clamp bounds
  kIo,                // missing or malformed input files
  kUsage,             // bad command-line invocation
  kInternal,          // broken internal invariant
};

const char* ErrorCategoryName(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

class ParseError : public Error {
 public:
  // offset is a byte position into the query text, -1 when not applicable.
  ParseError(const std::string& message, long offset = -1)
      : Error(ErrorCategory::kParse, message), offset_(offset) {}

  long offset() const { return offset_; }

 private:
  long offset_;
};

class OwnershipError : public Error {
 public:
  explicit OwnershipError(const std::string& message)
      : Error(ErrorCategory::kOwnership, message) {}
};

class PrivacyParameterError : public Error {
 public:
  explicit PrivacyParameterError(const std::string& message)
      : Error(ErrorCategory::kPrivacyParameter, message) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& message)
      : Error(ErrorCategory::kIo, message) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message)
      : Error(ErrorCategory::kUsage, message) {}
};

class InternalError : public Error {
 public:
  explicit InternalError(const std::string& message)
      : Error(ErrorCategory::kInternal, message) {}
};

}  // namespace dpquery
