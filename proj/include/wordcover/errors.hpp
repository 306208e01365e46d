#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace wordcover {

/// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnsupportedSpace : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct InvalidEpsilon : Error {
  using Error::Error;
};
struct InvalidDelta : Error {
  using Error::Error;
};
struct CapZero : Error {
  using Error::Error;
};
struct OverflowGuard : Error {
  using Error::Error;
};
struct EmptyCloud : Error {
  using Error::Error;
};
struct TooFewPoints : Error {
  using Error::Error;
};
struct SizeLimitExceeded : Error {
  using Error::Error;
};
struct BudgetExceeded : Error {
  using Error::Error;
};
struct DimensionBudgetExceeded : Error {
  using Error::Error;
};
struct BasisTooSmall : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};

/// Config text could not be parsed at all; carries 1-based line/column.
struct ParseError : Error {
  int line = 0;
  int column = 0;
  ParseError(const std::string& msg, int line_, int col_)
      : Error(msg + " (line " + std::to_string(line_) + ", column " +
              std::to_string(col_) + ")"),
        line(line_),
        column(col_) {}
};

/// Config parsed but one or more fields are invalid; every violation is listed.
struct ValidationError : Error {
  std::vector<std::string> violations;
  explicit ValidationError(std::vector<std::string> v)
      : Error(join(v)), violations(std::move(v)) {}

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string out = "invalid config:";
    for (const auto& s : v) out += "\n  - " + s;
    return out;
  }
};

}  // namespace wordcover
