#pragma once

#include <stdexcept>
#include <string>

namespace recap {

// Invalid or inconsistent input data (CSV parsing, schema, validation).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// A numerical routine was driven outside its domain (non-finite objective,
// missing sign change, degenerate weights).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace recap
