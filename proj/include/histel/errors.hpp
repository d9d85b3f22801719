#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace histel {

// Malformed or inconsistent input data. The CLI maps it to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid run configuration or usage. The CLI maps it to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A DataError anchored to a 1-based line of an input file.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& detail, const std::string& file = {})
      : DataError((file.empty() ? "line " : file + ":") + std::to_string(line) + ": " + detail),
        line_(line),
        detail_(detail) {}

  std::size_t line() const { return line_; }
  const std::string& detail() const { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

}  // namespace histel
