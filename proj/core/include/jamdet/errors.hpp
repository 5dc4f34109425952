#pragma once

#include <stdexcept>
#include <string>

namespace jamdet {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid data, configuration, or arguments (CLI exit code 2).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(what) {}
};

/// Malformed input file. Carries the offending row (1-based data row) and field.
class ParseError : public ValidationError {
 public:
  ParseError(std::size_t row, std::string field, const std::string& what)
      : ValidationError("row " + std::to_string(row) + ": field '" + field + "': " + what),
        row_(row),
        field_(std::move(field)) {}

  std::size_t row() const { return row_; }
  const std::string& field() const { return field_; }

 private:
  std::size_t row_;
  std::string field_;
};

/// Model training failed (divergence, NaN loss, ...). CLI exit code 3.
class TrainingError : public Error {
 public:
  explicit TrainingError(const std::string& what) : Error(what) {}
};

}  // namespace jamdet
