#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfm {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input table. Row and column are 1-based positions in the file;
// column is 0 when the whole row is at fault.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row, std::size_t column = 0)
      : Error(what), row_(row), column_(column) {}
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

// Argument outside the mathematical domain of an operation (log of a
// non-positive value, negative weight, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Shape or parameter mismatch (lag too large, rank above dimension, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// The s-update direction vanished; the ADMM caller restarts from a
// perturbed initial value.
class DegenerateDirection : public NumericError {
 public:
  using NumericError::NumericError;
};

// Matrix without full column rank. `columns` holds the 0-based indices of
// the offending columns.
class RankDeficient : public NumericError {
 public:
  RankDeficient(const std::string& what, std::vector<std::size_t> columns)
      : NumericError(what), columns_(std::move(columns)) {}
  const std::vector<std::size_t>& columns() const noexcept { return columns_; }

 private:
  std::vector<std::size_t> columns_;
};

class SelectionError : public NumericError {
 public:
  using NumericError::NumericError;
};

// Invalid simulation or experiment configuration.
class DesignError : public Error {
 public:
  using Error::Error;
};

}  // namespace sfm
