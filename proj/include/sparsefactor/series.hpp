#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sparsefactor/errors.hpp"

namespace sfm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Observed p-dimensional series over n time points, stored p x n
/// (one row per variable, one column per time point).
class SeriesMatrix {
 public:
  explicit SeriesMatrix(Matrix values, std::vector<std::string> labels = {})
      : values_(std::move(values)), labels_(std::move(labels)) {
    if (values_.rows() < 1) throw InvalidArgument("series needs at least one variable");
    if (values_.cols() < 2) throw InvalidArgument("series needs at least two time points");
    if (!values_.allFinite()) throw DomainError("series contains non-finite values");
    if (!labels_.empty() && labels_.size() != static_cast<std::size_t>(values_.rows()))
      throw InvalidArgument("label count " + std::to_string(labels_.size()) +
                            " does not match variable count " + std::to_string(values_.rows()));
  }

  const Matrix& values() const noexcept { return values_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  bool has_labels() const noexcept { return !labels_.empty(); }

  Eigen::Index p() const noexcept { return values_.rows(); }
  Eigen::Index n() const noexcept { return values_.cols(); }

  // Label of variable i, falling back to "x<i+1>".
  std::string label(Eigen::Index i) const {
    if (has_labels()) return labels_[static_cast<std::size_t>(i)];
    return "x" + std::to_string(i + 1);
  }

 private:
  Matrix values_;
  std::vector<std::string> labels_;
};

struct PooledCovConfig {
  std::size_t h0 = 1;
  bool demean = true;

  void validate(const SeriesMatrix& s) const {
    if (h0 < 1 || h0 > static_cast<std::size_t>(s.n() - 1))
      throw InvalidArgument("h0 must lie in [1, n-1]; got h0=" + std::to_string(h0) +
                            " with n=" + std::to_string(s.n()));
  }
};

namespace detail {

inline std::string_view trim(std::string_view v) {
  while (!v.empty() && (v.front() == ' ' || v.front() == '\t' || v.front() == '\r')) v.remove_prefix(1);
  while (!v.empty() && (v.back() == ' ' || v.back() == '\t' || v.back() == '\r')) v.remove_suffix(1);
  return v;
}

// Splits one CSV record. Handles RFC-4180 double quotes.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
  cells.push_back(std::move(cell));
  return cells;
}

inline std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  std::string buf(text);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(buf, &used);
  } catch (const std::exception&) {
    return std::nullopt;
  }
  if (used != buf.size() || !std::isfinite(value)) return std::nullopt;
  return value;
}

}  // namespace detail

/// Parses a numeric table (rows = time points, columns = variables) and
/// returns it transposed to p x n. With `has_header` the first record
/// supplies the variable labels.
inline SeriesMatrix parse_series(std::istream& in, bool has_header) {
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  bool header_pending = has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (header_pending) {
      for (auto& c : cells) labels.emplace_back(detail::trim(c));
      width = labels.size();
      header_pending = false;
      continue;
    }
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw ParseError("row " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                           " cells, expected " + std::to_string(width),
                       line_no);
    std::vector<double> row;
    row.reserve(width);
    for (std::size_t j = 0; j < cells.size(); ++j) {
      auto v = detail::parse_double(cells[j]);
      if (!v)
        throw ParseError("non-numeric cell '" + cells[j] + "' at row " + std::to_string(line_no) +
                             ", column " + std::to_string(j + 1),
                         line_no, j + 1);
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("input contains no data rows", line_no);

  Matrix values(static_cast<Eigen::Index>(width), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t)
    for (std::size_t i = 0; i < width; ++i)
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t)) = rows[t][i];
  return SeriesMatrix(std::move(values), std::move(labels));
}

inline SeriesMatrix load_series(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'", 0);
  return parse_series(in, has_header);
}

/// Log-differences along time: out(i, t) = log s(i, t+1) - log s(i, t).
inline SeriesMatrix log_diff(const SeriesMatrix& s) {
  const Matrix& x = s.values();
  if (x.cols() < 3) throw InvalidArgument("log_diff needs at least three time points");
  for (Eigen::Index t = 0; t < x.cols(); ++t)
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (!(x(i, t) > 0.0))
        throw DomainError("log_diff requires positive values; variable " + std::to_string(i + 1) +
                          " at time " + std::to_string(t + 1) + " is " + std::to_string(x(i, t)));
  const Matrix logs = x.array().log().matrix();
  Matrix out = logs.rightCols(x.cols() - 1) - logs.leftCols(x.cols() - 1);
  return SeriesMatrix(std::move(out), s.labels());
}

/// Removes each variable's sample mean.
inline SeriesMatrix demean(const SeriesMatrix& s) {
  Matrix x = s.values();
  const Vector mean = x.rowwise().mean();
  x.colwise() -= mean;
  return SeriesMatrix(std::move(x), s.labels());
}

/// Lag-h sample autocovariance (1/(n-h)) sum_t x_t x_{t+h}^T on the series
/// as given (no centering).
inline Matrix autocov(const SeriesMatrix& s, std::size_t h) {
  const auto n = static_cast<std::size_t>(s.n());
  if (h >= n)
    throw InvalidArgument("lag " + std::to_string(h) + " must be below n=" + std::to_string(n));
  const auto m = static_cast<Eigen::Index>(n - h);
  const auto lag = static_cast<Eigen::Index>(h);
  const Matrix& x = s.values();
  return (x.leftCols(m) * x.middleCols(lag, m).transpose()) / static_cast<double>(m);
}

/// Lag-h autocovariance honoring cfg.demean.
inline Matrix autocov(const SeriesMatrix& s, std::size_t h, const PooledCovConfig& cfg) {
  return cfg.demean ? autocov(demean(s), h) : autocov(s, h);
}

/// Pooled matrix sum_{h=1}^{h0} S(h) S(h)^T, symmetric positive semidefinite.
inline Matrix build_pooled_matrix(const SeriesMatrix& s, const PooledCovConfig& cfg) {
  cfg.validate(s);
  const SeriesMatrix centered = cfg.demean ? demean(s) : s;
  Matrix m = Matrix::Zero(s.p(), s.p());
  for (std::size_t h = 1; h <= cfg.h0; ++h) {
    const Matrix sigma = autocov(centered, h);
    m.noalias() += sigma * sigma.transpose();
  }
  // Exact symmetry; the products agree only up to rounding.
  return 0.5 * (m + m.transpose());
}

}  // namespace sfm
