#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <utility>

#include "sparsefactor/errors.hpp"
#include "sparsefactor/series.hpp"

namespace sfm {

/// p x k matrix with orthonormal columns, optionally carrying the
/// (descending) eigenvalues that produced it.
struct Basis {
  Matrix columns;
  Vector eigenvalues;  // empty when not produced by an eigen-decomposition

  Eigen::Index p() const noexcept { return columns.rows(); }
  Eigen::Index k() const noexcept { return columns.cols(); }
};

/// Flips v so that its largest-magnitude entry is positive (lowest index
/// wins ties).
inline void fix_sign(Eigen::Ref<Vector> v) {
  Eigen::Index arg = 0;
  double best = -1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (std::abs(v(i)) > best) {
      best = std::abs(v(i));
      arg = i;
    }
  }
  if (v.size() > 0 && v(arg) < 0.0) v = -v;
}

/// Leading r eigenvectors of the symmetric part of m.
inline Basis top_eigenvectors(const Matrix& m, Eigen::Index r) {
  if (m.rows() != m.cols()) throw InvalidArgument("top_eigenvectors needs a square matrix");
  if (r < 1 || r > m.rows())
    throw InvalidArgument("rank r=" + std::to_string(r) + " must lie in [1, " + std::to_string(m.rows()) + "]");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-8 * scale)
    throw InvalidArgument("top_eigenvectors needs a symmetric matrix");
  const Matrix sym = 0.5 * (m + m.transpose());

  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym);
  if (solver.info() != Eigen::Success) throw NumericError("symmetric eigen-decomposition failed");

  // Eigen returns ascending order.
  const Eigen::Index p = m.rows();
  Basis out;
  out.columns.resize(p, r);
  out.eigenvalues.resize(r);
  for (Eigen::Index j = 0; j < r; ++j) {
    out.columns.col(j) = solver.eigenvectors().col(p - 1 - j);
    out.eigenvalues(j) = solver.eigenvalues()(p - 1 - j);
    fix_sign(out.columns.col(j));
  }
  return out;
}

/// Loading-space estimate: leading r eigenvectors of the pooled lagged
/// autocovariance matrix.
inline Basis estimate_loading_space(const SeriesMatrix& s, const PooledCovConfig& cfg, Eigen::Index r) {
  if (r < 1 || r > s.p())
    throw InvalidArgument("rank r=" + std::to_string(r) + " must lie in [1, p=" + std::to_string(s.p()) + "]");
  return top_eigenvectors(build_pooled_matrix(s, cfg), r);
}

}  // namespace sfm
