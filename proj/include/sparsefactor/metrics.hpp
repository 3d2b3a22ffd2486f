#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "sparsefactor/admm.hpp"
#include "sparsefactor/errors.hpp"
#include "sparsefactor/spectral.hpp"

namespace sfm {

/// Sequential (modified) Gram-Schmidt: s_1 = u_1, s_i = (I - S_i S_i^T) u_i,
/// each renormalized. Throws RankDeficient naming the first column whose
/// residual is below 1e-10 times the largest column norm.
inline Basis orthonormalize(const Matrix& u) {
  if (u.cols() == 0) throw InvalidArgument("orthonormalize needs at least one column");
  const double scale = u.colwise().norm().maxCoeff();
  if (!(scale > 0.0)) throw RankDeficient("all columns are zero", {0});
  Basis out;
  out.columns = u;
  Matrix& h = out.columns;
  for (Eigen::Index i = 0; i < h.cols(); ++i) {
    // Two passes keep orthogonality at rounding level.
    for (int pass = 0; pass < 2; ++pass)
      for (Eigen::Index j = 0; j < i; ++j) h.col(i) -= h.col(j).dot(h.col(i)) * h.col(j);
    const double norm = h.col(i).norm();
    if (norm <= 1e-10 * scale)
      throw RankDeficient("column " + std::to_string(i + 1) + " is linearly dependent on the previous columns",
                          {static_cast<std::size_t>(i)});
    h.col(i) /= norm;
  }
  return out;
}

/// Distance between column spans, (1 - tr(H1 H1^T H2 H2^T)/k)^{1/2} with
/// H1, H2 orthonormal bases. Lies in [0, 1]: 0 for equal spans, 1 for
/// orthogonal ones.
inline double subspace_distance(const Matrix& u1, const Matrix& u2) {
  if (u1.rows() != u2.rows() || u1.cols() != u2.cols())
    throw InvalidArgument("subspace_distance needs matrices of equal shape");
  const Matrix h1 = orthonormalize(u1).columns;
  const Matrix h2 = orthonormalize(u2).columns;
  const double k = static_cast<double>(u1.cols());
  const double overlap = (h1.transpose() * h2).squaredNorm();
  const double radicand = 1.0 - overlap / k;
  return std::sqrt(std::clamp(radicand, 0.0, 1.0));
}

struct SupportError {
  Eigen::Index m_hat = 0;  // nonzeros in the estimate
  Eigen::Index m_true = 0;
  Eigen::Index abs_diff = 0;
  std::vector<std::vector<Eigen::Index>> estimated;
  std::vector<std::vector<Eigen::Index>> truth;
};

inline SupportError support_error(const Matrix& q_hat, const Matrix& q_true) {
  if (q_hat.rows() != q_true.rows() || q_hat.cols() != q_true.cols())
    throw InvalidArgument("support_error needs matrices of equal shape");
  SupportError out;
  out.m_hat = static_cast<Eigen::Index>((q_hat.array() != 0.0).count());
  out.m_true = static_cast<Eigen::Index>((q_true.array() != 0.0).count());
  out.abs_diff = std::abs(out.m_hat - out.m_true);
  out.estimated = supports_of(q_hat);
  out.truth = supports_of(q_true);
  return out;
}

inline SupportError support_error(const LoadingMatrix& q_hat, const Matrix& q_true) {
  return support_error(q_hat.q, q_true);
}

struct ColumnAlignment {
  std::vector<Eigen::Index> permutation;  // permutation[j] = estimated column matched to true column j
  std::vector<double> signs;
  std::vector<double> cosines;            // |cos| of each matched pair
  Matrix aligned;                         // estimate with columns permuted and sign-flipped
};

/// Greedy column matching by largest |cosine|, then sign alignment.
inline ColumnAlignment align_columns(const Matrix& q_hat, const Matrix& q_true) {
  if (q_hat.rows() != q_true.rows() || q_hat.cols() != q_true.cols())
    throw InvalidArgument("align_columns needs matrices of equal shape");
  const Eigen::Index r = q_true.cols();
  if (r > 8) throw InvalidArgument("align_columns supports at most 8 columns");
  Matrix cos = Matrix::Zero(r, r);  // rows: true, cols: estimated
  for (Eigen::Index j = 0; j < r; ++j)
    for (Eigen::Index k = 0; k < r; ++k) {
      const double denom = q_true.col(j).norm() * q_hat.col(k).norm();
      cos(j, k) = denom > 0.0 ? q_true.col(j).dot(q_hat.col(k)) / denom : 0.0;
    }

  ColumnAlignment out;
  out.permutation.assign(static_cast<std::size_t>(r), -1);
  out.signs.assign(static_cast<std::size_t>(r), 1.0);
  out.cosines.assign(static_cast<std::size_t>(r), 0.0);
  std::vector<bool> true_used(static_cast<std::size_t>(r), false), est_used(static_cast<std::size_t>(r), false);
  for (Eigen::Index step = 0; step < r; ++step) {
    double best = -1.0;
    Eigen::Index bj = 0, bk = 0;
    for (Eigen::Index j = 0; j < r; ++j) {
      if (true_used[static_cast<std::size_t>(j)]) continue;
      for (Eigen::Index k = 0; k < r; ++k) {
        if (est_used[static_cast<std::size_t>(k)]) continue;
        if (std::abs(cos(j, k)) > best) {
          best = std::abs(cos(j, k));
          bj = j;
          bk = k;
        }
      }
    }
    true_used[static_cast<std::size_t>(bj)] = est_used[static_cast<std::size_t>(bk)] = true;
    out.permutation[static_cast<std::size_t>(bj)] = bk;
    out.signs[static_cast<std::size_t>(bj)] = cos(bj, bk) < 0.0 ? -1.0 : 1.0;
    out.cosines[static_cast<std::size_t>(bj)] = best;
  }
  out.aligned.resize(q_hat.rows(), r);
  for (Eigen::Index j = 0; j < r; ++j)
    out.aligned.col(j) = out.signs[static_cast<std::size_t>(j)] * q_hat.col(out.permutation[static_cast<std::size_t>(j)]);
  return out;
}

}  // namespace sfm
