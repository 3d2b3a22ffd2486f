#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "sparsefactor/errors.hpp"
#include "sparsefactor/spectral.hpp"

namespace sfm {

/// Raw varimax criterion (1/p) sum_j [ sum_i s_ij^4 - (1/p) (sum_i s_ij^2)^2 ].
inline double varimax_criterion(const Matrix& s) {
  if (s.rows() == 0) return 0.0;
  const double p = static_cast<double>(s.rows());
  const Matrix sq = s.array().square().matrix();
  double total = 0.0;
  for (Eigen::Index j = 0; j < s.cols(); ++j) {
    const double sum2 = sq.col(j).sum();
    total += sq.col(j).squaredNorm() - sum2 * sum2 / p;
  }
  return total / p;
}

struct VarimaxOptions {
  double tol = 1e-8;
  int max_sweeps = 500;
};

struct VarimaxResult {
  Basis basis;
  Matrix rotation;  // r x r orthogonal, basis.columns = input * rotation
  double criterion = 0.0;
  int sweeps = 0;
  bool converged = false;
};

namespace detail {

// Criterion contribution of two columns (without the 1/p factor).
inline double pair_criterion(const Vector& x, const Vector& y) {
  const double p = static_cast<double>(x.size());
  const double sx = x.squaredNorm();
  const double sy = y.squaredNorm();
  return x.array().pow(4).sum() - sx * sx / p + y.array().pow(4).sum() - sy * sy / p;
}

}  // namespace detail

/// Orthogonal varimax rotation by cyclic pairwise planar rotations. Each
/// pair uses the closed-form optimal angle; a rotation that would lower the
/// criterion is skipped, so the criterion never decreases.
inline VarimaxResult varimax_rotate(const Basis& s, const VarimaxOptions& opts = {}) {
  if (!(opts.tol > 0.0)) throw InvalidArgument("varimax tolerance must be positive");
  const Eigen::Index r = s.k();
  const double p = static_cast<double>(s.p());

  VarimaxResult out;
  out.basis.columns = s.columns;
  out.rotation = Matrix::Identity(r, r);
  out.criterion = varimax_criterion(s.columns);
  if (r < 2) {
    out.converged = true;
    return out;
  }

  Matrix& l = out.basis.columns;
  for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
    const double before = out.criterion;
    for (Eigen::Index j = 0; j + 1 < r; ++j) {
      for (Eigen::Index k = j + 1; k < r; ++k) {
        const Vector x = l.col(j);
        const Vector y = l.col(k);
        const Eigen::ArrayXd u = x.array().square() - y.array().square();
        const Eigen::ArrayXd v = 2.0 * x.array() * y.array();
        const double a = u.sum();
        const double b = v.sum();
        const double c = (u.square() - v.square()).sum();
        const double d = 2.0 * (u * v).sum();
        const double num = d - 2.0 * a * b / p;
        const double den = c - (a * a - b * b) / p;
        if (std::abs(num) < 1e-300 && den >= 0.0) continue;
        const double theta = 0.25 * std::atan2(num, den);
        const double cs = std::cos(theta);
        const double sn = std::sin(theta);
        const Vector nx = cs * x + sn * y;
        const Vector ny = -sn * x + cs * y;
        if (detail::pair_criterion(nx, ny) < detail::pair_criterion(x, y)) continue;
        l.col(j) = nx;
        l.col(k) = ny;
        const Vector rj = out.rotation.col(j);
        const Vector rk = out.rotation.col(k);
        out.rotation.col(j) = cs * rj + sn * rk;
        out.rotation.col(k) = -sn * rj + cs * rk;
      }
    }
    out.criterion = varimax_criterion(l);
    out.sweeps = sweep;
    if (out.criterion - before < opts.tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

/// Which end of the L1 ordering comes first.
enum class L1Order { Ascending, Descending };

/// Column permutation sorting by column L1 norm; stable on ties.
inline std::vector<Eigen::Index> l1_order(const Matrix& s, L1Order order = L1Order::Ascending) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(s.cols()));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::vector<double> norms(perm.size());
  for (Eigen::Index j = 0; j < s.cols(); ++j) norms[static_cast<std::size_t>(j)] = s.col(j).lpNorm<1>();
  std::stable_sort(perm.begin(), perm.end(), [&](Eigen::Index a, Eigen::Index b) {
    const double na = norms[static_cast<std::size_t>(a)];
    const double nb = norms[static_cast<std::size_t>(b)];
    return order == L1Order::Ascending ? na < nb : na > nb;
  });
  return perm;
}

inline Matrix order_by_l1(const Matrix& s, L1Order order = L1Order::Ascending) {
  const auto perm = l1_order(s, order);
  Matrix out(s.rows(), s.cols());
  for (std::size_t j = 0; j < perm.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = s.col(perm[j]);
  return out;
}

/// Zeroes entries strictly below t in magnitude.
inline Matrix threshold_loadings(const Matrix& s, double t) {
  if (t < 0.0) throw InvalidArgument("threshold must be nonnegative");
  return s.unaryExpr([t](double x) { return std::abs(x) < t ? 0.0 : x; });
}

}  // namespace sfm
