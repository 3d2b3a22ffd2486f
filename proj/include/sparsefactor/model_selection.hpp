#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "sparsefactor/admm.hpp"
#include "sparsefactor/errors.hpp"
#include "sparsefactor/series.hpp"
#include "sparsefactor/spectral.hpp"

namespace sfm {

namespace detail {

// Throws RankDeficient unless Q^T Q is safely invertible.
inline void require_full_rank(const Matrix& q) {
  std::vector<std::size_t> zero;
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    if (q.col(j).squaredNorm() == 0.0) zero.push_back(static_cast<std::size_t>(j));
  if (!zero.empty()) {
    std::string names;
    for (auto j : zero) names += (names.empty() ? "" : ", ") + std::to_string(j + 1);
    throw RankDeficient("loading matrix has zero column(s) " + names, zero);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(q.transpose() * q, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo >= 1e12) {
    Eigen::ColPivHouseholderQR<Matrix> qr(q);
    qr.setThreshold(1e-6);
    std::vector<std::size_t> dependent;
    for (Eigen::Index k = qr.rank(); k < q.cols(); ++k)
      dependent.push_back(static_cast<std::size_t>(qr.colsPermutation().indices()(k)));
    if (dependent.empty()) dependent.push_back(static_cast<std::size_t>(q.cols() - 1));
    std::string names;
    for (auto j : dependent) names += (names.empty() ? "" : ", ") + std::to_string(j + 1);
    throw RankDeficient("loading matrix is numerically rank deficient; dependent column(s) " + names, dependent);
  }
}

}  // namespace detail

/// Factor series z_t = (Q^T Q)^{-1} Q^T x_t, returned r x n.
inline Matrix recover_factors(const Matrix& q, const SeriesMatrix& s) {
  if (q.rows() != s.p()) throw InvalidArgument("loading rows must match the number of variables");
  detail::require_full_rank(q);
  return (q.transpose() * q).ldlt().solve(q.transpose() * s.values());
}

inline Matrix recover_factors(const LoadingMatrix& q, const SeriesMatrix& s) { return recover_factors(q.q, s); }

/// Projection of every x_t onto the column space of Q.
inline SeriesMatrix fitted_values(const Matrix& q, const SeriesMatrix& s) {
  return SeriesMatrix(q * recover_factors(q, s), s.labels());
}

inline SeriesMatrix fitted_values(const LoadingMatrix& q, const SeriesMatrix& s) { return fitted_values(q.q, s); }

struct BicValue {
  double value = 0.0;
  double rss = 0.0;
  Eigen::Index nonzeros = 0;
  bool degenerate = false;  // zero residual; value is -infinity
};

/// log(RSS / (n p)) + log(n p)/(n p) * |Q|, with |Q| the nonzero count.
inline BicValue bic(const SeriesMatrix& s, const Matrix& q) {
  const Matrix resid = s.values() - q * recover_factors(q, s);
  const double np = static_cast<double>(s.n()) * static_cast<double>(s.p());
  BicValue out;
  out.rss = resid.squaredNorm();
  out.nonzeros = static_cast<Eigen::Index>((q.array() != 0.0).count());
  if (out.rss <= 1e-24 * std::max(1.0, s.values().squaredNorm())) {
    out.degenerate = true;
    out.value = -std::numeric_limits<double>::infinity();
    return out;
  }
  out.value = std::log(out.rss / np) + std::log(np) / np * static_cast<double>(out.nonzeros);
  return out;
}

inline BicValue bic(const SeriesMatrix& s, const LoadingMatrix& q) { return bic(s, q.q); }

/// Smallest lambda that zeroes the first column's first q-update: the
/// largest |X_j^T y| for the identity design started from the leading
/// varimax direction.
inline double lambda_max(const Basis& s_hat, const AdmmOptions& opts = {}, L1Order order = L1Order::Ascending) {
  const Matrix starts = initial_directions(s_hat, order);
  const GramOperator g(s_hat.columns);
  const ComplementProjector b(s_hat.p());
  const Vector q0 = starts.col(0);
  const Vector v = Vector::Zero(q0.size());
  const Vector s = update_s(g, b, q0, v, opts.rho);
  const Vector y = (v + opts.rho * s + g.apply(s)) / std::sqrt(opts.rho);
  return std::sqrt(opts.rho) * y.cwiseAbs().maxCoeff();
}

/// Geometric grid of `count` values from lambda_max down to lambda_max * min_ratio.
inline std::vector<double> geometric_grid(double top, std::size_t count, double min_ratio) {
  if (count < 2) throw InvalidArgument("lambda grid needs at least two points");
  if (!(min_ratio > 0.0 && min_ratio < 1.0)) throw InvalidArgument("min_ratio must lie in (0, 1)");
  if (!(top > 0.0)) throw InvalidArgument("lambda_max must be positive");
  std::vector<double> grid(count);
  const double step = std::log(min_ratio) / static_cast<double>(count - 1);
  for (std::size_t k = 0; k < count; ++k) grid[k] = top * std::exp(step * static_cast<double>(k));
  grid.front() = top;
  grid.back() = top * min_ratio;
  return grid;
}

inline std::vector<double> lambda_grid(const Basis& s_hat, std::size_t count = 50, double min_ratio = 1e-3,
                                       const AdmmOptions& opts = {}) {
  return geometric_grid(lambda_max(s_hat, opts), count, min_ratio);
}

struct SelectionOptions {
  AdmmOptions admm{};
  double gamma = 3.0;
  PenaltyKind kind = PenaltyKind::Mcp;
  L1Order order = L1Order::Ascending;
  unsigned threads = 1;  // grid points fitted concurrently
};

/// One evaluated grid point.
struct GridPoint {
  double lambda = 0.0;
  BicValue bic{};
  Eigen::Index nonzeros = 0;
  bool usable = false;  // fit succeeded and BIC is finite
  std::string failure;
};

struct FactorModelFit {
  LoadingMatrix loading;
  Matrix factors;  // r x n
  double bic = 0.0;
  double lambda = 0.0;
  std::vector<GridPoint> path;
};

/// Fits the loadings at a fixed lambda and scores them.
inline FactorModelFit fit_at_lambda(const SeriesMatrix& s, const Basis& s_hat, double lambda,
                                    const SelectionOptions& opts = {}, std::span<const double> fallback = {}) {
  FactorModelFit fit;
  fit.lambda = lambda;
  fit.loading = estimate_loadings(s_hat, PenaltySpec{lambda, opts.gamma, opts.kind}, opts.admm, fallback, opts.order);
  const BicValue b = bic(s, fit.loading);
  fit.bic = b.value;
  fit.factors = recover_factors(fit.loading, s);
  GridPoint point;
  point.lambda = lambda;
  point.bic = b;
  point.nonzeros = b.nonzeros;
  point.usable = !b.degenerate;
  fit.path.push_back(point);
  return fit;
}

/// Fits every lambda on the grid and keeps the BIC minimizer. Ties go to
/// the larger lambda. Fits that fail or have a degenerate (zero residual)
/// BIC are not eligible.
inline FactorModelFit select_lambda(const SeriesMatrix& s, const Basis& s_hat, std::span<const double> grid,
                                    const SelectionOptions& opts = {}) {
  if (grid.empty()) throw InvalidArgument("lambda grid is empty");
  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());

  std::vector<std::optional<FactorModelFit>> fits(sorted.size());
  std::vector<GridPoint> path(sorted.size());
  auto evaluate = [&](std::size_t k) {
    path[k].lambda = sorted[k];
    try {
      FactorModelFit f = fit_at_lambda(s, s_hat, sorted[k], opts, sorted);
      path[k] = f.path.front();
      fits[k] = std::move(f);
    } catch (const Error& e) {
      path[k].failure = e.what();
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(sorted.size())));
  if (workers == 1) {
    for (std::size_t k = 0; k < sorted.size(); ++k) evaluate(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < sorted.size(); k = next++) evaluate(k);
      });
    pool.clear();
  }

  std::size_t best = sorted.size();
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    if (!fits[k] || !path[k].usable) continue;
    // Strict comparison keeps the earlier (larger) lambda on ties.
    if (best == sorted.size() || path[k].bic.value < path[best].bic.value) best = k;
  }
  if (best == sorted.size()) throw SelectionError("no lambda on the grid produced a usable fit");
  FactorModelFit out = std::move(*fits[best]);
  out.path = std::move(path);
  return out;
}

}  // namespace sfm
