#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <limits>
#include <string>
#include <vector>

#include "sparsefactor/errors.hpp"
#include "sparsefactor/series.hpp"

namespace sfm {

enum class PenaltyKind { Mcp, L1, Scad };

/// Regularization weight and concavity. gamma is the MCP concavity (and
/// the SCAD `a` parameter when kind == Scad).
struct PenaltySpec {
  double lambda = 0.0;
  double gamma = 3.0;
  PenaltyKind kind = PenaltyKind::Mcp;

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw InvalidArgument("lambda must be finite and >= 0");
    if (kind == PenaltyKind::Mcp && !(gamma > 1.0)) throw InvalidArgument("MCP gamma must exceed 1");
    if (kind == PenaltyKind::Scad && !(gamma > 2.0)) throw InvalidArgument("SCAD a must exceed 2");
  }
};

namespace detail {

// One piece of a penalty written as c0 + c1 t + c2 t^2 on [lo, hi], t = |x|.
struct PenaltyPiece {
  double lo, hi, c0, c1, c2;
};

inline int penalty_pieces(const PenaltySpec& spec, std::array<PenaltyPiece, 3>& out) {
  const double l = spec.lambda;
  const double inf = std::numeric_limits<double>::infinity();
  switch (spec.kind) {
    case PenaltyKind::L1:
      out[0] = {0.0, inf, 0.0, l, 0.0};
      return 1;
    case PenaltyKind::Mcp: {
      const double g = spec.gamma;
      out[0] = {0.0, g * l, 0.0, l, -0.5 / g};
      out[1] = {g * l, inf, 0.5 * g * l * l, 0.0, 0.0};
      return 2;
    }
    case PenaltyKind::Scad: {
      const double a = spec.gamma;
      out[0] = {0.0, l, 0.0, l, 0.0};
      out[1] = {l, a * l, -0.5 * l * l / (a - 1.0), a * l / (a - 1.0), -0.5 / (a - 1.0)};
      out[2] = {a * l, inf, 0.5 * (a + 1.0) * l * l, 0.0, 0.0};
      return 3;
    }
  }
  return 0;
}

}  // namespace detail

/// Penalty value at x.
inline double penalty_value(double x, const PenaltySpec& spec) {
  const double t = std::abs(x);
  std::array<detail::PenaltyPiece, 3> pieces{};
  const int count = detail::penalty_pieces(spec, pieces);
  for (int k = 0; k < count; ++k) {
    const auto& pc = pieces[static_cast<std::size_t>(k)];
    if (t <= pc.hi) return pc.c0 + pc.c1 * t + pc.c2 * t * t;
  }
  return 0.0;
}

/// MCP: lambda|x| - x^2/(2 gamma) for |x| <= gamma lambda, gamma lambda^2 / 2 beyond.
inline double mcp_value(double x, double lambda, double gamma = 3.0) {
  return penalty_value(x, PenaltySpec{lambda, gamma, PenaltyKind::Mcp});
}

/// Exact minimizer of 0.5 w (z - q)^2 + P(|q|).
///
/// The objective is a piecewise quadratic in |q|, so the minimizer is either
/// a stationary point inside a piece or a breakpoint. All candidates are
/// compared directly, which stays exact when w * gamma <= 1 makes a piece
/// concave. Ties go to the smaller magnitude.
inline double penalty_prox(double z, double w, const PenaltySpec& spec) {
  if (!(w > 0.0)) throw DomainError("prox weight must be positive; got " + std::to_string(w));
  const double a = std::abs(z);
  // Convex cases have closed forms.
  if (spec.kind == PenaltyKind::L1) return a * w <= spec.lambda ? 0.0 : std::copysign(a - spec.lambda / w, z);
  if (spec.kind == PenaltyKind::Mcp && w * spec.gamma > 1.0) {
    if (a * w <= spec.lambda) return 0.0;
    if (a <= spec.gamma * spec.lambda) return std::copysign((w * a - spec.lambda) / (w - 1.0 / spec.gamma), z);
    return z;
  }
  std::array<detail::PenaltyPiece, 3> pieces{};
  const int count = detail::penalty_pieces(spec, pieces);

  auto objective = [&](double t) { return 0.5 * w * (t - a) * (t - a) + penalty_value(t, spec); };
  double best_t = 0.0;
  double best_f = objective(0.0);
  auto consider = [&](double t) {
    const double f = objective(t);
    if (f < best_f || (f == best_f && t < best_t)) {
      best_f = f;
      best_t = t;
    }
  };
  for (int k = 0; k < count; ++k) {
    const auto& pc = pieces[static_cast<std::size_t>(k)];
    if (pc.hi < pc.lo) continue;
    consider(pc.lo);
    if (std::isfinite(pc.hi)) consider(pc.hi);
    const double curvature = w + 2.0 * pc.c2;
    if (curvature > 0.0) {
      const double t = (w * a - pc.c1) / curvature;
      consider(std::clamp(t, pc.lo, pc.hi));
    }
  }
  return best_t == 0.0 ? 0.0 : std::copysign(best_t, z);
}

/// MCP proximal map (firm thresholding when w = 1).
inline double mcp_prox(double z, double w, double lambda, double gamma = 3.0) {
  return penalty_prox(z, w, PenaltySpec{lambda, gamma, PenaltyKind::Mcp});
}

/// A least-squares design that coordinate descent can walk one coordinate at
/// a time. `correlation(j)` is X_j^T (y - X q) at the current iterate and
/// `step(j, d)` moves q_j by d.
template <class D>
concept CoordinateDesign = requires(D& d, const D& cd, Eigen::Index j, double delta, const Vector& q) {
  { cd.size() } -> std::convertible_to<Eigen::Index>;
  { cd.weight(j) } -> std::convertible_to<double>;
  { cd.correlation(j) } -> std::convertible_to<double>;
  { cd.loss() } -> std::convertible_to<double>;
  d.reset(q);
  d.step(j, delta);
};

/// General dense design X (m x p) with response y, keeping the residual
/// y - X q up to date.
class DenseDesign {
 public:
  DenseDesign(Matrix x, Vector y) : x_(std::move(x)), y_(std::move(y)) {
    if (x_.rows() != y_.size()) throw InvalidArgument("design rows must match response length");
    weights_ = x_.colwise().squaredNorm().transpose();
    residual_ = y_;
  }

  Eigen::Index size() const noexcept { return x_.cols(); }
  double weight(Eigen::Index j) const { return weights_(j); }
  double correlation(Eigen::Index j) const { return x_.col(j).dot(residual_); }
  double loss() const { return 0.5 * residual_.squaredNorm(); }
  void reset(const Vector& q) { residual_ = y_ - x_ * q; }
  void step(Eigen::Index j, double delta) { residual_ -= delta * x_.col(j); }

 private:
  Matrix x_;
  Vector y_;
  Vector weights_;
  Vector residual_;
};

/// Design c * (I - U U^T) for U with orthonormal columns (possibly none).
/// Every operation costs O(k) or O(p k) with k = U.cols(), never O(p^2).
class ProjectionDesign {
 public:
  ProjectionDesign(Matrix u, double scale, Vector y) : u_(std::move(u)), c_(scale), y_(std::move(y)) {
    if (u_.rows() != y_.size()) throw InvalidArgument("projection basis rows must match response length");
    by_ = y_;
    if (u_.cols() > 0) by_.noalias() -= u_ * (u_.transpose() * y_);
    weights_ = (c_ * c_) * (Vector::Ones(y_.size()) - u_.rowwise().squaredNorm());
    q_ = Vector::Zero(y_.size());
    uq_ = Vector::Zero(u_.cols());
  }

  Eigen::Index size() const noexcept { return y_.size(); }
  double weight(Eigen::Index j) const { return std::max(0.0, weights_(j)); }
  double correlation(Eigen::Index j) const {
    const double bq = q_(j) - (u_.cols() > 0 ? u_.row(j).dot(uq_) : 0.0);
    return c_ * by_(j) - c_ * c_ * bq;
  }
  double loss() const {
    Vector bq = q_;
    if (u_.cols() > 0) bq.noalias() -= u_ * uq_;
    return 0.5 * y_.squaredNorm() - c_ * by_.dot(q_) + 0.5 * c_ * c_ * bq.squaredNorm();
  }
  void reset(const Vector& q) {
    q_ = q;
    uq_ = u_.transpose() * q;
  }
  void step(Eigen::Index j, double delta) {
    q_(j) += delta;
    if (u_.cols() > 0) uq_ += delta * u_.row(j).transpose();
  }

 private:
  Matrix u_;
  double c_;
  Vector y_;
  Vector by_;
  Vector weights_;
  Vector q_;
  Vector uq_;
};

struct CoordinateDescentOptions {
  double tol = 1e-8;
  int max_iter = 10000;
  bool record_objective = false;
};

struct PenalizedLsResult {
  Vector coef;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<Eigen::Index> skipped;   // coordinates with a zero design column
  std::vector<double> objective_history;  // one entry per sweep, starting with the initial value
};

template <CoordinateDesign D>
double penalized_objective(const D& design, const Vector& q, const PenaltySpec& spec) {
  double pen = 0.0;
  for (Eigen::Index j = 0; j < q.size(); ++j) pen += penalty_value(q(j), spec);
  return design.loss() + pen;
}

/// Cyclic coordinate descent for 0.5 ||y - X q||^2 + sum_j P(|q_j|).
/// Each coordinate is minimized exactly, so the objective never increases.
/// Stops once the largest coordinate change of a sweep falls below tol.
template <CoordinateDesign D>
PenalizedLsResult penalized_ls(D& design, const PenaltySpec& spec, const Vector& init,
                               const CoordinateDescentOptions& opts = {}) {
  spec.validate();
  if (!(opts.tol > 0.0)) throw InvalidArgument("coordinate descent tolerance must be positive");
  const Eigen::Index p = design.size();
  if (init.size() != p) throw InvalidArgument("initial value has the wrong length");

  PenalizedLsResult out;
  out.coef = init;
  double max_weight = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) max_weight = std::max(max_weight, design.weight(j));
  const double zero_weight = 1e-14 * std::max(1.0, max_weight);
  for (Eigen::Index j = 0; j < p; ++j)
    if (design.weight(j) <= zero_weight) {
      out.skipped.push_back(j);
      out.coef(j) = 0.0;
    }
  design.reset(out.coef);
  if (opts.record_objective) out.objective_history.push_back(penalized_objective(design, out.coef, spec));

  std::size_t next_skip = 0;
  for (int it = 1; it <= opts.max_iter; ++it) {
    double max_change = 0.0;
    next_skip = 0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (next_skip < out.skipped.size() && out.skipped[next_skip] == j) {
        ++next_skip;
        continue;
      }
      const double w = design.weight(j);
      const double old = out.coef(j);
      const double z = old + design.correlation(j) / w;
      const double updated = penalty_prox(z, w, spec);
      const double delta = updated - old;
      if (delta != 0.0) {
        design.step(j, delta);
        out.coef(j) = updated;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    out.iterations = it;
    if (opts.record_objective) out.objective_history.push_back(penalized_objective(design, out.coef, spec));
    if (max_change < opts.tol) {
      out.converged = true;
      break;
    }
  }
  out.objective = penalized_objective(design, out.coef, spec);
  return out;
}

/// Dense convenience overload.
inline PenalizedLsResult penalized_ls(const Vector& y, const Matrix& x, const PenaltySpec& spec, const Vector& init,
                                      double tol = 1e-8, int max_iter = 10000) {
  DenseDesign design(x, y);
  return penalized_ls(design, spec, init, CoordinateDescentOptions{tol, max_iter, false});
}

}  // namespace sfm
