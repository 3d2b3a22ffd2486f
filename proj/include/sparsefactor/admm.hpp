#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sparsefactor/errors.hpp"
#include "sparsefactor/penalty.hpp"
#include "sparsefactor/spectral.hpp"
#include "sparsefactor/varimax.hpp"

namespace sfm {

// ---------------------------------------------------------------------------
// Linear operators used by the column problem. G is the target projection
// S S^T and B the projection onto the orthocomplement of the columns fixed
// so far. Both have cheap low-rank forms; DenseOperator covers arbitrary
// matrices for testing.

class DenseOperator {
 public:
  explicit DenseOperator(Matrix m) : m_(std::move(m)) {}
  Vector apply(const Vector& x) const { return m_ * x; }
  Eigen::Index dim() const noexcept { return m_.rows(); }
  DenseDesign design(double scale, const Vector& y) const { return DenseDesign(scale * m_, y); }
  const Matrix& matrix() const noexcept { return m_; }

 private:
  Matrix m_;
};

/// x -> S (S^T x).
class GramOperator {
 public:
  explicit GramOperator(Matrix s) : s_(std::move(s)) {}
  Vector apply(const Vector& x) const { return s_ * (s_.transpose() * x); }
  Eigen::Index dim() const noexcept { return s_.rows(); }

 private:
  Matrix s_;
};

/// x -> (I - U U^T) x for U with orthonormal columns.
class ComplementProjector {
 public:
  explicit ComplementProjector(Matrix u) : u_(std::move(u)) {}
  explicit ComplementProjector(Eigen::Index p) : u_(p, 0) {}
  Vector apply(const Vector& x) const {
    if (u_.cols() == 0) return x;
    return x - u_ * (u_.transpose() * x);
  }
  Eigen::Index dim() const noexcept { return u_.rows(); }
  ProjectionDesign design(double scale, const Vector& y) const { return ProjectionDesign(u_, scale, y); }
  const Matrix& basis() const noexcept { return u_; }

 private:
  Matrix u_;
};

template <class Op>
concept VectorOperator = requires(const Op& op, const Vector& x) {
  { op.apply(x) } -> std::convertible_to<Vector>;
};

template <class Op>
concept ProjectionOperator = VectorOperator<Op> && requires(const Op& op, double c, const Vector& y) {
  { op.design(c, y) } -> CoordinateDesign;
};

// ---------------------------------------------------------------------------

struct AdmmOptions {
  double rho = 1.0;
  double delta_stop = 1e-5;
  int max_iter = 1000;
  int max_restarts = 3;
  // Each q-update is warm started, so a few sweeps per iteration suffice.
  CoordinateDescentOptions inner{1e-6, 50, false};

  void validate() const {
    if (!(rho > 0.0) || !(delta_stop > 0.0) || max_iter < 1 || max_restarts < 0)
      throw InvalidArgument("ADMM options must be positive");
  }
};

/// Per-column ADMM iterate and diagnostics.
struct AdmmState {
  Vector q;
  Vector s;  // unit vector
  Vector v;  // Lagrange multipliers
  double rho = 1.0;
  double residual = 0.0;  // ||s - B q||_2
  int iterations = 0;
  bool converged = false;
};

/// s-update: the unit vector maximizing s^T (G B q + rho B q - v).
template <VectorOperator GOp, VectorOperator BOp>
Vector update_s(const GOp& g, const BOp& b, const Vector& q, const Vector& v, double rho) {
  const Vector bq = b.apply(q);
  const Vector c1 = g.apply(bq) + rho * bq - v;
  const double norm = c1.norm();
  if (norm < 1e-14) throw DegenerateDirection("s-update direction vanished (norm " + std::to_string(norm) + ")");
  return c1 / norm;
}

inline Vector update_s(const Matrix& g, const Matrix& b, const Vector& q, const Vector& v, double rho) {
  return update_s(DenseOperator(g), DenseOperator(b), q, v, rho);
}

/// q-update: penalized least squares with response (v + rho s + G s)/sqrt(rho)
/// and design sqrt(rho) B.
template <VectorOperator GOp, ProjectionOperator BOp>
PenalizedLsResult update_q(const GOp& g, const BOp& b, const Vector& s, const Vector& v, double rho,
                           const PenaltySpec& spec, const Vector& init, const CoordinateDescentOptions& cd = {}) {
  const double root = std::sqrt(rho);
  const Vector y = (v + rho * s + g.apply(s)) / root;
  auto design = b.design(root, y);
  return penalized_ls(design, spec, init, cd);
}

inline PenalizedLsResult update_q(const Matrix& g, const Matrix& b, const Vector& s, const Vector& v, double rho,
                                  const PenaltySpec& spec, const Vector& init,
                                  const CoordinateDescentOptions& cd = {}) {
  const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
  if ((b - b.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale || (b * b - b).cwiseAbs().maxCoeff() > 1e-10 * scale)
    throw InvalidArgument("B must be a symmetric idempotent matrix");
  return update_q(DenseOperator(g), DenseOperator(b), s, v, rho, spec, init, cd);
}

/// Dual ascent v + rho (s - B q).
template <VectorOperator BOp>
Vector update_v(const Vector& v, double rho, const Vector& s, const BOp& b, const Vector& q) {
  return v + rho * (s - b.apply(q));
}

inline Vector update_v(const Vector& v, double rho, const Vector& s, const Matrix& b, const Vector& q) {
  return update_v(v, rho, s, DenseOperator(b), q);
}

/// Augmented Lagrangian of the column problem with the data term
/// 0.5 ||G - B q s^T||_F^2 evaluated on the constraint set ||B q|| = ||s|| = 1,
/// i.e. 0.5 ||G||_F^2 - s^T G B q + 0.5. The s- and q-updates above minimize
/// exactly this function in their own block. `g_norm2` is ||G||_F^2.
template <VectorOperator GOp, VectorOperator BOp>
double augmented_lagrangian(const GOp& g, double g_norm2, const BOp& b, const Vector& q, const Vector& s,
                            const Vector& v, double rho, const PenaltySpec& spec) {
  const Vector bq = b.apply(q);
  double pen = 0.0;
  for (Eigen::Index j = 0; j < q.size(); ++j) pen += penalty_value(q(j), spec);
  const Vector gap = s - bq;
  return 0.5 * g_norm2 - s.dot(g.apply(bq)) + 0.5 + pen + v.dot(gap) + 0.5 * rho * gap.squaredNorm();
}

struct ColumnFit {
  Vector q;        // penalized loading column
  Vector s_tilde;  // B q normalized to unit length (zero when q == 0)
  double projected_norm = 0.0;  // ||B q|| before normalization
  AdmmState state;
  bool zero_column = false;
};

/// Runs s -> q -> v updates from init_q until ||s - B q|| <= delta_stop or
/// the iteration cap. Throws DegenerateDirection if the s-update direction
/// vanishes; an all-zero q ends the run with zero_column set.
template <VectorOperator GOp, ProjectionOperator BOp>
ColumnFit estimate_column(const GOp& g, const BOp& b, const Vector& init_q, const PenaltySpec& spec,
                          const AdmmOptions& opts = {}) {
  opts.validate();
  if (init_q.size() == 0 || init_q.isZero(0.0)) throw InvalidArgument("initial loading column must be nonzero");
  ColumnFit fit;
  AdmmState& st = fit.state;
  st.rho = opts.rho;
  st.q = init_q;
  st.v = Vector::Zero(init_q.size());
  for (int it = 1; it <= opts.max_iter; ++it) {
    st.s = update_s(g, b, st.q, st.v, st.rho);
    st.q = update_q(g, b, st.s, st.v, st.rho, spec, st.q, opts.inner).coef;
    st.v = update_v(st.v, st.rho, st.s, b, st.q);
    st.iterations = it;
    st.residual = (st.s - b.apply(st.q)).norm();
    if (st.q.isZero(0.0)) {
      fit.zero_column = true;
      break;
    }
    if (st.residual <= opts.delta_stop) {
      st.converged = true;
      break;
    }
  }
  fit.q = st.q;
  for (Eigen::Index j = 0; j < fit.q.size(); ++j)
    if (std::abs(fit.q(j)) < 1e-12) fit.q(j) = 0.0;
  const Vector bq = b.apply(fit.q);
  fit.projected_norm = bq.norm();
  fit.s_tilde = fit.projected_norm > 0.0 ? Vector(bq / fit.projected_norm) : Vector::Zero(bq.size());
  return fit;
}

inline ColumnFit estimate_column(const Matrix& g, const Matrix& b, const Vector& init_q, const PenaltySpec& spec,
                                 const AdmmOptions& opts = {}) {
  return estimate_column(DenseOperator(g), DenseOperator(b), init_q, spec, opts);
}

// ---------------------------------------------------------------------------

struct ColumnDiagnostics {
  int iterations = 0;
  double residual = 0.0;
  double projected_norm = 0.0;
  bool converged = false;
  bool zero_column = false;
  int restarts = 0;
  double lambda = 0.0;       // lambda the column was finally fitted with
  bool refit = false;        // true when lambda differs from the requested one
};

/// Sparse loading estimate Q with per-column supports.
struct LoadingMatrix {
  Matrix q;        // p x r
  Matrix s_tilde;  // p x r, orthonormal projected directions
  std::vector<std::vector<Eigen::Index>> supports;
  double lambda_used = 0.0;
  std::vector<ColumnDiagnostics> columns;

  Eigen::Index nonzero_count() const {
    return static_cast<Eigen::Index>((q.array() != 0.0).count());
  }
  bool all_converged() const {
    for (const auto& c : columns)
      if (!c.converged) return false;
    return true;
  }
  bool has_zero_column() const {
    for (const auto& c : columns)
      if (c.zero_column) return true;
    return false;
  }
};

inline std::vector<std::vector<Eigen::Index>> supports_of(const Matrix& q) {
  std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(q.cols()));
  for (Eigen::Index j = 0; j < q.cols(); ++j)
    for (Eigen::Index i = 0; i < q.rows(); ++i)
      if (q(i, j) != 0.0) out[static_cast<std::size_t>(j)].push_back(i);
  return out;
}

/// Varimax-rotated basis with columns in ascending L1 order; the starting
/// points of the sequential column fits.
inline Matrix initial_directions(const Basis& s_hat, L1Order order = L1Order::Ascending) {
  return order_by_l1(varimax_rotate(s_hat).basis.columns, order);
}

namespace detail {

inline Vector perturbation(Eigen::Index p, int attempt) {
  Vector d(p);
  for (Eigen::Index i = 0; i < p; ++i) {
    const double phase = static_cast<double>((i + 1) * (attempt + 1));
    d(i) = std::sin(phase * 1.618033988749895);
  }
  return d / d.norm();
}

// Unit starting vector inside range(B); falls back to projected coordinate
// axes if the preferred direction is (numerically) in the excluded space.
inline Vector projected_start(const ComplementProjector& b, const Vector& preferred) {
  Vector x = b.apply(preferred);
  if (x.norm() > 1e-8) return x / x.norm();
  Eigen::Index best = 0;
  double best_norm = -1.0;
  for (Eigen::Index i = 0; i < preferred.size(); ++i) {
    const double w = b.apply(Vector::Unit(preferred.size(), i)).norm();
    if (w > best_norm) {
      best_norm = w;
      best = i;
    }
  }
  x = b.apply(Vector::Unit(preferred.size(), best));
  return x / x.norm();
}

}  // namespace detail

/// Sequential column-by-column sparse loading estimate.
///
/// Column i is fitted against G = S_hat S_hat^T with B = I - S~ S~^T, where
/// S~ holds the unit projected directions of the columns already fitted.
/// Degenerate s-updates restart from a perturbed start (at most
/// opts.max_restarts times). A column that comes out entirely zero is refit
/// with the next smaller entries of `fallback_lambdas` (descending) until
/// it keeps a nonzero entry; such columns are flagged `refit`.
inline LoadingMatrix estimate_loadings(const Basis& s_hat, const PenaltySpec& spec, const AdmmOptions& opts = {},
                                       std::span<const double> fallback_lambdas = {},
                                       L1Order order = L1Order::Ascending) {
  spec.validate();
  opts.validate();
  const Eigen::Index p = s_hat.p();
  const Eigen::Index r = s_hat.k();
  if (r < 1 || r > p) throw InvalidArgument("loading basis must have between 1 and p columns");
  const GramOperator g(s_hat.columns);
  const Matrix starts = initial_directions(s_hat, order);

  LoadingMatrix out;
  out.q = Matrix::Zero(p, r);
  out.s_tilde = Matrix::Zero(p, r);
  out.lambda_used = spec.lambda;
  out.columns.resize(static_cast<std::size_t>(r));

  for (Eigen::Index i = 0; i < r; ++i) {
    const ComplementProjector b(Matrix(out.s_tilde.leftCols(i)));
    const Vector start = detail::projected_start(b, starts.col(i));
    ColumnDiagnostics& diag = out.columns[static_cast<std::size_t>(i)];

    auto fit_at = [&](const PenaltySpec& pen) -> std::optional<ColumnFit> {
      Vector init = start;
      for (int attempt = 0; attempt <= opts.max_restarts; ++attempt) {
        try {
          ColumnFit fit = estimate_column(g, b, init, pen, opts);
          diag.restarts = attempt;
          return fit;
        } catch (const DegenerateDirection&) {
          init = detail::projected_start(b, start + 0.1 * detail::perturbation(p, attempt));
        }
      }
      diag.restarts = opts.max_restarts;
      return std::nullopt;
    };

    PenaltySpec pen = spec;
    std::optional<ColumnFit> fit = fit_at(pen);
    if (!fit || fit->zero_column) {
      for (double lam : fallback_lambdas) {
        if (!(lam < spec.lambda)) continue;
        pen.lambda = lam;
        fit = fit_at(pen);
        if (fit && !fit->zero_column) {
          diag.refit = true;
          break;
        }
      }
    }

    diag.lambda = pen.lambda;
    if (fit && !fit->zero_column) {
      out.q.col(i) = fit->q;
      out.s_tilde.col(i) = fit->s_tilde;
      diag.iterations = fit->state.iterations;
      diag.residual = fit->state.residual;
      diag.projected_norm = fit->projected_norm;
      diag.converged = fit->state.converged;
    } else {
      // Keep later columns well posed by excluding the start direction.
      diag.zero_column = true;
      diag.converged = false;
      if (fit) {
        diag.iterations = fit->state.iterations;
        diag.residual = fit->state.residual;
      }
      out.s_tilde.col(i) = start;
    }
  }
  out.supports = supports_of(out.q);
  return out;
}

}  // namespace sfm
