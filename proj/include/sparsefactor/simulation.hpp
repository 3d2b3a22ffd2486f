#pragma once

#include <Eigen/Dense>
#include <boost/random/normal_distribution.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "sparsefactor/errors.hpp"
#include "sparsefactor/metrics.hpp"
#include "sparsefactor/model_selection.hpp"
#include "sparsefactor/series.hpp"
#include "sparsefactor/spectral.hpp"
#include "sparsefactor/varimax.hpp"

namespace sfm {

/// Engine for one replicate. Every replicate gets its own stream seeded from
/// (seed, replicate), so results do not depend on scheduling.
using Rng = std::mt19937_64;

inline Rng replicate_rng(std::uint64_t seed, std::uint64_t replicate) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32),
                    0x5f3759dfu};
  return Rng(seq);
}

// How the nonzero rows of each loading column are laid out.
enum class SupportPattern {
  Fraction,  // each column has round(fraction * p) rows
  Growth,    // m grows with p: 3p^{1/2}, 3p^{2/3}, 3p^{3/4} or 1.8p
  Block,     // explicit rows per column
};

enum class GrowthRule { Sqrt, TwoThirds, ThreeQuarters, Linear };

inline const char* to_string(GrowthRule g) {
  switch (g) {
    case GrowthRule::Sqrt: return "3p^1/2";
    case GrowthRule::TwoThirds: return "3p^2/3";
    case GrowthRule::ThreeQuarters: return "3p^3/4";
    case GrowthRule::Linear: return "1.8p";
  }
  return "?";
}

struct SimDesign {
  Eigen::Index p = 100;
  Eigen::Index n = 500;
  Eigen::Index r = 3;
  double delta = 0.0;  // factor strength exponent
  SupportPattern pattern = SupportPattern::Fraction;
  double block_fraction = 0.4;
  GrowthRule growth = GrowthRule::Sqrt;
  Eigen::Index block_size = 0;
  std::uint64_t seed = 20240101;
  int reps = 100;
  double noise_scale = 1.0;  // 0 gives an exact factor structure

  /// Nonzero rows per loading column. Growth rules round m/3 to the nearest
  /// integer (m/3 = 7, 14, 19, 30 at p = 50).
  Eigen::Index rows_per_column() const {
    const double pd = static_cast<double>(p);
    switch (pattern) {
      case SupportPattern::Fraction: return static_cast<Eigen::Index>(std::llround(block_fraction * pd));
      case SupportPattern::Block: return block_size;
      case SupportPattern::Growth:
        switch (growth) {
          case GrowthRule::Sqrt: return static_cast<Eigen::Index>(std::llround(std::pow(pd, 0.5)));
          case GrowthRule::TwoThirds: return static_cast<Eigen::Index>(std::llround(std::pow(pd, 2.0 / 3.0)));
          case GrowthRule::ThreeQuarters: return static_cast<Eigen::Index>(std::llround(std::pow(pd, 0.75)));
          case GrowthRule::Linear: return static_cast<Eigen::Index>(std::llround(0.6 * pd));
        }
    }
    return 0;
  }

  /// Total nonzero count m of the loading matrix.
  Eigen::Index m() const { return r * rows_per_column(); }

  /// First row of column c's block: first, evenly spaced middles, last.
  Eigen::Index block_start(Eigen::Index c) const {
    if (r == 1) return 0;
    return c * (p - rows_per_column()) / (r - 1);
  }

  void validate() const {
    if (p < 1) throw DesignError("p must be positive");
    if (n < 2) throw DesignError("n must be at least 2");
    if (r < 1 || r > p) throw DesignError("r must lie in [1, p]");
    if (!(delta >= 0.0)) throw DesignError("delta must be nonnegative");
    if (reps < 1) throw DesignError("reps must be at least 1");
    if (!(noise_scale >= 0.0)) throw DesignError("noise_scale must be nonnegative");
    if (pattern == SupportPattern::Fraction && !(block_fraction > 0.0 && block_fraction <= 1.0))
      throw DesignError("block_fraction must lie in (0, 1]");
    const Eigen::Index b = rows_per_column();
    if (b < 1 || b > p)
      throw DesignError("support pattern needs " + std::to_string(b) + " rows per column but p=" + std::to_string(p));
  }
};

/// Sparse loading matrix A^s (p x r). Nonzeros are standard normal draws
/// with |z| >= 0.1 (rejection sampling), divided by (m/r)^{delta/2}.
inline Matrix gen_loading(const SimDesign& design, Rng& rng) {
  design.validate();
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::Index b = design.rows_per_column();
  const double scale = std::pow(static_cast<double>(design.m()) / static_cast<double>(design.r), design.delta / 2.0);
  Matrix a = Matrix::Zero(design.p, design.r);
  for (Eigen::Index c = 0; c < design.r; ++c) {
    const Eigen::Index start = design.block_start(c);
    for (Eigen::Index i = start; i < start + b; ++i) {
      double z = 0.0;
      do {
        z = normal(rng);
      } while (std::abs(z) < 0.1);
      a(i, c) = z / scale;
    }
  }
  return a;
}

/// r independent stationary AR(1) series with coefficient 0.9 and unit
/// innovation variance, returned r x n.
inline Matrix gen_factors(Eigen::Index n, Eigen::Index r, Rng& rng, double phi = 0.9) {
  if (n < 1 || r < 1) throw DesignError("gen_factors needs n >= 1 and r >= 1");
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  const double stationary_sd = 1.0 / std::sqrt(1.0 - phi * phi);
  Matrix f(r, n);
  for (Eigen::Index k = 0; k < r; ++k) {
    f(k, 0) = stationary_sd * normal(rng);
    for (Eigen::Index t = 1; t < n; ++t) f(k, t) = phi * f(k, t - 1) + normal(rng);
  }
  return f;
}

/// i.i.d. N(0, 0.5 I + 0.5 J) vectors, returned p x n.
inline Matrix gen_noise(Eigen::Index n, Eigen::Index p, Rng& rng) {
  if (n < 1 || p < 1) throw DesignError("gen_noise needs n >= 1 and p >= 1");
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  const double half = std::sqrt(0.5);
  Matrix e(p, n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double common = normal(rng);
    for (Eigen::Index i = 0; i < p; ++i) e(i, t) = half * common + half * normal(rng);
  }
  return e;
}

struct SimulatedData {
  SeriesMatrix series;
  Matrix loading;  // A^s
  Matrix factors;  // r x n
};

/// x_t = A^s f_t + noise_scale * e_t.
inline SimulatedData simulate_dataset(const SimDesign& design, Rng& rng) {
  design.validate();
  Matrix a = gen_loading(design, rng);
  Matrix f = gen_factors(design.n, design.r, rng);
  Matrix x = a * f;
  if (design.noise_scale > 0.0) x += design.noise_scale * gen_noise(design.n, design.p, rng);
  return SimulatedData{SeriesMatrix(std::move(x)), std::move(a), std::move(f)};
}

// ---------------------------------------------------------------------------

enum class Method { Eigen, Varimax1, Varimax2, Sparse };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::Eigen: return "eigen";
    case Method::Varimax1: return "varimax1";
    case Method::Varimax2: return "varimax2";
    case Method::Sparse: return "sparse";
  }
  return "?";
}

inline std::optional<Method> method_from_string(const std::string& name) {
  for (Method m : {Method::Eigen, Method::Varimax1, Method::Varimax2, Method::Sparse})
    if (name == to_string(m)) return m;
  return std::nullopt;
}

inline bool reports_support(Method m) { return m != Method::Eigen; }

struct ExperimentOptions {
  std::size_t h0 = 1;
  bool demean = true;
  std::size_t grid_count = 50;
  double grid_min_ratio = 1e-3;
  double varimax1_threshold = 0.01;
  double varimax2_threshold = 0.05;
  SelectionOptions selection{};
  unsigned threads = 0;  // 0: hardware concurrency
};

/// Scores of one method on one replicate.
struct ReplicateScore {
  bool ok = false;
  double distance = 0.0;
  double support_diff = 0.0;
};

struct MethodSummary {
  Method method = Method::Eigen;
  int successes = 0;
  int failures = 0;
  double distance_mean = 0.0;
  double distance_sd = 0.0;
  double support_diff_mean = 0.0;
  double support_diff_sd = 0.0;
  std::vector<ReplicateScore> replicates;
};

struct ExperimentSummary {
  SimDesign design;
  ExperimentOptions options;
  std::vector<MethodSummary> methods;
  int reps = 0;

  const MethodSummary& method(Method m) const {
    for (const auto& s : methods)
      if (s.method == m) return s;
    throw InvalidArgument(std::string("method not part of the experiment: ") + to_string(m));
  }
};

namespace detail {

inline void mean_sd(const std::vector<double>& xs, double& mean, double& sd) {
  mean = 0.0;
  sd = 0.0;
  if (xs.empty()) return;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return;
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

}  // namespace detail

/// Scores every requested method on one simulated replicate.
inline std::vector<ReplicateScore> run_replicate(const SimDesign& design, const std::vector<Method>& methods,
                                                 const ExperimentOptions& opts, int replicate) {
  Rng rng = replicate_rng(design.seed, static_cast<std::uint64_t>(replicate));
  const SimulatedData data = simulate_dataset(design, rng);
  std::vector<ReplicateScore> scores(methods.size());

  Basis s_hat;
  try {
    s_hat = estimate_loading_space(data.series, PooledCovConfig{opts.h0, opts.demean}, design.r);
  } catch (const Error&) {
    return scores;
  }
  const SeriesMatrix centered = opts.demean ? demean(data.series) : data.series;

  std::optional<Matrix> rotated;
  for (std::size_t k = 0; k < methods.size(); ++k) {
    ReplicateScore& sc = scores[k];
    try {
      Matrix estimate;
      switch (methods[k]) {
        case Method::Eigen:
          estimate = s_hat.columns;
          break;
        case Method::Varimax1:
        case Method::Varimax2: {
          if (!rotated) rotated = varimax_rotate(s_hat).basis.columns;
          const double t = methods[k] == Method::Varimax1 ? opts.varimax1_threshold : opts.varimax2_threshold;
          estimate = threshold_loadings(*rotated, t);
          break;
        }
        case Method::Sparse: {
          const auto grid = geometric_grid(lambda_max(s_hat, opts.selection.admm, opts.selection.order),
                                           opts.grid_count, opts.grid_min_ratio);
          estimate = select_lambda(centered, s_hat, grid, opts.selection).loading.q;
          break;
        }
      }
      sc.distance = subspace_distance(estimate, data.loading);
      if (reports_support(methods[k])) sc.support_diff = static_cast<double>(support_error(estimate, data.loading).abs_diff);
      sc.ok = true;
    } catch (const Error&) {
      sc.ok = false;
    }
  }
  return scores;
}

/// Monte Carlo comparison of the requested methods. Replicates run on
/// `opts.threads` workers; aggregation follows replicate order, so the
/// summary depends only on (design, methods, options).
inline ExperimentSummary run_experiment(const SimDesign& design, const std::vector<Method>& methods,
                                        const ExperimentOptions& opts = {}) {
  design.validate();
  if (methods.empty()) throw DesignError("at least one method is required");
  std::vector<std::vector<ReplicateScore>> per_rep(static_cast<std::size_t>(design.reps));

  unsigned workers = opts.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : opts.threads;
  workers = std::min<unsigned>(workers, static_cast<unsigned>(design.reps));
  if (workers <= 1) {
    for (int k = 0; k < design.reps; ++k) per_rep[static_cast<std::size_t>(k)] = run_replicate(design, methods, opts, k);
  } else {
    std::atomic<int> next{0};
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int k = next++; k < design.reps; k = next++)
          per_rep[static_cast<std::size_t>(k)] = run_replicate(design, methods, opts, k);
      });
    pool.clear();
  }

  ExperimentSummary out;
  out.design = design;
  out.options = opts;
  out.reps = design.reps;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    MethodSummary ms;
    ms.method = methods[m];
    std::vector<double> dist, diff;
    for (const auto& rep : per_rep) {
      const ReplicateScore& sc = rep[m];
      ms.replicates.push_back(sc);
      if (!sc.ok) {
        ++ms.failures;
        continue;
      }
      ++ms.successes;
      dist.push_back(sc.distance);
      diff.push_back(sc.support_diff);
    }
    detail::mean_sd(dist, ms.distance_mean, ms.distance_sd);
    if (reports_support(ms.method)) detail::mean_sd(diff, ms.support_diff_mean, ms.support_diff_sd);
    out.methods.push_back(std::move(ms));
  }
  return out;
}

namespace detail {

inline std::string fmt_double(double x, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, x);
  return buf;
}

}  // namespace detail

/// One CSV row per method. Support columns stay empty for "eigen".
inline void write_summary_csv(const ExperimentSummary& s, std::ostream& out) {
  out << "method,p,n,r,delta,m,reps,successes,failures,distance_mean,distance_sd,support_diff_mean,support_diff_sd\n";
  for (const auto& m : s.methods) {
    out << to_string(m.method) << ',' << s.design.p << ',' << s.design.n << ',' << s.design.r << ','
        << detail::fmt_double(s.design.delta, "%g") << ',' << s.design.m() << ',' << s.reps << ',' << m.successes
        << ',' << m.failures << ',' << detail::fmt_double(m.distance_mean) << ','
        << detail::fmt_double(m.distance_sd);
    if (reports_support(m.method))
      out << ',' << detail::fmt_double(m.support_diff_mean, "%.3f") << ','
          << detail::fmt_double(m.support_diff_sd, "%.3f");
    else
      out << ",,";
    out << '\n';
  }
}

/// Table in the "mean(sd)" layout.
inline void write_summary_text(const ExperimentSummary& s, std::ostream& out) {
  char line[256];
  std::snprintf(line, sizeof line, "p=%lld n=%lld r=%lld delta=%g m=%lld reps=%d seed=%llu\n",
                static_cast<long long>(s.design.p), static_cast<long long>(s.design.n),
                static_cast<long long>(s.design.r), s.design.delta, static_cast<long long>(s.design.m()), s.reps,
                static_cast<unsigned long long>(s.design.seed));
  out << line;
  std::snprintf(line, sizeof line, "%-10s %-16s %-16s %s\n", "method", "distance", "|m - m_hat|", "failures");
  out << line;
  for (const auto& m : s.methods) {
    const std::string dist = detail::fmt_double(m.distance_mean, "%.3f") + "(" + detail::fmt_double(m.distance_sd, "%.3f") + ")";
    const std::string diff = reports_support(m.method)
                                 ? detail::fmt_double(m.support_diff_mean, "%.1f") + "(" +
                                       detail::fmt_double(m.support_diff_sd, "%.1f") + ")"
                                 : "-";
    std::snprintf(line, sizeof line, "%-10s %-16s %-16s %d\n", to_string(m.method), dist.c_str(), diff.c_str(),
                  m.failures);
    out << line;
  }
}

}  // namespace sfm
