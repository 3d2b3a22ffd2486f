#pragma once

// Command-line front end. Requires CLI11.hpp and json.hpp on the include path.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sparsefactor/sparsefactor.hpp"

namespace sfm::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNumericError = 3 };

// Bad experiment configuration, reported with the offending field.
class ConfigError : public DesignError {
 public:
  using DesignError::DesignError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline std::string fmt_g17(double x) {
  if (x == 0.0) return "0";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// RFC-4180 quoting for text cells.
inline std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << content;
  if (!f) throw IoError("failed writing '" + path.string() + "'");
}

inline void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

inline std::string json_double_or_null(double x) { return std::isfinite(x) ? fmt_g17(x) : "null"; }

}  // namespace detail

// ---------------------------------------------------------------------------
// estimate

struct EstimateArgs {
  std::string input;
  Eigen::Index r = 0;
  std::size_t h0 = 1;
  bool log_diff = false;
  bool demean = true;
  bool no_header = false;
  std::optional<double> lambda;
  std::size_t grid_count = 50;
  double grid_min_ratio = 1e-3;
  double gamma = 3.0;
  std::string out = ".";
};

struct EstimateResult {
  SeriesMatrix series;  // after log differencing, before centering
  Basis s_hat;
  FactorModelFit fit;
  bool selected_by_bic = true;
};

inline EstimateResult estimate(const EstimateArgs& a) {
  SeriesMatrix raw = load_series(a.input, !a.no_header);
  SeriesMatrix s = a.log_diff ? log_diff(raw) : raw;
  if (a.r < 1 || a.r > s.p())
    throw InvalidArgument("--r must lie in [1, " + std::to_string(s.p()) + "]; got " + std::to_string(a.r));
  const PooledCovConfig cfg{a.h0, a.demean};
  Basis s_hat = estimate_loading_space(s, cfg, a.r);
  const SeriesMatrix centered = a.demean ? demean(s) : s;

  SelectionOptions opts;
  opts.gamma = a.gamma;
  EstimateResult out{s, s_hat, {}, !a.lambda.has_value()};
  if (a.lambda) {
    if (!(*a.lambda >= 0.0)) throw InvalidArgument("--lambda must be nonnegative");
    std::vector<double> fallback;
    if (*a.lambda > 0.0) fallback = geometric_grid(*a.lambda, a.grid_count, a.grid_min_ratio);
    out.fit = fit_at_lambda(centered, s_hat, *a.lambda, opts, fallback);
  } else {
    const auto grid = geometric_grid(lambda_max(s_hat, opts.admm, opts.order), a.grid_count, a.grid_min_ratio);
    out.fit = select_lambda(centered, s_hat, grid, opts);
  }
  return out;
}

inline std::string loadings_csv(const EstimateResult& res) {
  const Matrix& q = res.fit.loading.q;
  std::string out = "variable";
  for (Eigen::Index j = 0; j < q.cols(); ++j) out += ",f" + std::to_string(j + 1);
  out += '\n';
  for (Eigen::Index i = 0; i < q.rows(); ++i) {
    out += detail::csv_cell(res.series.label(i));
    for (Eigen::Index j = 0; j < q.cols(); ++j) out += ',' + detail::fmt_g17(q(i, j));
    out += '\n';
  }
  return out;
}

inline std::string factors_csv(const Matrix& f) {
  std::string out = "factor";
  for (Eigen::Index t = 0; t < f.cols(); ++t) out += ",t" + std::to_string(t + 1);
  out += '\n';
  for (Eigen::Index k = 0; k < f.rows(); ++k) {
    out += "f" + std::to_string(k + 1);
    for (Eigen::Index t = 0; t < f.cols(); ++t) out += ',' + detail::fmt_g17(f(k, t));
    out += '\n';
  }
  return out;
}

inline std::string heatmap_csv(const EstimateResult& res) {
  const Matrix& q = res.fit.loading.q;
  std::string out = "variable,factor,value\n";
  for (Eigen::Index i = 0; i < q.rows(); ++i)
    for (Eigen::Index j = 0; j < q.cols(); ++j)
      out += detail::csv_cell(res.series.label(i)) + ",f" + std::to_string(j + 1) + ',' + detail::fmt_g17(q(i, j)) +
             '\n';
  return out;
}

inline nlohmann::ordered_json fit_json(const EstimateArgs& a, const EstimateResult& res) {
  using nlohmann::ordered_json;
  const LoadingMatrix& l = res.fit.loading;
  ordered_json j;
  j["schema_version"] = 1;
  j["input"] = a.input;
  j["p"] = res.series.p();
  j["n"] = res.series.n();
  j["r"] = a.r;
  j["h0"] = a.h0;
  j["log_diff"] = a.log_diff;
  j["demean"] = a.demean;
  j["penalty"] = "mcp";
  j["gamma"] = a.gamma;
  j["lambda"] = res.fit.lambda;
  j["lambda_source"] = res.selected_by_bic ? "bic" : "fixed";
  j["bic"] = std::isfinite(res.fit.bic) ? ordered_json(res.fit.bic) : ordered_json(nullptr);
  j["nonzero_count"] = l.nonzero_count();
  j["zero_count"] = l.q.size() - l.nonzero_count();
  j["all_converged"] = l.all_converged();
  std::vector<double> eig(res.s_hat.eigenvalues.data(), res.s_hat.eigenvalues.data() + res.s_hat.eigenvalues.size());
  j["eigenvalues"] = eig;
  ordered_json cols = ordered_json::array();
  for (std::size_t k = 0; k < l.columns.size(); ++k) {
    const auto& c = l.columns[k];
    ordered_json cj;
    cj["factor"] = "f" + std::to_string(k + 1);
    cj["nonzeros"] = l.supports[k].size();
    cj["converged"] = c.converged;
    cj["iterations"] = c.iterations;
    cj["residual"] = c.residual;
    cj["restarts"] = c.restarts;
    cj["lambda"] = c.lambda;
    cj["refit"] = c.refit;
    cols.push_back(std::move(cj));
  }
  j["columns"] = std::move(cols);
  if (res.selected_by_bic) {
    ordered_json path = ordered_json::array();
    for (const auto& g : res.fit.path) {
      ordered_json gj;
      gj["lambda"] = g.lambda;
      gj["bic"] = g.usable ? ordered_json(g.bic.value) : ordered_json(nullptr);
      gj["nonzeros"] = g.nonzeros;
      gj["usable"] = g.usable;
      if (!g.failure.empty()) gj["failure"] = g.failure;
      path.push_back(std::move(gj));
    }
    j["grid"] = std::move(path);
  }
  return j;
}

inline int cmd_estimate(const EstimateArgs& a, std::ostream& out, std::ostream& err) {
  const EstimateResult res = estimate(a);
  const std::filesystem::path dir(a.out);
  detail::ensure_dir(dir);
  detail::write_file(dir / "loadings.csv", loadings_csv(res));
  detail::write_file(dir / "factors.csv", factors_csv(res.fit.factors));
  detail::write_file(dir / "fit.json", fit_json(a, res).dump(2) + "\n");
  detail::write_file(dir / "loading_heatmap.csv", heatmap_csv(res));
  for (std::size_t k = 0; k < res.fit.loading.columns.size(); ++k)
    if (!res.fit.loading.columns[k].converged)
      err << "warning: ADMM did not converge for factor f" << k + 1 << " (residual "
          << res.fit.loading.columns[k].residual << ")\n";
  out << "lambda=" << detail::fmt_g17(res.fit.lambda) << " bic=" << detail::json_double_or_null(res.fit.bic)
      << " nonzero_count=" << res.fit.loading.nonzero_count() << '\n';
  return kOk;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateConfig {
  SimDesign design;
  ExperimentOptions options;
  std::vector<Method> methods{Method::Eigen, Method::Varimax1, Method::Varimax2, Method::Sparse};
};

namespace detail {

inline const char* pattern_name(SupportPattern p) {
  switch (p) {
    case SupportPattern::Fraction: return "fraction";
    case SupportPattern::Growth: return "growth";
    case SupportPattern::Block: return "block";
  }
  return "?";
}

inline const char* growth_name(GrowthRule g) {
  switch (g) {
    case GrowthRule::Sqrt: return "sqrt";
    case GrowthRule::TwoThirds: return "two_thirds";
    case GrowthRule::ThreeQuarters: return "three_quarters";
    case GrowthRule::Linear: return "linear";
  }
  return "?";
}

inline std::vector<Method> parse_methods(const std::vector<std::string>& names, const std::string& field) {
  if (names.empty()) throw ConfigError(field + ": at least one method is required");
  std::vector<Method> out;
  for (const auto& n : names) {
    auto m = method_from_string(n);
    if (!m) throw ConfigError(field + ": unknown method '" + n + "' (expected eigen, varimax1, varimax2, sparse)");
    out.push_back(*m);
  }
  return out;
}

template <class T>
T field_as(const nlohmann::json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("config field '" + key + "': wrong type (" + std::string(j.type_name()) + ")");
  }
}

inline Eigen::Index positive_int(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number_integer()) throw ConfigError("config field '" + key + "': expected an integer");
  const auto v = j.get<long long>();
  if (v < 1) throw ConfigError("config field '" + key + "': must be positive, got " + std::to_string(v));
  return static_cast<Eigen::Index>(v);
}

inline double finite_number(const nlohmann::json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError("config field '" + key + "': expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError("config field '" + key + "': must be finite");
  return v;
}

}  // namespace detail

/// Reads a JSON object mirroring SimDesign plus experiment options.
/// Unknown keys are rejected so typos do not silently fall back to defaults.
inline SimulateConfig parse_simulate_config(const nlohmann::json& j) {
  using detail::finite_number;
  using detail::positive_int;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  SimulateConfig c;
  for (const auto& [key, v] : j.items()) {
    if (key == "p") c.design.p = positive_int(v, key);
    else if (key == "n") c.design.n = positive_int(v, key);
    else if (key == "r") c.design.r = positive_int(v, key);
    else if (key == "delta") c.design.delta = finite_number(v, key);
    else if (key == "pattern") {
      const auto s = detail::field_as<std::string>(v, key);
      if (s == "fraction") c.design.pattern = SupportPattern::Fraction;
      else if (s == "growth") c.design.pattern = SupportPattern::Growth;
      else if (s == "block") c.design.pattern = SupportPattern::Block;
      else throw ConfigError("config field 'pattern': unknown value '" + s + "' (expected fraction, growth, block)");
    } else if (key == "block_fraction") c.design.block_fraction = finite_number(v, key);
    else if (key == "growth") {
      const auto s = detail::field_as<std::string>(v, key);
      if (s == "sqrt") c.design.growth = GrowthRule::Sqrt;
      else if (s == "two_thirds") c.design.growth = GrowthRule::TwoThirds;
      else if (s == "three_quarters") c.design.growth = GrowthRule::ThreeQuarters;
      else if (s == "linear") c.design.growth = GrowthRule::Linear;
      else
        throw ConfigError("config field 'growth': unknown value '" + s +
                          "' (expected sqrt, two_thirds, three_quarters, linear)");
    } else if (key == "block_size") c.design.block_size = positive_int(v, key);
    else if (key == "seed") {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        throw ConfigError("config field 'seed': expected a nonnegative integer");
      c.design.seed = v.get<std::uint64_t>();
    } else if (key == "reps") c.design.reps = static_cast<int>(positive_int(v, key));
    else if (key == "noise_scale") c.design.noise_scale = finite_number(v, key);
    else if (key == "methods") c.methods = detail::parse_methods(detail::field_as<std::vector<std::string>>(v, key), key);
    else if (key == "h0") c.options.h0 = static_cast<std::size_t>(positive_int(v, key));
    else if (key == "demean") c.options.demean = detail::field_as<bool>(v, key);
    else if (key == "grid_count") {
      c.options.grid_count = static_cast<std::size_t>(positive_int(v, key));
      if (c.options.grid_count < 2) throw ConfigError("config field 'grid_count': must be at least 2");
    } else if (key == "grid_min_ratio") {
      c.options.grid_min_ratio = finite_number(v, key);
      if (!(c.options.grid_min_ratio > 0.0 && c.options.grid_min_ratio < 1.0))
        throw ConfigError("config field 'grid_min_ratio': must lie in (0, 1)");
    } else if (key == "varimax1_threshold") c.options.varimax1_threshold = finite_number(v, key);
    else if (key == "varimax2_threshold") c.options.varimax2_threshold = finite_number(v, key);
    else if (key == "threads") c.options.threads = static_cast<unsigned>(positive_int(v, key));
    else throw ConfigError("config field '" + key + "': unknown key");
  }
  try {
    c.design.validate();
  } catch (const DesignError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return c;
}

inline SimulateConfig load_simulate_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_simulate_config(j);
}

/// Effective configuration, written next to the summaries. Thread count is
/// left out since it does not affect the results.
inline nlohmann::ordered_json config_json(const SimulateConfig& c) {
  nlohmann::ordered_json j;
  j["p"] = c.design.p;
  j["n"] = c.design.n;
  j["r"] = c.design.r;
  j["delta"] = c.design.delta;
  j["pattern"] = detail::pattern_name(c.design.pattern);
  if (c.design.pattern == SupportPattern::Fraction) j["block_fraction"] = c.design.block_fraction;
  if (c.design.pattern == SupportPattern::Growth) j["growth"] = detail::growth_name(c.design.growth);
  if (c.design.pattern == SupportPattern::Block) j["block_size"] = c.design.block_size;
  j["seed"] = c.design.seed;
  j["reps"] = c.design.reps;
  j["noise_scale"] = c.design.noise_scale;
  std::vector<std::string> names;
  for (Method m : c.methods) names.emplace_back(to_string(m));
  j["methods"] = names;
  j["h0"] = c.options.h0;
  j["demean"] = c.options.demean;
  j["grid_count"] = c.options.grid_count;
  j["grid_min_ratio"] = c.options.grid_min_ratio;
  j["varimax1_threshold"] = c.options.varimax1_threshold;
  j["varimax2_threshold"] = c.options.varimax2_threshold;
  return j;
}

struct SimulateArgs {
  std::string config;
  std::optional<int> reps;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> methods;  // comma separated
  std::optional<unsigned> threads;
  std::string out = ".";
};

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, ',')) out.emplace_back(sfm::detail::trim(cur));
  return out;
}

inline int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream&) {
  SimulateConfig c = load_simulate_config(a.config);
  if (a.reps) {
    if (*a.reps < 1) throw ConfigError("--reps must be positive");
    c.design.reps = *a.reps;
  }
  if (a.seed) c.design.seed = *a.seed;
  if (a.methods) c.methods = detail::parse_methods(split_list(*a.methods), "--methods");
  if (a.threads) c.options.threads = *a.threads;

  const ExperimentSummary summary = run_experiment(c.design, c.methods, c.options);
  std::ostringstream csv, text;
  write_summary_csv(summary, csv);
  write_summary_text(summary, text);

  const std::filesystem::path dir(a.out);
  detail::ensure_dir(dir);
  detail::write_file(dir / "summary.csv", csv.str());
  detail::write_file(dir / "summary.txt", text.str());
  detail::write_file(dir / "config.json", config_json(c).dump(2) + "\n");
  out << text.str();
  return kOk;
}

// ---------------------------------------------------------------------------
// factors-report

struct FactorsReportArgs {
  std::string factors;
  std::string dates;
  std::string out = ".";
};

/// Month (1-12) of an ISO-style date: YYYY-MM, YYYY-MM-DD or YYYY/MM[/DD].
inline std::optional<int> parse_month(std::string_view text) {
  text = sfm::detail::trim(text);
  if (text.size() < 7) return std::nullopt;
  for (int i = 0; i < 4; ++i)
    if (!std::isdigit(static_cast<unsigned char>(text[static_cast<std::size_t>(i)]))) return std::nullopt;
  const char sep = text[4];
  if (sep != '-' && sep != '/') return std::nullopt;
  if (!std::isdigit(static_cast<unsigned char>(text[5])) || !std::isdigit(static_cast<unsigned char>(text[6])))
    return std::nullopt;
  const int month = (text[5] - '0') * 10 + (text[6] - '0');
  if (month < 1 || month > 12) return std::nullopt;
  if (text.size() == 7) return month;
  if (text.size() != 10 || text[7] != sep) return std::nullopt;
  if (!std::isdigit(static_cast<unsigned char>(text[8])) || !std::isdigit(static_cast<unsigned char>(text[9])))
    return std::nullopt;
  const int day = (text[8] - '0') * 10 + (text[9] - '0');
  if (day < 1 || day > 31) return std::nullopt;
  return month;
}

/// Dates file: one date per line, optional "date" header; a CSV whose
/// first column holds the date is also accepted.
inline std::vector<int> load_months(std::istream& in) {
  std::vector<int> months;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (sfm::detail::trim(line).empty()) continue;
    const auto cells = sfm::detail::split_csv_line(line);
    const std::string first(sfm::detail::trim(cells.front()));
    if (months.empty() && row == 1 && (first == "date" || first == "month")) continue;
    auto m = parse_month(first);
    if (!m) throw ParseError("malformed date '" + first + "' at row " + std::to_string(row), row, 1);
    months.push_back(*m);
  }
  if (months.empty()) throw ParseError("dates file contains no dates", row);
  return months;
}

/// Reads a factors.csv written by `estimate` (header factor,t1..tn).
inline std::pair<std::vector<std::string>, Matrix> load_factors(std::istream& in) {
  std::string line;
  std::size_t row = 0;
  std::vector<std::string> names;
  std::vector<std::vector<double>> values;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++row;
    if (sfm::detail::trim(line).empty()) continue;
    const auto cells = sfm::detail::split_csv_line(line);
    if (width == 0) {
      width = cells.size();
      if (width < 2) throw ParseError("factors header needs at least one time column", row);
      continue;
    }
    if (cells.size() != width)
      throw ParseError("row " + std::to_string(row) + " has " + std::to_string(cells.size()) + " cells, expected " +
                           std::to_string(width),
                       row);
    names.emplace_back(sfm::detail::trim(cells[0]));
    std::vector<double> v;
    for (std::size_t k = 1; k < cells.size(); ++k) {
      auto x = sfm::detail::parse_double(cells[k]);
      if (!x)
        throw ParseError("non-numeric cell '" + cells[k] + "' at row " + std::to_string(row) + ", column " +
                             std::to_string(k + 1),
                         row, k + 1);
      v.push_back(*x);
    }
    values.push_back(std::move(v));
  }
  if (values.empty()) throw ParseError("factors file contains no factor rows", row);
  Matrix f(static_cast<Eigen::Index>(values.size()), static_cast<Eigen::Index>(width - 1));
  for (std::size_t k = 0; k < values.size(); ++k)
    for (std::size_t t = 0; t + 1 < width; ++t) f(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(t)) = values[k][t];
  return {std::move(names), std::move(f)};
}

/// Long-form month,factor,value rows grouped by calendar month, with time
/// order kept inside each group.
inline std::string factors_report_csv(const std::vector<std::string>& names, const Matrix& f,
                                      const std::vector<int>& months) {
  if (static_cast<Eigen::Index>(months.size()) != f.cols())
    throw InvalidArgument("dates file has " + std::to_string(months.size()) + " dates but factors have " +
                          std::to_string(f.cols()) + " time points");
  std::string out = "month,factor,value\n";
  for (int month = 1; month <= 12; ++month)
    for (Eigen::Index k = 0; k < f.rows(); ++k)
      for (Eigen::Index t = 0; t < f.cols(); ++t)
        if (months[static_cast<std::size_t>(t)] == month)
          out += std::to_string(month) + ',' + detail::csv_cell(names[static_cast<std::size_t>(k)]) + ',' +
                 detail::fmt_g17(f(k, t)) + '\n';
  return out;
}

inline int cmd_factors_report(const FactorsReportArgs& a, std::ostream& out, std::ostream&) {
  std::ifstream fin(a.factors);
  if (!fin) throw ParseError("cannot open '" + a.factors + "'", 0);
  auto [names, f] = load_factors(fin);
  std::ifstream din(a.dates);
  if (!din) throw ParseError("cannot open '" + a.dates + "'", 0);
  const std::vector<int> months = load_months(din);
  const std::string csv = factors_report_csv(names, f, months);
  const std::filesystem::path dir(a.out);
  detail::ensure_dir(dir);
  detail::write_file(dir / "factors_by_month.csv", csv);
  std::map<int, int> counts;
  for (int m : months) ++counts[m];
  out << counts.size() << " month group(s), " << f.rows() << " factor(s)\n";
  return kOk;
}

// ---------------------------------------------------------------------------

/// Parses argv and dispatches. Never throws; failures map to exit codes
/// 1 (usage), 2 (data or configuration) and 3 (numeric failure).
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Sparse factor loading estimation for high-dimensional time series", "sparsefactor"};
  app.require_subcommand(1);

  EstimateArgs est;
  auto* e = app.add_subcommand("estimate", "Estimate sparse loadings and factors from a CSV panel");
  e->add_option("input", est.input, "CSV with one column per variable, one row per time point")->required();
  e->add_option("--r", est.r, "Number of factors")->required()->check(CLI::PositiveNumber);
  e->add_option("--h0", est.h0, "Largest autocovariance lag")->capture_default_str()->check(CLI::PositiveNumber);
  e->add_flag("--log-diff", est.log_diff, "Take log differences of the (positive) input first");
  e->add_flag("--demean,!--no-demean", est.demean, "Center each variable (default on)");
  e->add_flag("--no-header", est.no_header, "Input has no header row");
  e->add_option("--lambda", est.lambda, "Fixed penalty level; BIC grid search when absent");
  e->add_option("--grid-count", est.grid_count, "Grid size for BIC search")->capture_default_str()->check(
      CLI::Range(std::size_t{2}, std::size_t{100000}));
  e->add_option("--grid-min-ratio", est.grid_min_ratio, "Smallest grid value relative to lambda_max")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  e->add_option("--gamma", est.gamma, "MCP concavity")->capture_default_str();
  e->add_option("--out", est.out, "Output directory")->capture_default_str();

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Run a Monte Carlo experiment from a JSON design");
  s->add_option("--config", sim.config, "JSON design file")->required();
  s->add_option("--reps", sim.reps, "Override the replicate count");
  s->add_option("--seed", sim.seed, "Override the seed");
  s->add_option("--methods", sim.methods, "Comma-separated subset of eigen,varimax1,varimax2,sparse");
  s->add_option("--threads", sim.threads, "Worker threads (0: all cores)");
  s->add_option("--out", sim.out, "Output directory")->capture_default_str();

  FactorsReportArgs rep;
  auto* f = app.add_subcommand("factors-report", "Group estimated factors by calendar month");
  f->add_option("--factors", rep.factors, "factors.csv written by estimate")->required();
  f->add_option("--dates", rep.dates, "One date (YYYY-MM or YYYY-MM-DD) per time point")->required();
  f->add_option("--out", rep.out, "Output directory")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::CallForAllHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex, out, err);
    return kUsage;
  }

  try {
    if (*e) return cmd_estimate(est, out, err);
    if (*s) return cmd_simulate(sim, out, err);
    if (*f) return cmd_factors_report(rep, out, err);
  } catch (const NumericError& ex) {
    err << "error: " << ex.what() << '\n';
    return kNumericError;
  } catch (const Error& ex) {
    err << "error: " << ex.what() << '\n';
    return kDataError;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  std::vector<const char*> argv{"sparsefactor"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace sfm::cli
