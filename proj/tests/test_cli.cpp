#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "catch_amalgamated.hpp"
#include "oracles.hpp"
#include "sparsefactor/cli.hpp"

namespace fs = std::filesystem;
using sfm::Matrix;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("sfm_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = sfm::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Rows are time points; columns follow two factors with disjoint blocks.
void write_returns(const fs::path& path, int p, int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  double f1 = 0.0, f2 = 0.0;
  std::ofstream out(path);
  out.precision(17);
  for (int t = 0; t < n; ++t) {
    f1 = 0.8 * f1 + normal(rng);
    f2 = 0.8 * f2 + normal(rng);
    for (int i = 0; i < p; ++i) {
      const double load = i < p / 2 ? f1 : f2;
      out << (i ? "," : "") << 2.0 * load + 0.3 * normal(rng);
    }
    out << '\n';
  }
}

void write_config(const fs::path& path, const std::string& body) { std::ofstream(path) << body; }

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(cli({}).code == sfm::cli::kUsage);
  CHECK(cli({"estimate", "data.csv"}).code == sfm::cli::kUsage);
  CHECK(cli({"bogus"}).code == sfm::cli::kUsage);
  CHECK(cli({"--help"}).code == sfm::cli::kOk);
}

TEST_CASE("estimate on a missing file exits with 2") {
  const auto r = cli({"estimate", "/nonexistent/x.csv", "--r", "2"});
  CHECK(r.code == sfm::cli::kDataError);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("estimate with lambda 0 recovers the eigen span") {
  TempDir dir("lambda0");
  write_returns(dir.path / "x.csv", 12, 200, 3);
  const auto r = cli({"estimate", (dir.path / "x.csv").string(), "--r", "2", "--no-header", "--lambda", "0", "--out",
                      dir.path.string()});
  REQUIRE(r.code == 0);

  sfm::cli::EstimateArgs a;
  a.input = (dir.path / "x.csv").string();
  a.r = 2;
  a.no_header = true;
  a.lambda = 0.0;
  const auto res = sfm::cli::estimate(a);
  CHECK(res.fit.loading.q.rows() == 12);
  CHECK((res.fit.loading.q.array() != 0.0).count() == 24);
  CHECK(sfm::subspace_distance(res.fit.loading.q, res.s_hat.columns) <= 1e-3);

  const auto rows = oracles::read_csv(dir.path / "loadings.csv");
  REQUIRE(rows.size() == 13);
  CHECK(rows[0] == std::vector<std::string>{"variable", "f1", "f2"});
  CHECK(rows[1][0] == "x1");
  const auto fit = nlohmann::json::parse(slurp(dir.path / "fit.json"));
  CHECK(fit["lambda_source"] == "fixed");
  CHECK(fit["lambda"] == 0.0);
  CHECK(fit["nonzero_count"] == 24);
}

TEST_CASE("BIC-selected estimate writes consistent outputs") {
  TempDir dir("bic");
  write_returns(dir.path / "x.csv", 20, 300, 5);
  const auto r = cli({"estimate", (dir.path / "x.csv").string(), "--r", "2", "--no-header", "--grid-count", "20",
                      "--out", dir.path.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("lambda=") != std::string::npos);

  const auto fit = nlohmann::json::parse(slurp(dir.path / "fit.json"));
  CHECK(fit["schema_version"] == 1);
  CHECK(fit["p"] == 20);
  CHECK(fit["n"] == 300);
  CHECK(fit["r"] == 2);
  CHECK(fit["penalty"] == "mcp");
  CHECK(fit["gamma"] == 3.0);
  CHECK(fit["lambda_source"] == "bic");
  CHECK(fit["grid"].size() == 20);
  CHECK(fit["columns"].size() == 2);
  CHECK(fit["eigenvalues"].size() == 2);

  const auto loadings = oracles::read_csv(dir.path / "loadings.csv");
  long nonzero = 0, zeros = 0;
  bool literal_zero = false;
  for (std::size_t i = 1; i < loadings.size(); ++i)
    for (std::size_t k = 1; k < loadings[i].size(); ++k) {
      if (std::stod(loadings[i][k]) != 0.0) ++nonzero;
      else {
        ++zeros;
        literal_zero = literal_zero || loadings[i][k] == "0";
      }
    }
  CHECK(fit["nonzero_count"] == nonzero);
  CHECK(fit["zero_count"] == zeros);
  if (zeros > 0) CHECK(literal_zero);

  const auto factors = oracles::read_csv(dir.path / "factors.csv");
  REQUIRE(factors.size() == 3);
  CHECK(factors[0].size() == 301);
  CHECK(factors[0][0] == "factor");
  CHECK(factors[0][1] == "t1");
  const auto heat = oracles::read_csv(dir.path / "loading_heatmap.csv");
  CHECK(heat.size() == 1 + 40);
  CHECK(heat[0] == std::vector<std::string>{"variable", "factor", "value"});
}

TEST_CASE("log-diff pipeline on a positive panel") {
  TempDir dir("logdiff");
  oracles::write_positive_panel(dir.path / "prices.csv", 50, 132, 11);
  const auto r = cli({"estimate", (dir.path / "prices.csv").string(), "--r", "2", "--log-diff", "--grid-count", "15",
                      "--out", dir.path.string()});
  REQUIRE(r.code == 0);
  const auto factors = oracles::read_csv(dir.path / "factors.csv");
  CHECK(factors[0].size() == 132);
  const auto loadings = oracles::read_csv(dir.path / "loadings.csv");
  CHECK(loadings.size() == 51);
  CHECK(loadings[1][0] == "s1");
}

TEST_CASE("log-diff of a nonpositive panel exits with 2") {
  TempDir dir("neg");
  std::ofstream(dir.path / "x.csv") << "a,b\n1,2\n3,-1\n4,5\n";
  CHECK(cli({"estimate", (dir.path / "x.csv").string(), "--r", "1", "--log-diff"}).code == sfm::cli::kDataError);
}

TEST_CASE("simulate writes one row per method and is reproducible") {
  TempDir dir("sim");
  write_config(dir.path / "cfg.json", R"({"p": 20, "n": 100, "reps": 3, "seed": 7})");
  const auto a = dir.path / "a", b = dir.path / "b";
  REQUIRE(cli({"simulate", "--config", (dir.path / "cfg.json").string(), "--out", a.string()}).code == 0);
  REQUIRE(cli({"simulate", "--config", (dir.path / "cfg.json").string(), "--threads", "2", "--out", b.string()})
              .code == 0);
  const auto rows = oracles::read_csv(a / "summary.csv");
  REQUIRE(rows.size() == 5);
  CHECK(rows[1][0] == "eigen");
  CHECK(rows[4][0] == "sparse");
  CHECK(slurp(a / "summary.csv") == slurp(b / "summary.csv"));
  CHECK(slurp(a / "summary.txt") == slurp(b / "summary.txt"));
  const auto echo = nlohmann::json::parse(slurp(a / "config.json"));
  CHECK(echo["seed"] == 7);
  CHECK(echo["reps"] == 3);

  const auto c = dir.path / "c";
  REQUIRE(cli({"simulate", "--config", (dir.path / "cfg.json").string(), "--methods", "eigen,varimax2", "--reps", "2",
               "--out", c.string()})
              .code == 0);
  const auto few = oracles::read_csv(c / "summary.csv");
  REQUIRE(few.size() == 3);
  CHECK(few[2][0] == "varimax2");
}

TEST_CASE("simulate rejects bad configurations with exit 2") {
  TempDir dir("simbad");
  write_config(dir.path / "unknown.json", R"({"p": 20, "colour": 1})");
  const auto r = cli({"simulate", "--config", (dir.path / "unknown.json").string(), "--out", dir.path.string()});
  CHECK(r.code == sfm::cli::kDataError);
  CHECK(r.err.find("colour") != std::string::npos);

  write_config(dir.path / "ok.json", R"({"p": 20, "n": 60, "reps": 1})");
  CHECK(cli({"simulate", "--config", (dir.path / "ok.json").string(), "--methods", "pca"}).code ==
        sfm::cli::kDataError);
  write_config(dir.path / "block.json", R"({"p": 10, "pattern": "block", "block_size": 11})");
  CHECK(cli({"simulate", "--config", (dir.path / "block.json").string()}).code == sfm::cli::kDataError);
  write_config(dir.path / "broken.json", "{\"p\": ");
  CHECK(cli({"simulate", "--config", (dir.path / "broken.json").string()}).code == sfm::cli::kDataError);
}

TEST_CASE("parse_month accepts ISO-style dates only") {
  using sfm::cli::parse_month;
  CHECK(parse_month("2003-04") == 4);
  CHECK(parse_month("2003-12-31") == 12);
  CHECK(parse_month("2003/01/15") == 1);
  CHECK_FALSE(parse_month("2003-13").has_value());
  CHECK_FALSE(parse_month("2003-00-01").has_value());
  CHECK_FALSE(parse_month("04/2003").has_value());
  CHECK_FALSE(parse_month("2003-04-").has_value());
}

TEST_CASE("factors-report groups by calendar month") {
  TempDir dir("report");
  std::ofstream fac(dir.path / "factors.csv");
  fac << "factor";
  for (int t = 1; t <= 132; ++t) fac << ",t" << t;
  fac << "\nf1";
  for (int t = 1; t <= 132; ++t) fac << ',' << t;
  fac << '\n';
  fac.close();
  std::ofstream dates(dir.path / "dates.csv");
  dates << "date\n";
  for (int t = 0; t < 132; ++t) dates << 2000 + t / 12 << '-' << (t % 12 < 9 ? "0" : "") << t % 12 + 1 << "-01\n";
  dates.close();

  const auto r = cli({"factors-report", "--factors", (dir.path / "factors.csv").string(), "--dates",
                      (dir.path / "dates.csv").string(), "--out", dir.path.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("12 month group(s)") != std::string::npos);
  const auto rows = oracles::read_csv(dir.path / "factors_by_month.csv");
  REQUIRE(rows.size() == 133);
  CHECK(rows[1] == std::vector<std::string>{"1", "f1", "1"});
  CHECK(rows[2] == std::vector<std::string>{"1", "f1", "13"});
  CHECK(rows[12][0] == "2");
}

TEST_CASE("factors-report with one month and with bad dates") {
  TempDir dir("report1");
  std::ofstream(dir.path / "factors.csv") << "factor,t1\nf1,0.5\nf2,-1\n";
  std::ofstream(dir.path / "one.csv") << "2010-06\n";
  const auto ok = cli({"factors-report", "--factors", (dir.path / "factors.csv").string(), "--dates",
                       (dir.path / "one.csv").string(), "--out", dir.path.string()});
  REQUIRE(ok.code == 0);
  CHECK(ok.out.find("1 month group(s)") != std::string::npos);

  std::ofstream(dir.path / "bad.csv") << "date\n2010-06\nJune 2010\n";
  std::ofstream(dir.path / "two.csv") << "2010-06\n2010-07\n";
  std::ofstream(dir.path / "factors2.csv") << "factor,t1,t2\nf1,1,2\n";
  const auto bad = cli({"factors-report", "--factors", (dir.path / "factors2.csv").string(), "--dates",
                        (dir.path / "bad.csv").string(), "--out", dir.path.string()});
  CHECK(bad.code == sfm::cli::kDataError);
  CHECK(bad.err.find("row 3") != std::string::npos);

  const auto mismatch = cli({"factors-report", "--factors", (dir.path / "factors.csv").string(), "--dates",
                             (dir.path / "two.csv").string(), "--out", dir.path.string()});
  CHECK(mismatch.code == sfm::cli::kDataError);
}

TEST_CASE("installed binary matches the library entry point") {
  TempDir dir("bin");
  write_returns(dir.path / "x.csv", 10, 120, 8);
  const std::string cmd = std::string(SFM_CLI_PATH) + " estimate " + (dir.path / "x.csv").string() +
                          " --r 2 --no-header --grid-count 10 --out " + (dir.path / "bin").string() + " > /dev/null";
  REQUIRE(std::system(cmd.c_str()) == 0);
  REQUIRE(cli({"estimate", (dir.path / "x.csv").string(), "--r", "2", "--no-header", "--grid-count", "10", "--out",
               (dir.path / "lib").string()})
              .code == 0);
  CHECK(slurp(dir.path / "bin" / "loadings.csv") == slurp(dir.path / "lib" / "loadings.csv"));
  const std::string missing = std::string(SFM_CLI_PATH) + " estimate " + (dir.path / "x.csv").string() + " 2> /dev/null";
  const int status = std::system(missing.c_str());
  CHECK(WEXITSTATUS(status) == 1);
}
