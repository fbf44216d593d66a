#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mcinf/bench.hpp"
#include "mcinf/error.hpp"
#include "support.hpp"

using namespace mcinf;
using namespace mcinf::bench;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.n = 60;
  c.r = 2;
  c.p = 0.5;
  c.sigmas = {1e-2};
  c.trials = 6;
  c.seed = 3;
  c.threads = 1;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const char* name) {
  const auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config validation") {
  ExperimentConfig c = small_config();
  c.validate();
  c.trials = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.p = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.alpha = 1.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.sigmas = {};
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.apply_desk();
  CHECK(c.n == 500);
  CHECK(c.trials == 100);
  CHECK(small_config().lambda_for(1e-2) == doctest::Approx(default_lambda(1e-2, 60, 0.5)));
  CHECK(parse_estimator("both") == EstimatorChoice::both);
  CHECK_THROWS_AS(parse_estimator("lasso"), ConfigError);
}

TEST_CASE("parallel_for stores by index and rethrows the lowest failure") {
  std::vector<int> out(50, -1);
  parallel_for(50, 4, [&](int k) { out[static_cast<std::size_t>(k)] = k * k; });
  for (int k = 0; k < 50; ++k) CHECK(out[static_cast<std::size_t>(k)] == k * k);
  try {
    parallel_for(8, 1, [](int k) {
      if (k >= 3) throw std::runtime_error("task " + std::to_string(k));
    });
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "task 3");
  }
}

TEST_CASE("trial seeds are distinct and stable") {
  CHECK(trial_seed(1, 0) == trial_seed(1, 0));
  CHECK(trial_seed(1, 0) != trial_seed(1, 1));
  CHECK(trial_seed(1, 0) != trial_seed(2, 0));
}

TEST_CASE("coverage run is independent of the thread count") {
  ExperimentConfig c = small_config();
  c.estimator = EstimatorChoice::both;
  const CoverageRun a = run_coverage(c);
  c.threads = 3;
  const CoverageRun b = run_coverage(c);
  REQUIRE(a.reports.size() == 4);
  REQUIRE(b.reports.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) {
    CHECK(a.reports[k].mean_coverage == b.reports[k].mean_coverage);
    CHECK(a.reports[k].std_coverage == b.reports[k].std_coverage);
    CHECK(a.reports[k].mean_ci_length == b.reports[k].mean_ci_length);
    for (std::size_t t = 0; t < a.reports[k].trials.size(); ++t)
      CHECK(a.reports[k].trials[t].err_debiased_fro == b.reports[k].trials[t].err_debiased_fro);
  }
  CHECK(a.samples.T12 == b.samples.T12);
  for (const auto& rep : a.reports) {
    CHECK(rep.mean_coverage >= 0.0);
    CHECK(rep.mean_coverage <= 1.0);
    CHECK(rep.std_coverage >= 0.0);
    CHECK(rep.unconverged_trials == 0);
  }
  CHECK(a.samples.S11.size() == 6);

  const auto d1 = scratch("mcinf_cov_t1");
  const auto d3 = scratch("mcinf_cov_t3");
  write_coverage_csv((d1 / "s.csv").string(), (d1 / "t.csv").string(), a.reports);
  write_coverage_csv((d3 / "s.csv").string(), (d3 / "t.csv").string(), b.reports);
  CHECK(slurp(d1 / "s.csv") == slurp(d3 / "s.csv"));
  CHECK(slurp(d1 / "t.csv") == slurp(d3 / "t.csv"));
  CHECK(slurp(d1 / "s.csv").rfind("n,r,p,sigma,lambda,alpha,trials,estimator,statistic,pairs,mean_coverage", 0) == 0);
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d3);
}

TEST_CASE("vanishing alpha gives full coverage") {
  ExperimentConfig c = small_config();
  c.n = 150;
  c.trials = 4;
  c.alpha = 1e-6;
  for (const auto& rep : run_coverage(c).reports) CHECK(rep.mean_coverage >= 0.999);
}

TEST_CASE("doubling trials shrinks the coverage spread") {
  ExperimentConfig c = small_config();
  c.n = 40;
  c.trials = 30;
  const double s1 = run_coverage(c).reports[0].std_coverage;
  c.trials = 60;
  const double s2 = run_coverage(c).reports[0].std_coverage;
  CHECK(s2 / s1 == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.2));
}

TEST_CASE("estimation sweep with a noiseless column") {
  ExperimentConfig c = small_config();
  c.sigmas = {0.0, 1e-3};
  const auto rows = run_estimation(c);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].rel_err_cvx <= 1e-6);
  CHECK(rows[0].rel_err_debiased <= 1e-6);
  CHECK(rows[0].convex_proxy_trials == c.trials);
  CHECK(rows[0].ratio_debiased_sq == 0.0);
  CHECK(rows[1].convex_proxy_trials == 0);
  CHECK(rows[1].ratio_debiased_sq > 0.0);
  CHECK(rows[1].oracle_fro == doctest::Approx(std::sqrt(2.0 * 60 * 2 * 1e-6 / 0.5)));
}

TEST_CASE("equivalence rows") {
  ExperimentConfig c = small_config();
  c.trials = 2;
  c.sigmas = {1e-3};
  const auto rows = run_equivalence(c);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].kind == "paired");
  CHECK(rows[1].kind == "control");
  for (const auto& row : rows) {
    CHECK(row.gap_cvx_factored >= 0.0);
    CHECK(row.gap_factor >= 0.0);
    CHECK(row.gap_linearized >= 0.0);
    CHECK(row.reference_error > 0.0);
  }
  CHECK(rows[1].gap_cvx_factored == rows[1].gap_ncvx_factored);
  c.sigmas = {0.0};
  CHECK_THROWS_AS(run_equivalence(c), ConfigError);
}

TEST_CASE("export_qq") {
  const auto dir = scratch("mcinf_qq");
  const std::vector<double> x{0.3, -1.2, 0.8, 2.0};
  const double ks = export_qq(x, (dir / "q.csv").string());
  CHECK(ks == doctest::Approx(testing::ks_oracle(x)));
  std::istringstream in(slurp(dir / "q.csv"));
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  REQUIRE(lines.size() == 6);
  CHECK(lines[0] == "sample,normal_quantile");
  CHECK(lines[1].rfind("-1.2,", 0) == 0);
  CHECK(lines[5].rfind("# ks=", 0) == 0);
  const std::vector<double> constant(5, 0.4);
  CHECK(export_qq(constant, (dir / "c.csv").string()) ==
        doctest::Approx(std::max(testing::phi(0.4), 1.0 - testing::phi(0.4))));
  CHECK_THROWS_AS(export_qq({}, (dir / "e.csv").string()), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("synthetic temperature matrix") {
  const Matrix A = synth_temperature(80, 60, 3, 0.0, 5);
  CHECK(A.rows() == 80);
  CHECK(A.cols() == 60);
  CHECK(numerical_rank(A, 1e-10) == 3);
  const Matrix B = synth_temperature(80, 60, 3, 0.5, 5);
  CHECK(numerical_rank(B, 1e-10) > 3);
  CHECK(synth_temperature(80, 60, 3, 0.5, 5) == B);
  CHECK_THROWS_AS(synth_temperature(0, 5, 1, 0.0, 1), ConfigError);
}

TEST_CASE("real-data run on exact low-rank data") {
  const Matrix A = synth_temperature(60, 50, 3, 0.0, 2);
  const MatrixData data{A, full_mask(60, 50)};
  RealDataConfig c;
  c.p_grid = {1.0};
  c.sigma = 0.0;
  c.trials = 2;
  c.threads = 1;
  const auto rows = run_real_data(data, c);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].rel_err_cvx <= 1e-6);
  CHECK(rows[0].rel_err_debiased <= 1e-6);
  CHECK(rows[0].p_hat == 1.0);
}

TEST_CASE("real-data run with matched noise") {
  const Matrix A = synth_temperature(120, 90, 3, 0.0, 4);
  const MatrixData data{A, full_mask(120, 90)};
  RealDataConfig c;
  c.p_grid = {0.5, 0.8};
  c.sigma = 0.5;
  c.add_noise = true;
  c.trials = 3;
  c.threads = 1;
  const auto rows = run_real_data(data, c);
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    CHECK(row.coverage_mean > 0.85);
    CHECK(row.coverage_mean <= 1.0);
    CHECK(row.rel_err_debiased <= row.rel_err_cvx);
    CHECK(row.p_hat == doctest::Approx(row.p).epsilon(0.05));
  }
  c.threads = 2;
  const auto again = run_real_data(data, c);
  CHECK(again[1].coverage_mean == rows[1].coverage_mean);
  CHECK(again[1].rel_err_cvx == rows[1].rel_err_cvx);
}

TEST_CASE("real-data input checks") {
  std::istringstream in("0,0,1\n1,1,2\n2,2,3\n");
  const MatrixData sparse = parse_triplets(in);
  RealDataConfig c;
  c.p_grid = {0.5};
  c.r = 1;
  CHECK_THROWS_AS(run_real_data(sparse, c), ConfigError);
  c.p_grid = {};
  CHECK_THROWS_AS(run_real_data(sparse, c), ConfigError);
}
