#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mcinf/matrix_io.hpp"
#include "mcinf/solvers.hpp"

namespace mcinf::bench {

enum class EstimatorChoice { convex, nonconvex, both };
enum class Statistic { entries, factors };

const char* to_string(EstimatorChoice e);
const char* to_string(Statistic s);
EstimatorChoice parse_estimator(const std::string& s);

struct ExperimentConfig {
  Index n = 1000;
  Index r = 5;
  double p = 0.4;
  std::vector<double> sigmas{1e-3};
  int trials = 200;
  double alpha = 0.05;
  /// lambda = lambda_factor * sigma * sqrt(n p) unless lambda_value is set.
  double lambda_factor = 2.5;
  std::optional<double> lambda_value;
  std::uint64_t seed = 1;
  EstimatorChoice estimator = EstimatorChoice::convex;
  /// 0 selects MCINF_THREADS, then the hardware concurrency.
  int threads = 0;
  /// Cap on evaluated (i, j) pairs per statistic.
  std::size_t max_pairs = 10000;
  SolverOptions nonconvex_opts = SolverOptions::nonconvex_defaults();
  SolverOptions convex_opts = SolverOptions::convex_defaults();

  /// Desk preset: n = 500, 100 trials.
  void apply_desk();
  void validate() const;
  double lambda_for(double sigma) const;
};

/// Worker count actually used for a requested value (see ExperimentConfig::threads).
int resolve_threads(int requested);

/// Runs task(k) for k in [0, count) on a bounded pool. Results must be stored
/// by index; the first exception (lowest k) is rethrown after all workers stop.
void parallel_for(int count, int threads, const std::function<void(int)>& task);

/// Seed of trial k under `master`.
std::uint64_t trial_seed(std::uint64_t master, int k);

struct TrialRecord {
  int trial = 0;
  double coverage = 0.0;        // fraction of evaluated pairs covered in this trial
  double mean_ci_length = 0.0;  // average 2 * half_width over evaluated pairs
  double err_estimate_fro = 0.0;
  double err_debiased_fro = 0.0;
  int iterations_nonconvex = 0;
  int iterations_convex = 0;
  bool converged = true;
  bool convex_proxy = false;  // lambda = 0: the nonconvex estimate stands in for Z^cvx
};

struct CoverageReport {
  ExperimentConfig config;
  double sigma = 0.0;
  double lambda = 0.0;
  EstimatorChoice estimator = EstimatorChoice::convex;
  Statistic statistic = Statistic::entries;
  std::size_t pairs = 0;
  double mean_coverage = 0.0;  // mean over pairs of the per-pair coverage across trials
  double std_coverage = 0.0;
  double mean_ci_length = 0.0;
  std::size_t low_leverage = 0;  // CIs flagged as unreliable, summed over trials
  int unconverged_trials = 0;
  std::vector<TrialRecord> trials;
  double wall_time = 0.0;
};

/// Standardized statistics tracked for Q-Q export, one value per trial.
struct QqSamples {
  std::vector<double> S11, S12, T12, T13, T14;
};

struct CoverageRun {
  std::vector<CoverageReport> reports;  // sigma x estimator x statistic
  /// Samples for the first sigma and first estimator.
  QqSamples samples;
};

CoverageRun run_coverage(const ExperimentConfig& config);

struct EstimationRow {
  double sigma = 0.0;
  double lambda = 0.0;
  int trials = 0;
  double err_cvx_fro = 0.0;
  double err_debiased_fro = 0.0;
  double err_cvx_max = 0.0;
  double err_debiased_max = 0.0;
  double rel_err_cvx = 0.0;
  double rel_err_debiased = 0.0;
  double oracle_fro = 0.0;          // sqrt(2 n r sigma^2 / p)
  double ratio_debiased_sq = 0.0;   // mean ||M^d - M*||_F^2 / (2 n r sigma^2 / p); 0 when sigma = 0
  double frac_debiased_le_cvx = 0.0;
  int convex_proxy_trials = 0;
  int unconverged_trials = 0;
};

/// Masks and noise draws are shared across the sigma sweep (trial k uses the
/// same seed for every sigma).
std::vector<EstimationRow> run_estimation(const ExperimentConfig& config);

struct EquivalenceRow {
  std::string kind;  // "paired" or "control"
  double sigma = 0.0;
  double lambda = 0.0;
  int trials = 0;
  double reference_error = 0.0;
  double gap_cvx_factored = 0.0;
  double gap_ncvx_factored = 0.0;
  double gap_factor = 0.0;
  double gap_linearized = 0.0;
  double max_normalized_gap = 0.0;  // max over gaps and trials of gap / reference_error
  int unconverged_trials = 0;
};

/// Convex and nonconvex solvers run independently from the spectral
/// initialization. A control row feeds the nonconvex estimate in both slots.
std::vector<EquivalenceRow> run_equivalence(const ExperimentConfig& config);

/// Writes `sample,normal_quantile` rows (sorted sample against
/// Phi^{-1}((k - 0.5)/N)) and a trailing `# ks=<value>` line. Returns KS.
double export_qq(const std::vector<double>& samples, const std::string& path);

struct RealDataConfig {
  std::vector<double> p_grid{0.5, 0.6, 0.7, 0.8, 0.9};
  double sigma = 1.0;
  bool add_noise = false;  // add N(0, sigma^2) to the sampled values
  Index r = 3;
  int trials = 20;
  double alpha = 0.05;
  double lambda_factor = 2.5;
  std::uint64_t seed = 1;
  int threads = 0;
  SolverOptions nonconvex_opts = SolverOptions::nonconvex_defaults();
  SolverOptions convex_opts = SolverOptions::convex_defaults();
  void validate() const;
};

struct RealDataRow {
  double p = 0.0;
  double p_hat = 0.0;  // mean over trials
  double lambda = 0.0;
  int trials = 0;
  double coverage_mean = 0.0;  // across trials of the held-out coverage fraction
  double coverage_std = 0.0;
  double ci_length_mean = 0.0;
  double ci_length_std = 0.0;
  double rel_err_cvx = 0.0;
  double rel_err_debiased = 0.0;
  double frac_debiased_le_cvx = 0.0;
  int unconverged_trials = 0;
};

/// Treats `data` as the reference matrix. For each p, keeps each available
/// entry with probability p / density, fits on the kept entries (p_hat in the
/// losses) and scores the CIs on the held-out available entries.
std::vector<RealDataRow> run_real_data(const MatrixData& data, const RealDataConfig& config);

/// Temperature-shaped synthetic matrix: station offsets and seasonal
/// harmonics give an exactly rank-`rank` matrix; `tail` > 0 adds smaller
/// components with geometrically decaying scale (approximately low rank).
Matrix synth_temperature(Index rows, Index cols, Index rank, double tail, std::uint64_t seed);

// CSV writers. Column sets are fixed per subcommand.
void write_coverage_csv(const std::string& summary_path, const std::string& trials_path,
                        const std::vector<CoverageReport>& reports);
void write_estimation_csv(const std::string& path, const std::vector<EstimationRow>& rows);
void write_equivalence_csv(const std::string& path, const std::vector<EquivalenceRow>& rows);
void write_realdata_csv(const std::string& path, const std::vector<RealDataRow>& rows);

/// Command-line entry point. Exit codes: 0 success, 2 configuration error,
/// 3 numerical failure.
int cli_main(int argc, char** argv);

}  // namespace mcinf::bench
