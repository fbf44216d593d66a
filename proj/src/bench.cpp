#include "mcinf/bench.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "mcinf/debias.hpp"
#include "mcinf/error.hpp"
#include "mcinf/infer.hpp"
#include "mcinf/model.hpp"
#include "mcinf/normal.hpp"
#include "mcinf/oracle.hpp"

namespace mcinf::bench {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double max_abs(const Matrix& A) { return A.cwiseAbs().maxCoeff(); }

void require_finite_value(double v, const char* what) {
  if (!std::isfinite(v)) throw NumericalError(std::string("non-finite value in ") + what);
}

std::vector<EstimatorChoice> expand(EstimatorChoice e) {
  if (e == EstimatorChoice::both) return {EstimatorChoice::convex, EstimatorChoice::nonconvex};
  return {e};
}

// Seeded subsample (without replacement, sorted) of the n1 x n2 grid, or of
// the pairs i < j when `upper` is set.
std::vector<Index2> evaluation_pairs(Index n1, Index n2, bool upper, std::size_t cap, std::uint64_t seed) {
  const double total = upper ? 0.5 * static_cast<double>(n1) * static_cast<double>(n1 - 1)
                             : static_cast<double>(n1) * static_cast<double>(n2);
  std::vector<Index2> out;
  if (total <= static_cast<double>(cap)) {
    for (Index i = 0; i < n1; ++i)
      for (Index j = upper ? i + 1 : 0; j < (upper ? n1 : n2); ++j) out.push_back({i, j});
    return out;
  }
  Rng rng(derive_seed(seed, upper ? stream::pairs + 1 : stream::pairs));
  std::uniform_int_distribution<Index> row(0, n1 - 1);
  std::uniform_int_distribution<Index> col(0, (upper ? n1 : n2) - 1);
  std::unordered_set<std::uint64_t> seen;
  const auto width = static_cast<std::uint64_t>(upper ? n1 : n2);
  while (out.size() < cap) {
    Index i = row(rng);
    Index j = col(rng);
    if (upper) {
      if (i == j) continue;
      if (i > j) std::swap(i, j);
    }
    if (seen.insert(static_cast<std::uint64_t>(i) * width + static_cast<std::uint64_t>(j)).second)
      out.push_back({i, j});
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct Fit {
  EstimatorOutput output;
  bool convex_proxy = false;
  int iterations_nonconvex = 0;
  int iterations_convex = 0;
  bool converged = true;
};

// Nonconvex fit, then (for the convex estimator) proximal gradient
// warm-started at the nonconvex estimate. With lambda = 0 the convex program
// is not defined here and the nonconvex estimate is used in its place.
Fit fit(const ObservationSet& obs, double lambda, EstimatorChoice which, const EstimatorOutput& ncvx,
        const SolverOptions& convex_opts) {
  Fit f;
  f.iterations_nonconvex = ncvx.iterations;
  f.converged = ncvx.converged;
  if (which == EstimatorChoice::nonconvex) {
    f.output = ncvx;
    return f;
  }
  if (lambda > 0.0) {
    f.output = solve_convex(obs, lambda, convex_opts, ncvx.Z);
    f.iterations_convex = f.output.iterations;
    f.converged = f.converged && f.output.converged;
  } else {
    f.output = ncvx;
    f.output.factors.reset();
    f.convex_proxy = true;
  }
  return f;
}

struct PairEval {
  std::vector<std::uint8_t> hits;
  double mean_length = 0.0;
  std::size_t low_leverage = 0;
};

PairEval evaluate_entries(const DebiasedEstimate& d, const LeverageTable& lev, const Matrix& Mstar,
                          const std::vector<Index2>& pairs, double sigma, double p, double alpha) {
  PairEval ev;
  ev.hits.resize(pairs.size());
  double len = 0.0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    const VarianceEstimate v = entry_variance(lev, sigma, p, i, j);
    const ConfidenceInterval ci = entry_ci(d.Md(i, j), v, alpha);
    ev.hits[k] = ci.contains(Mstar(i, j)) ? 1 : 0;
    len += 2.0 * ci.half_width;
    ev.low_leverage += v.low_leverage ? 1 : 0;
  }
  ev.mean_length = pairs.empty() ? 0.0 : len / static_cast<double>(pairs.size());
  return ev;
}

PairEval evaluate_factors(const DebiasedEstimate& d, const LeverageTable& lev, const Matrix& Xstar,
                          const std::vector<Index2>& pairs, double sigma, double p, double alpha) {
  PairEval ev;
  ev.hits.resize(pairs.size());
  double len = 0.0;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [i, j] = pairs[k];
    const VarianceEstimate v = factor_variance(lev, sigma, p, i, j);
    const ConfidenceInterval ci = entry_ci(d.Xd.row(i).dot(d.Xd.row(j)), v, alpha);
    ev.hits[k] = ci.contains(Xstar.row(i).dot(Xstar.row(j))) ? 1 : 0;
    len += 2.0 * ci.half_width;
    ev.low_leverage += v.low_leverage ? 1 : 0;
  }
  ev.mean_length = pairs.empty() ? 0.0 : len / static_cast<double>(pairs.size());
  return ev;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << std::setprecision(10);
  return out;
}

void validate_solver_opts(const SolverOptions& a, const SolverOptions& b) {
  a.validate();
  b.validate();
}

}  // namespace

const char* to_string(EstimatorChoice e) {
  switch (e) {
    case EstimatorChoice::convex:
      return "convex";
    case EstimatorChoice::nonconvex:
      return "nonconvex";
    case EstimatorChoice::both:
      return "both";
  }
  return "?";
}

const char* to_string(Statistic s) { return s == Statistic::entries ? "entries" : "factors"; }

EstimatorChoice parse_estimator(const std::string& s) {
  if (s == "convex") return EstimatorChoice::convex;
  if (s == "nonconvex") return EstimatorChoice::nonconvex;
  if (s == "both") return EstimatorChoice::both;
  throw ConfigError("unknown estimator '" + s + "' (expected convex, nonconvex or both)");
}

void ExperimentConfig::apply_desk() {
  n = 500;
  trials = 100;
}

void ExperimentConfig::validate() const {
  if (n < 2) throw ConfigError("n must be at least 2");
  if (r < 1 || r > n) throw ConfigError("r must lie in [1, n]");
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("p must lie in (0, 1]");
  if (sigmas.empty()) throw ConfigError("at least one sigma is required");
  for (double s : sigmas)
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("sigma must be finite and nonnegative");
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!(lambda_factor >= 0.0) || !std::isfinite(lambda_factor)) throw ConfigError("lambda factor must be nonnegative");
  if (lambda_value && (!(*lambda_value >= 0.0) || !std::isfinite(*lambda_value)))
    throw ConfigError("lambda must be finite and nonnegative");
  if (threads < 0) throw ConfigError("threads must be nonnegative");
  if (max_pairs < 1) throw ConfigError("max_pairs must be positive");
  validate_solver_opts(nonconvex_opts, convex_opts);
}

double ExperimentConfig::lambda_for(double sigma) const {
  if (lambda_value) return *lambda_value;
  return lambda_factor / 2.5 * default_lambda(sigma, n, p);
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MCINF_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<int>(v);
    throw ConfigError("MCINF_THREADS must be a positive integer");
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(int count, int threads, const std::function<void(int)>& task) {
  if (count <= 0) return;
  const int workers = std::min(resolve_threads(threads), count);
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  auto work = [&] {
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= count || failed.load()) return;
      try {
        task(k);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
        failed.store(true);
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::uint64_t trial_seed(std::uint64_t master, int k) {
  return derive_seed(derive_seed(master, stream::trial), static_cast<std::uint64_t>(k));
}

CoverageRun run_coverage(const ExperimentConfig& config) {
  config.validate();
  const auto estimators = expand(config.estimator);
  const GroundTruth gt = generate_ground_truth(config.n, config.r, unit_spectrum(config.r), config.seed);
  const Matrix Mstar = gt.matrix();
  const std::vector<Index2> entry_pairs = evaluation_pairs(config.n, config.n, false, config.max_pairs, config.seed);
  const std::vector<Index2> factor_pairs = evaluation_pairs(config.n, config.n, true, config.max_pairs, config.seed);

  struct EstimatorTrial {
    PairEval entries;
    PairEval factors;
    TrialRecord record;
  };
  struct Trial {
    std::vector<EstimatorTrial> per_estimator;
    double S11 = 0, S12 = 0, T12 = 0, T13 = 0, T14 = 0;
  };

  CoverageRun run;
  for (std::size_t s = 0; s < config.sigmas.size(); ++s) {
    const double sigma = config.sigmas[s];
    const double lambda = config.lambda_for(sigma);
    const auto t0 = Clock::now();
    std::vector<Trial> trials(static_cast<std::size_t>(config.trials));
    parallel_for(config.trials, config.threads, [&](int k) {
      const std::uint64_t ts = trial_seed(config.seed, k);
      const ObservationSet obs = observe(gt, sample_mask(config.n, config.n, config.p, ts), sigma, ts, config.p);
      const EstimatorOutput ncvx = solve_nonconvex(obs, config.r, lambda, config.nonconvex_opts);
      Trial& t = trials[static_cast<std::size_t>(k)];
      for (std::size_t e = 0; e < estimators.size(); ++e) {
        const Fit f = fit(obs, lambda, estimators[e], ncvx, config.convex_opts);
        const DebiasedEstimate d = debias(f.output, obs, config.r);
        const LeverageTable lev(d.Xd, d.Yd);
        EstimatorTrial et;
        et.entries = evaluate_entries(d, lev, Mstar, entry_pairs, sigma, config.p, config.alpha);
        et.factors = evaluate_factors(d, lev, gt.Xstar, factor_pairs, sigma, config.p, config.alpha);
        et.record.trial = k;
        et.record.err_estimate_fro = (f.output.Z - Mstar).norm();
        et.record.err_debiased_fro = (d.Md - Mstar).norm();
        et.record.iterations_nonconvex = f.iterations_nonconvex;
        et.record.iterations_convex = f.iterations_convex;
        et.record.converged = f.converged;
        et.record.convex_proxy = f.convex_proxy;
        require_finite_value(et.record.err_debiased_fro, "coverage trial");
        if (e == 0 && sigma > 0.0 && config.n >= 4) {
          auto S = [&](Index i, Index j) {
            return (d.Md(i, j) - Mstar(i, j)) / std::sqrt(entry_variance(lev, sigma, config.p, i, j).value);
          };
          auto T = [&](Index i, Index j) {
            const double rho = factor_variance(lev, sigma, config.p, i, j).value;
            return (d.Xd.row(i).dot(d.Xd.row(j)) - gt.Xstar.row(i).dot(gt.Xstar.row(j))) / std::sqrt(rho);
          };
          t.S11 = S(0, 0);
          t.S12 = S(0, 1);
          t.T12 = T(0, 1);
          t.T13 = T(0, 2);
          t.T14 = T(0, 3);
        }
        t.per_estimator.push_back(std::move(et));
      }
    });

    const double wall = seconds_since(t0);
    for (std::size_t e = 0; e < estimators.size(); ++e) {
      for (Statistic stat : {Statistic::entries, Statistic::factors}) {
        const auto& pairs = stat == Statistic::entries ? entry_pairs : factor_pairs;
        CoverageReport rep;
        rep.config = config;
        rep.sigma = sigma;
        rep.lambda = lambda;
        rep.estimator = estimators[e];
        rep.statistic = stat;
        rep.pairs = pairs.size();
        rep.wall_time = wall;
        std::vector<std::uint32_t> counts(pairs.size(), 0);
        std::vector<double> lengths;
        for (const Trial& t : trials) {
          const EstimatorTrial& et = t.per_estimator[e];
          const PairEval& ev = stat == Statistic::entries ? et.entries : et.factors;
          std::size_t covered = 0;
          for (std::size_t k = 0; k < pairs.size(); ++k) {
            counts[k] += ev.hits[k];
            covered += ev.hits[k];
          }
          TrialRecord rec = et.record;
          rec.coverage = static_cast<double>(covered) / static_cast<double>(pairs.size());
          rec.mean_ci_length = ev.mean_length;
          lengths.push_back(ev.mean_length);
          rep.low_leverage += ev.low_leverage;
          rep.unconverged_trials += rec.converged ? 0 : 1;
          rep.trials.push_back(rec);
        }
        std::vector<double> cov(pairs.size());
        for (std::size_t k = 0; k < pairs.size(); ++k)
          cov[k] = static_cast<double>(counts[k]) / static_cast<double>(config.trials);
        rep.mean_coverage = mean_of(cov);
        rep.std_coverage = std_of(cov);
        rep.mean_ci_length = mean_of(lengths);
        require_finite_value(rep.mean_ci_length, "coverage summary");
        run.reports.push_back(std::move(rep));
      }
    }
    if (s == 0) {
      for (const Trial& t : trials) {
        run.samples.S11.push_back(t.S11);
        run.samples.S12.push_back(t.S12);
        run.samples.T12.push_back(t.T12);
        run.samples.T13.push_back(t.T13);
        run.samples.T14.push_back(t.T14);
      }
    }
  }
  return run;
}

std::vector<EstimationRow> run_estimation(const ExperimentConfig& config) {
  config.validate();
  const GroundTruth gt = generate_ground_truth(config.n, config.r, unit_spectrum(config.r), config.seed);
  const Matrix Mstar = gt.matrix();
  const double mnorm = Mstar.norm();
  const std::size_t S = config.sigmas.size();

  struct Cell {
    double err_cvx = 0, err_d = 0, max_cvx = 0, max_d = 0;
    bool proxy = false;
    bool converged = true;
  };
  std::vector<std::vector<Cell>> cells(static_cast<std::size_t>(config.trials), std::vector<Cell>(S));
  parallel_for(config.trials, config.threads, [&](int k) {
    const std::uint64_t ts = trial_seed(config.seed, k);
    const IndexSet mask = sample_mask(config.n, config.n, config.p, ts);
    for (std::size_t s = 0; s < S; ++s) {
      const double sigma = config.sigmas[s];
      const double lambda = config.lambda_for(sigma);
      const ObservationSet obs = observe(gt, mask, sigma, ts, config.p);
      const EstimatorOutput ncvx = solve_nonconvex(obs, config.r, lambda, config.nonconvex_opts);
      const Fit f = fit(obs, lambda, EstimatorChoice::convex, ncvx, config.convex_opts);
      const DebiasedEstimate d = debias(f.output, obs, config.r);
      Cell& c = cells[static_cast<std::size_t>(k)][s];
      c.err_cvx = (f.output.Z - Mstar).norm();
      c.err_d = (d.Md - Mstar).norm();
      c.max_cvx = max_abs(f.output.Z - Mstar);
      c.max_d = max_abs(d.Md - Mstar);
      c.proxy = f.convex_proxy;
      c.converged = f.converged;
      require_finite_value(c.err_d, "estimation trial");
    }
  });

  std::vector<EstimationRow> rows;
  for (std::size_t s = 0; s < S; ++s) {
    EstimationRow row;
    row.sigma = config.sigmas[s];
    row.lambda = config.lambda_for(row.sigma);
    row.trials = config.trials;
    const double oracle = oracle_l2_lower(config.n, config.r, row.sigma, config.p);
    row.oracle_fro = std::sqrt(oracle);
    int le = 0;
    double ratio = 0.0;
    for (int k = 0; k < config.trials; ++k) {
      const Cell& c = cells[static_cast<std::size_t>(k)][s];
      row.err_cvx_fro += c.err_cvx;
      row.err_debiased_fro += c.err_d;
      row.err_cvx_max += c.max_cvx;
      row.err_debiased_max += c.max_d;
      if (oracle > 0.0) ratio += c.err_d * c.err_d / oracle;
      le += c.err_d <= c.err_cvx ? 1 : 0;
      row.convex_proxy_trials += c.proxy ? 1 : 0;
      row.unconverged_trials += c.converged ? 0 : 1;
    }
    const double T = static_cast<double>(config.trials);
    row.err_cvx_fro /= T;
    row.err_debiased_fro /= T;
    row.err_cvx_max /= T;
    row.err_debiased_max /= T;
    row.rel_err_cvx = row.err_cvx_fro / mnorm;
    row.rel_err_debiased = row.err_debiased_fro / mnorm;
    row.ratio_debiased_sq = ratio / T;
    row.frac_debiased_le_cvx = le / T;
    rows.push_back(row);
  }
  return rows;
}

std::vector<EquivalenceRow> run_equivalence(const ExperimentConfig& config) {
  config.validate();
  const GroundTruth gt = generate_ground_truth(config.n, config.r, unit_spectrum(config.r), config.seed);
  const std::size_t S = config.sigmas.size();
  for (double s : config.sigmas)
    if (!(config.lambda_for(s) > 0.0)) throw ConfigError("equivalence requires lambda > 0 (sigma > 0)");

  struct Cell {
    EquivalenceReport rep;
    bool converged = true;
    std::optional<EquivalenceReport> control;
  };
  std::vector<std::vector<Cell>> cells(static_cast<std::size_t>(config.trials), std::vector<Cell>(S));
  parallel_for(config.trials, config.threads, [&](int k) {
    const std::uint64_t ts = trial_seed(config.seed, k);
    const IndexSet mask = sample_mask(config.n, config.n, config.p, ts);
    for (std::size_t s = 0; s < S; ++s) {
      const double lambda = config.lambda_for(config.sigmas[s]);
      const ObservationSet obs = observe(gt, mask, config.sigmas[s], ts, config.p);
      const FactorPair init = spectral_init(obs, config.r);
      const EstimatorOutput ncvx = solve_nonconvex(obs, config.r, lambda, config.nonconvex_opts, init);
      const EstimatorOutput cvx = solve_convex(obs, lambda, config.convex_opts, Matrix(init.X * init.Y.transpose()));
      Cell& c = cells[static_cast<std::size_t>(k)][s];
      c.rep = equivalence_report(cvx, ncvx, obs, config.r, lambda, &gt);
      c.converged = ncvx.converged && cvx.converged;
      if (k == 0) c.control = equivalence_report(ncvx, ncvx, obs, config.r, lambda, &gt);
    }
  });

  std::vector<EquivalenceRow> rows;
  auto accumulate = [](EquivalenceRow& row, const EquivalenceReport& rep) {
    const double ref = *rep.reference_error;
    row.reference_error += ref;
    row.gap_cvx_factored += rep.matrix_gap_cvx_vs_factored;
    row.gap_ncvx_factored += rep.matrix_gap_ncvx_vs_factored;
    row.gap_factor += rep.factor_procrustes_gap;
    row.gap_linearized += rep.linearized_gap;
    const double worst = std::max({rep.matrix_gap_cvx_vs_factored, rep.matrix_gap_ncvx_vs_factored,
                                   rep.factor_procrustes_gap, rep.linearized_gap});
    row.max_normalized_gap = std::max(row.max_normalized_gap, worst / ref);
    ++row.trials;
  };
  auto finish = [](EquivalenceRow& row) {
    const double T = static_cast<double>(row.trials);
    row.reference_error /= T;
    row.gap_cvx_factored /= T;
    row.gap_ncvx_factored /= T;
    row.gap_factor /= T;
    row.gap_linearized /= T;
    for (double v : {row.reference_error, row.gap_cvx_factored, row.gap_ncvx_factored, row.gap_factor,
                     row.gap_linearized, row.max_normalized_gap})
      require_finite_value(v, "equivalence summary");
  };
  for (std::size_t s = 0; s < S; ++s) {
    EquivalenceRow row;
    row.kind = "paired";
    row.sigma = config.sigmas[s];
    row.lambda = config.lambda_for(row.sigma);
    for (int k = 0; k < config.trials; ++k) {
      const Cell& c = cells[static_cast<std::size_t>(k)][s];
      accumulate(row, c.rep);
      row.unconverged_trials += c.converged ? 0 : 1;
    }
    finish(row);
    rows.push_back(row);
  }
  for (std::size_t s = 0; s < S; ++s) {
    EquivalenceRow row;
    row.kind = "control";
    row.sigma = config.sigmas[s];
    row.lambda = config.lambda_for(row.sigma);
    accumulate(row, *cells[0][s].control);
    finish(row);
    rows.push_back(row);
  }
  return rows;
}

double export_qq(const std::vector<double>& samples, const std::string& path) {
  if (samples.empty()) throw ConfigError("export_qq: no samples");
  std::vector<double> sorted(samples);
  for (double v : sorted) require_finite_value(v, "Q-Q samples");
  std::sort(sorted.begin(), sorted.end());
  const double ks = ks_statistic(sorted);
  std::ofstream out = open_out(path);
  out << "sample,normal_quantile\n";
  const double N = static_cast<double>(sorted.size());
  for (std::size_t k = 0; k < sorted.size(); ++k)
    out << sorted[k] << ',' << normal_quantile((static_cast<double>(k) + 0.5) / N) << '\n';
  out << "# ks=" << ks << '\n';
  return ks;
}

void RealDataConfig::validate() const {
  if (p_grid.empty()) throw ConfigError("p grid is empty");
  for (double p : p_grid)
    if (!(p > 0.0 && p <= 1.0)) throw ConfigError("every p must lie in (0, 1]");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be finite and nonnegative");
  if (r < 1) throw ConfigError("r must be positive");
  if (trials < 1) throw ConfigError("trials must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!(lambda_factor >= 0.0)) throw ConfigError("lambda factor must be nonnegative");
  if (threads < 0) throw ConfigError("threads must be nonnegative");
  validate_solver_opts(nonconvex_opts, convex_opts);
}

std::vector<RealDataRow> run_real_data(const MatrixData& data, const RealDataConfig& config) {
  config.validate();
  const Index n1 = data.rows();
  const Index n2 = data.cols();
  if (config.r > std::min(n1, n2)) throw ConfigError("r exceeds the matrix dimensions");
  const double density = data.density();
  for (double p : config.p_grid)
    if (p > density + 1e-12) {
      std::ostringstream msg;
      msg << "p = " << p << " exceeds the density of available entries (" << density << ")";
      throw ConfigError(msg.str());
    }
  const auto& avail = data.available.indices;
  double ref_sq = 0.0;
  for (const Index2& ix : avail) ref_sq += data.values(ix.row, ix.col) * data.values(ix.row, ix.col);
  const double ref_norm = std::sqrt(ref_sq);
  if (!(ref_norm > 0.0)) throw ConfigError("reference matrix is zero on its available entries");

  struct Cell {
    double p_hat = 0, lambda = 0, coverage = 0, length = 0, err_cvx = 0, err_d = 0;
    bool converged = true;
  };
  const int P = static_cast<int>(config.p_grid.size());
  std::vector<Cell> cells(static_cast<std::size_t>(P * config.trials));
  parallel_for(P * config.trials, config.threads, [&](int task) {
    const int pi = task / config.trials;
    const int k = task % config.trials;
    const double p = config.p_grid[static_cast<std::size_t>(pi)];
    const std::uint64_t ts = trial_seed(derive_seed(config.seed, static_cast<std::uint64_t>(pi)), k);
    const double keep = std::min(1.0, p / density);
    Rng rng(derive_seed(ts, stream::mask));
    IndexSet mask{n1, n2, {}};
    std::vector<Index2> held_out;
    for (const Index2& ix : avail) {
      const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
      (u < keep ? mask.indices : held_out).push_back(ix);
    }
    if (mask.indices.empty()) throw ConfigError("subsample kept no entries");
    const ObservationSet obs = observe_matrix(data.values, mask, config.add_noise ? config.sigma : 0.0, ts);
    const double p_hat = obs.p_hat();
    const double lambda =
        config.lambda_factor * config.sigma * std::sqrt(static_cast<double>(std::max(n1, n2)) * p_hat);
    const EstimatorOutput ncvx = solve_nonconvex(obs, config.r, lambda, config.nonconvex_opts);
    const Fit f = fit(obs, lambda, EstimatorChoice::convex, ncvx, config.convex_opts);
    const DebiasedEstimate d = debias(f.output, obs, config.r);
    const LeverageTable lev(d.Xd, d.Yd);
    Cell& c = cells[static_cast<std::size_t>(task)];
    c.p_hat = p_hat;
    c.lambda = lambda;
    c.converged = f.converged;
    std::size_t covered = 0;
    double len = 0.0;
    for (const Index2& ix : held_out) {
      const VarianceEstimate v = entry_variance(lev, config.sigma, p_hat, ix.row, ix.col);
      const ConfidenceInterval ci = entry_ci(d.Md(ix.row, ix.col), v, config.alpha);
      covered += ci.contains(data.values(ix.row, ix.col)) ? 1 : 0;
      len += 2.0 * ci.half_width;
    }
    const double H = static_cast<double>(std::max<std::size_t>(held_out.size(), 1));
    c.coverage = held_out.empty() ? 1.0 : static_cast<double>(covered) / H;
    c.length = held_out.empty() ? 0.0 : len / H;
    double ec = 0.0;
    double ed = 0.0;
    for (const Index2& ix : avail) {
      const double ref = data.values(ix.row, ix.col);
      ec += (f.output.Z(ix.row, ix.col) - ref) * (f.output.Z(ix.row, ix.col) - ref);
      ed += (d.Md(ix.row, ix.col) - ref) * (d.Md(ix.row, ix.col) - ref);
    }
    c.err_cvx = std::sqrt(ec) / ref_norm;
    c.err_d = std::sqrt(ed) / ref_norm;
    require_finite_value(c.err_d, "real-data trial");
  });

  std::vector<RealDataRow> rows;
  for (int pi = 0; pi < P; ++pi) {
    RealDataRow row;
    row.p = config.p_grid[static_cast<std::size_t>(pi)];
    row.trials = config.trials;
    std::vector<double> cov;
    std::vector<double> len;
    int le = 0;
    for (int k = 0; k < config.trials; ++k) {
      const Cell& c = cells[static_cast<std::size_t>(pi * config.trials + k)];
      row.p_hat += c.p_hat;
      row.lambda += c.lambda;
      row.rel_err_cvx += c.err_cvx;
      row.rel_err_debiased += c.err_d;
      le += c.err_d <= c.err_cvx ? 1 : 0;
      row.unconverged_trials += c.converged ? 0 : 1;
      cov.push_back(c.coverage);
      len.push_back(c.length);
    }
    const double T = static_cast<double>(config.trials);
    row.p_hat /= T;
    row.lambda /= T;
    row.rel_err_cvx /= T;
    row.rel_err_debiased /= T;
    row.frac_debiased_le_cvx = le / T;
    row.coverage_mean = mean_of(cov);
    row.coverage_std = std_of(cov);
    row.ci_length_mean = mean_of(len);
    row.ci_length_std = std_of(len);
    rows.push_back(row);
  }
  return rows;
}

Matrix synth_temperature(Index rows, Index cols, Index rank, double tail, std::uint64_t seed) {
  if (rows < 1 || cols < 1) throw ConfigError("synth: dimensions must be positive");
  if (rank < 1 || rank > std::min(rows, cols)) throw ConfigError("synth: rank out of range");
  if (!(tail >= 0.0) || !std::isfinite(tail)) throw ConfigError("synth: tail must be nonnegative");
  Rng rng(derive_seed(seed, stream::truth));
  std::uniform_real_distribution<double> lat_dist(-55.0, 75.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // Station-side coefficients: long-run mean, annual cycle (cos, sin), then
  // higher harmonics with shrinking amplitude.
  Matrix A(rows, rank);
  Matrix B(cols, rank);
  for (Index s = 0; s < rows; ++s) {
    const double lat = lat_dist(rng);
    for (Index k = 0; k < rank; ++k) {
      double a = 0.0;
      if (k == 0)
        a = 28.0 - 0.45 * std::abs(lat) + 2.0 * gauss(rng);
      else if (k == 1)
        a = -0.3 * lat + 1.5 * gauss(rng);
      else if (k == 2)
        a = 0.05 * lat + 1.0 * gauss(rng);
      else
        a = 2.0 / static_cast<double>(k) * gauss(rng);
      A(s, k) = a;
    }
  }
  const double w = 2.0 * std::numbers::pi / static_cast<double>(cols);
  for (Index d = 0; d < cols; ++d) {
    const double t = static_cast<double>(d);
    for (Index k = 0; k < rank; ++k) {
      if (k == 0) {
        B(d, k) = 1.0;
      } else {
        const Index h = (k + 1) / 2;
        B(d, k) = (k % 2 == 1) ? std::cos(w * static_cast<double>(h) * t) : std::sin(w * static_cast<double>(h) * t);
      }
    }
  }
  Matrix M = A * B.transpose();
  if (tail > 0.0) {
    const Index extra = std::min<Index>(40, std::min(rows, cols) - rank);
    Matrix T = Matrix::Zero(rows, cols);
    for (Index k = 0; k < extra; ++k) {
      Vector a(rows);
      Vector b(cols);
      for (Index i = 0; i < rows; ++i) a(i) = gauss(rng);
      for (Index j = 0; j < cols; ++j) b(j) = gauss(rng);
      T += std::pow(0.85, static_cast<double>(k)) * a * b.transpose();
    }
    const double rms = T.norm() / std::sqrt(static_cast<double>(rows * cols));
    if (rms > 0.0) M += (tail / rms) * T;
  }
  return M;
}

void write_coverage_csv(const std::string& summary_path, const std::string& trials_path,
                        const std::vector<CoverageReport>& reports) {
  std::ofstream out = open_out(summary_path);
  out << "n,r,p,sigma,lambda,alpha,trials,estimator,statistic,pairs,mean_coverage,std_coverage,mean_ci_length,"
         "low_leverage,unconverged_trials\n";
  for (const auto& rep : reports)
    out << rep.config.n << ',' << rep.config.r << ',' << rep.config.p << ',' << rep.sigma << ',' << rep.lambda << ','
        << rep.config.alpha << ',' << rep.config.trials << ',' << to_string(rep.estimator) << ','
        << to_string(rep.statistic) << ',' << rep.pairs << ',' << rep.mean_coverage << ',' << rep.std_coverage << ','
        << rep.mean_ci_length << ',' << rep.low_leverage << ',' << rep.unconverged_trials << '\n';
  std::ofstream tr = open_out(trials_path);
  tr << "sigma,estimator,statistic,trial,coverage,mean_ci_length,err_estimate_fro,err_debiased_fro,"
        "iterations_nonconvex,iterations_convex,converged,convex_proxy\n";
  for (const auto& rep : reports)
    for (const auto& t : rep.trials)
      tr << rep.sigma << ',' << to_string(rep.estimator) << ',' << to_string(rep.statistic) << ',' << t.trial << ','
         << t.coverage << ',' << t.mean_ci_length << ',' << t.err_estimate_fro << ',' << t.err_debiased_fro << ','
         << t.iterations_nonconvex << ',' << t.iterations_convex << ',' << (t.converged ? 1 : 0) << ','
         << (t.convex_proxy ? 1 : 0) << '\n';
}

void write_estimation_csv(const std::string& path, const std::vector<EstimationRow>& rows) {
  std::ofstream out = open_out(path);
  out << "sigma,lambda,trials,err_cvx_fro,err_debiased_fro,err_cvx_max,err_debiased_max,rel_err_cvx,"
         "rel_err_debiased,oracle_fro,ratio_debiased_sq,frac_debiased_le_cvx,convex_proxy_trials,unconverged_trials\n";
  for (const auto& r : rows)
    out << r.sigma << ',' << r.lambda << ',' << r.trials << ',' << r.err_cvx_fro << ',' << r.err_debiased_fro << ','
        << r.err_cvx_max << ',' << r.err_debiased_max << ',' << r.rel_err_cvx << ',' << r.rel_err_debiased << ','
        << r.oracle_fro << ',' << r.ratio_debiased_sq << ',' << r.frac_debiased_le_cvx << ','
        << r.convex_proxy_trials << ',' << r.unconverged_trials << '\n';
}

void write_equivalence_csv(const std::string& path, const std::vector<EquivalenceRow>& rows) {
  std::ofstream out = open_out(path);
  out << "kind,sigma,lambda,trials,reference_error,gap_cvx_factored,gap_ncvx_factored,gap_factor,gap_linearized,"
         "max_normalized_gap,unconverged_trials\n";
  for (const auto& r : rows)
    out << r.kind << ',' << r.sigma << ',' << r.lambda << ',' << r.trials << ',' << r.reference_error << ','
        << r.gap_cvx_factored << ',' << r.gap_ncvx_factored << ',' << r.gap_factor << ',' << r.gap_linearized << ','
        << r.max_normalized_gap << ',' << r.unconverged_trials << '\n';
}

void write_realdata_csv(const std::string& path, const std::vector<RealDataRow>& rows) {
  std::ofstream out = open_out(path);
  out << "p,p_hat,lambda,trials,coverage_mean,coverage_std,ci_length_mean,ci_length_std,rel_err_cvx,"
         "rel_err_debiased,frac_debiased_le_cvx,unconverged_trials\n";
  for (const auto& r : rows)
    out << r.p << ',' << r.p_hat << ',' << r.lambda << ',' << r.trials << ',' << r.coverage_mean << ','
        << r.coverage_std << ',' << r.ci_length_mean << ',' << r.ci_length_std << ',' << r.rel_err_cvx << ','
        << r.rel_err_debiased << ',' << r.frac_debiased_le_cvx << ',' << r.unconverged_trials << '\n';
}

}  // namespace mcinf::bench
