#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "mcinf/bench.hpp"
#include "mcinf/error.hpp"

namespace mcinf::bench {

namespace {

using json = nlohmann::ordered_json;

std::vector<double> parse_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ConfigError(std::string("cannot parse ") + what + " value '" + item + "'");
    }
    if (used != item.size()) throw ConfigError(std::string("cannot parse ") + what + " value '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(std::string(what) + " list is empty");
  return out;
}

std::vector<double> json_list(const json& v, const char* what) {
  if (v.is_number()) return {v.get<double>()};
  if (v.is_array()) {
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) throw ConfigError(std::string(what) + " entries must be numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }
  throw ConfigError(std::string(what) + " must be a number or an array of numbers");
}

// Options shared by every subcommand; unset optionals keep the config value.
struct Flags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool desk = false;
  std::optional<Index> n;
  std::optional<Index> r;
  std::optional<double> p;
  std::optional<std::string> sigma;
  std::optional<int> trials;
  std::optional<double> alpha;
  std::optional<double> lambda;
  std::optional<double> lambda_factor;
  std::optional<std::string> estimator;
  std::optional<std::size_t> max_pairs;
  std::optional<double> grad_tol;
  std::optional<double> objective_tol;
  std::optional<int> max_iters;
  // realdata / synth
  std::string input;
  std::optional<std::string> p_grid;
  bool add_noise = false;
  std::string format = "auto";
  Index rows = 1400;
  Index cols = 365;
  double tail = 0.0;
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw ConfigError("config file must hold a JSON object");
  return j;
}

template <typename T>
T get_as(const json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

ExperimentConfig build_experiment(const Flags& f) {
  ExperimentConfig c;
  const json j = load_config(f.config_path);
  bool desk = f.desk;
  if (j.contains("desk")) desk = desk || get_as<bool>(j, "desk");
  if (desk) c.apply_desk();
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "desk") continue;
    if (k == "n") c.n = get_as<Index>(j, "n");
    else if (k == "r") c.r = get_as<Index>(j, "r");
    else if (k == "p") c.p = get_as<double>(j, "p");
    else if (k == "sigma") c.sigmas = json_list(it.value(), "sigma");
    else if (k == "trials") c.trials = get_as<int>(j, "trials");
    else if (k == "alpha") c.alpha = get_as<double>(j, "alpha");
    else if (k == "lambda") c.lambda_value = get_as<double>(j, "lambda");
    else if (k == "lambda_factor") c.lambda_factor = get_as<double>(j, "lambda_factor");
    else if (k == "seed") c.seed = get_as<std::uint64_t>(j, "seed");
    else if (k == "estimator") c.estimator = parse_estimator(get_as<std::string>(j, "estimator"));
    else if (k == "threads") c.threads = get_as<int>(j, "threads");
    else if (k == "max_pairs") c.max_pairs = get_as<std::size_t>(j, "max_pairs");
    else if (k == "grad_tol") c.nonconvex_opts.grad_tol = get_as<double>(j, "grad_tol");
    else if (k == "objective_tol") c.convex_opts.objective_tol = get_as<double>(j, "objective_tol");
    else if (k == "max_iters") c.nonconvex_opts.max_iters = c.convex_opts.max_iters = get_as<int>(j, "max_iters");
    else throw ConfigError("unknown config key '" + k + "'");
  }
  if (f.n) c.n = *f.n;
  if (f.r) c.r = *f.r;
  if (f.p) c.p = *f.p;
  if (f.sigma) c.sigmas = parse_list(*f.sigma, "sigma");
  if (f.trials) c.trials = *f.trials;
  if (f.alpha) c.alpha = *f.alpha;
  if (f.lambda) c.lambda_value = *f.lambda;
  if (f.lambda_factor) c.lambda_factor = *f.lambda_factor;
  if (f.seed) c.seed = *f.seed;
  if (f.estimator) c.estimator = parse_estimator(*f.estimator);
  if (f.threads) c.threads = *f.threads;
  if (f.max_pairs) c.max_pairs = *f.max_pairs;
  if (f.grad_tol) c.nonconvex_opts.grad_tol = *f.grad_tol;
  if (f.objective_tol) c.convex_opts.objective_tol = *f.objective_tol;
  if (f.max_iters) c.nonconvex_opts.max_iters = c.convex_opts.max_iters = *f.max_iters;
  c.validate();
  return c;
}

RealDataConfig build_realdata(const Flags& f, std::string* input) {
  RealDataConfig c;
  const json j = load_config(f.config_path);
  bool have_sigma = false;
  *input = f.input;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "p_grid") c.p_grid = json_list(it.value(), "p_grid");
    else if (k == "sigma") {
      c.sigma = get_as<double>(j, "sigma");
      have_sigma = true;
    } else if (k == "add_noise") c.add_noise = get_as<bool>(j, "add_noise");
    else if (k == "r") c.r = get_as<Index>(j, "r");
    else if (k == "trials") c.trials = get_as<int>(j, "trials");
    else if (k == "alpha") c.alpha = get_as<double>(j, "alpha");
    else if (k == "lambda_factor") c.lambda_factor = get_as<double>(j, "lambda_factor");
    else if (k == "seed") c.seed = get_as<std::uint64_t>(j, "seed");
    else if (k == "threads") c.threads = get_as<int>(j, "threads");
    else if (k == "input") {
      if (input->empty()) *input = get_as<std::string>(j, "input");
    } else throw ConfigError("unknown config key '" + k + "'");
  }
  if (f.p_grid) c.p_grid = parse_list(*f.p_grid, "p");
  if (f.sigma) {
    const auto s = parse_list(*f.sigma, "sigma");
    if (s.size() != 1) throw ConfigError("realdata takes a single sigma");
    c.sigma = s[0];
    have_sigma = true;
  }
  if (!have_sigma) throw ConfigError("realdata requires --sigma (the noise level is not estimated)");
  if (f.add_noise) c.add_noise = true;
  if (f.r) c.r = *f.r;
  if (f.trials) c.trials = *f.trials;
  if (f.alpha) c.alpha = *f.alpha;
  if (f.lambda_factor) c.lambda_factor = *f.lambda_factor;
  if (f.seed) c.seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (f.grad_tol) c.nonconvex_opts.grad_tol = *f.grad_tol;
  if (f.objective_tol) c.convex_opts.objective_tol = *f.objective_tol;
  if (f.max_iters) c.nonconvex_opts.max_iters = c.convex_opts.max_iters = *f.max_iters;
  if (input->empty()) throw ConfigError("realdata requires --input");
  c.validate();
  return c;
}

std::string out_path(const Flags& f, const std::string& name) {
  return (std::filesystem::path(f.out_dir) / name).string();
}

void prepare_out(const Flags& f) {
  std::error_code ec;
  std::filesystem::create_directories(f.out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + f.out_dir + ": " + ec.message());
}

json config_json(const ExperimentConfig& c) {
  json j;
  j["n"] = c.n;
  j["r"] = c.r;
  j["p"] = c.p;
  j["sigma"] = c.sigmas;
  j["trials"] = c.trials;
  j["alpha"] = c.alpha;
  if (c.lambda_value) j["lambda"] = *c.lambda_value;
  else j["lambda_factor"] = c.lambda_factor;
  j["seed"] = c.seed;
  j["estimator"] = to_string(c.estimator);
  return j;
}

void check_finite_json(const json& j) {
  if (j.is_number_float() && !std::isfinite(j.get<double>())) throw NumericalError("non-finite value in summary");
  if (j.is_structured())
    for (const auto& v : j) check_finite_json(v);
}

json cmd_coverage(const Flags& f) {
  const ExperimentConfig c = build_experiment(f);
  prepare_out(f);
  const CoverageRun run = run_coverage(c);
  write_coverage_csv(out_path(f, "coverage_summary.csv"), out_path(f, "coverage_trials.csv"), run.reports);
  json j;
  j["config"] = config_json(c);
  json reps = json::array();
  double wall = 0.0;
  for (const auto& r : run.reports) {
    json x;
    x["sigma"] = r.sigma;
    x["estimator"] = to_string(r.estimator);
    x["statistic"] = to_string(r.statistic);
    x["mean_coverage"] = r.mean_coverage;
    x["std_coverage"] = r.std_coverage;
    x["mean_ci_length"] = r.mean_ci_length;
    x["unconverged_trials"] = r.unconverged_trials;
    reps.push_back(x);
    wall = std::max(wall, r.wall_time);
  }
  j["reports"] = reps;
  j["trial_wall_time"] = wall;
  j["outputs"] = {out_path(f, "coverage_summary.csv"), out_path(f, "coverage_trials.csv")};
  return j;
}

json cmd_qq(const Flags& f) {
  const ExperimentConfig c = build_experiment(f);
  if (!(c.sigmas.front() > 0.0)) throw ConfigError("qq requires sigma > 0");
  if (c.n < 4) throw ConfigError("qq requires n >= 4");
  prepare_out(f);
  const CoverageRun run = run_coverage(c);
  json j;
  j["config"] = config_json(c);
  json ks;
  json outputs = json::array();
  const std::pair<const char*, const std::vector<double>*> stats[] = {
      {"S11", &run.samples.S11}, {"S12", &run.samples.S12}, {"T12", &run.samples.T12},
      {"T13", &run.samples.T13}, {"T14", &run.samples.T14}};
  for (const auto& [name, samples] : stats) {
    const std::string path = out_path(f, std::string("qq_") + name + ".csv");
    ks[name] = export_qq(*samples, path);
    outputs.push_back(path);
  }
  j["ks"] = ks;
  j["outputs"] = outputs;
  return j;
}

json cmd_estimate(const Flags& f) {
  const ExperimentConfig c = build_experiment(f);
  prepare_out(f);
  const auto rows = run_estimation(c);
  write_estimation_csv(out_path(f, "estimation.csv"), rows);
  json j;
  j["config"] = config_json(c);
  json arr = json::array();
  for (const auto& r : rows)
    arr.push_back({{"sigma", r.sigma},
                   {"err_cvx_fro", r.err_cvx_fro},
                   {"err_debiased_fro", r.err_debiased_fro},
                   {"ratio_debiased_sq", r.ratio_debiased_sq},
                   {"frac_debiased_le_cvx", r.frac_debiased_le_cvx}});
  j["rows"] = arr;
  j["outputs"] = {out_path(f, "estimation.csv")};
  return j;
}

json cmd_equivalence(const Flags& f) {
  const ExperimentConfig c = build_experiment(f);
  prepare_out(f);
  const auto rows = run_equivalence(c);
  write_equivalence_csv(out_path(f, "equivalence.csv"), rows);
  json j;
  j["config"] = config_json(c);
  json arr = json::array();
  for (const auto& r : rows)
    arr.push_back({{"kind", r.kind}, {"sigma", r.sigma}, {"max_normalized_gap", r.max_normalized_gap}});
  j["rows"] = arr;
  j["outputs"] = {out_path(f, "equivalence.csv")};
  return j;
}

MatrixFormat parse_format(const std::string& s) {
  if (s == "auto") return MatrixFormat::automatic;
  if (s == "dense") return MatrixFormat::dense;
  if (s == "triplet") return MatrixFormat::triplet;
  throw ConfigError("unknown matrix format '" + s + "'");
}

json cmd_realdata(const Flags& f) {
  std::string input;
  const RealDataConfig c = build_realdata(f, &input);
  const MatrixData data = read_matrix_file(input, parse_format(f.format));
  prepare_out(f);
  const auto rows = run_real_data(data, c);
  write_realdata_csv(out_path(f, "realdata.csv"), rows);
  json j;
  j["input"] = input;
  j["rows_cols"] = {data.rows(), data.cols()};
  j["sigma"] = c.sigma;
  j["add_noise"] = c.add_noise;
  j["reference"] = "held-out entries of the input matrix";
  json arr = json::array();
  for (const auto& r : rows)
    arr.push_back({{"p", r.p},
                   {"coverage_mean", r.coverage_mean},
                   {"ci_length_mean", r.ci_length_mean},
                   {"rel_err_cvx", r.rel_err_cvx},
                   {"rel_err_debiased", r.rel_err_debiased}});
  j["rows"] = arr;
  j["outputs"] = {out_path(f, "realdata.csv")};
  return j;
}

json cmd_synth(const Flags& f) {
  const Index rank = f.r.value_or(3);
  const std::uint64_t seed = f.seed.value_or(1);
  const Matrix M = synth_temperature(f.rows, f.cols, rank, f.tail, seed);
  prepare_out(f);
  const std::string path = out_path(f, "synth.csv");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  write_dense_csv(out, M);
  json j;
  j["rows"] = f.rows;
  j["cols"] = f.cols;
  j["rank"] = rank;
  j["tail"] = f.tail;
  j["outputs"] = {path};
  return j;
}

void add_experiment_flags(CLI::App* app, Flags& f) {
  app->add_option("--n", f.n, "matrix dimension");
  app->add_option("--r", f.r, "rank");
  app->add_option("--p", f.p, "sampling probability");
  app->add_option("--sigma", f.sigma, "noise level (comma-separated sweep allowed)");
  app->add_option("--trials", f.trials, "Monte Carlo trials");
  app->add_option("--alpha", f.alpha, "CI level complement");
  app->add_option("--lambda", f.lambda, "explicit regularization");
  app->add_option("--lambda-factor", f.lambda_factor, "lambda = factor * sigma * sqrt(n p)");
  app->add_option("--estimator", f.estimator, "convex, nonconvex or both");
  app->add_option("--max-pairs", f.max_pairs, "cap on evaluated index pairs");
  app->add_flag("--desk", f.desk, "desk-scale preset (n=500, 100 trials)");
}

void add_solver_flags(CLI::App* app, Flags& f) {
  app->add_option("--grad-tol", f.grad_tol, "nonconvex relative gradient tolerance");
  app->add_option("--objective-tol", f.objective_tol, "convex relative objective tolerance");
  app->add_option("--max-iters", f.max_iters, "iteration cap for both solvers");
}

void add_common_flags(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config_path, "JSON config file");
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--threads", f.threads, "worker threads (default: MCINF_THREADS or hardware)");
  app->add_option("--out", f.out_dir, "output directory")->required();
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Matrix completion inference benchmarks"};
  app.require_subcommand(1);
  Flags f;

  auto* coverage = app.add_subcommand("coverage", "empirical CI coverage for entries and factor inner products");
  auto* estimate = app.add_subcommand("estimate", "estimation errors over a sigma sweep");
  auto* equivalence = app.add_subcommand("equivalence", "convex vs nonconvex de-biasing gaps");
  auto* qq = app.add_subcommand("qq", "Q-Q exports of standardized statistics");
  auto* realdata = app.add_subcommand("realdata", "coverage on a matrix file");
  auto* synth = app.add_subcommand("synth", "write a temperature-shaped synthetic matrix");

  for (auto* sc : {coverage, estimate, equivalence, qq}) {
    add_common_flags(sc, f);
    add_experiment_flags(sc, f);
    add_solver_flags(sc, f);
  }
  add_common_flags(realdata, f);
  add_solver_flags(realdata, f);
  realdata->add_option("--input", f.input, "dense CSV or triplet file");
  realdata->add_option("--format", f.format, "auto, dense or triplet");
  realdata->add_option("--p", f.p_grid, "comma-separated sampling probabilities");
  realdata->add_option("--sigma", f.sigma, "noise level used for the CIs");
  realdata->add_flag("--add-noise", f.add_noise, "add N(0, sigma^2) noise to the sampled entries");
  realdata->add_option("--r", f.r, "rank");
  realdata->add_option("--trials", f.trials, "subsampling repetitions per p");
  realdata->add_option("--alpha", f.alpha, "CI level complement");
  realdata->add_option("--lambda-factor", f.lambda_factor, "lambda = factor * sigma * sqrt(max(n1,n2) p_hat)");

  synth->add_option("--out", f.out_dir, "output directory")->required();
  synth->add_option("--rows", f.rows, "stations");
  synth->add_option("--cols", f.cols, "days");
  synth->add_option("--r", f.r, "rank of the smooth part");
  synth->add_option("--tail", f.tail, "RMS size of the non-low-rank part (0 = exactly low rank)");
  synth->add_option("--seed", f.seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return 2;
  }

  const auto t0 = std::chrono::steady_clock::now();
  try {
    json summary;
    std::string name;
    if (*coverage) {
      name = "coverage";
      summary = cmd_coverage(f);
    } else if (*estimate) {
      name = "estimate";
      summary = cmd_estimate(f);
    } else if (*equivalence) {
      name = "equivalence";
      summary = cmd_equivalence(f);
    } else if (*qq) {
      name = "qq";
      summary = cmd_qq(f);
    } else if (*realdata) {
      name = "realdata";
      summary = cmd_realdata(f);
    } else {
      name = "synth";
      summary = cmd_synth(f);
    }
    check_finite_json(summary);
    json line;
    line["command"] = name;
    line["status"] = "ok";
    for (auto it = summary.begin(); it != summary.end(); ++it) line[it.key()] = it.value();
    line["wall_time"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << line.dump() << std::endl;
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    std::cout << json{{"status", "config_error"}, {"message", e.what()}}.dump() << std::endl;
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    std::cout << json{{"status", "numerical_error"}, {"message", e.what()}}.dump() << std::endl;
    return 3;
  }
}

}  // namespace mcinf::bench
