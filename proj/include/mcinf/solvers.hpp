#pragma once

#include <optional>
#include <vector>

#include "mcinf/linalg.hpp"
#include "mcinf/observe.hpp"

namespace mcinf {

struct SolverOptions {
  int max_iters = 20000;
  double grad_tol = 1e-8;
  std::optional<double> step_size;  // nonconvex only; empty selects 0.5 / sigma_1(X0)^2
  double objective_tol = 1e-12;
  /// Nonconvex only: after a step whose relative imbalance
  /// ||X'X - Y'Y||_F / ||X'X||_F exceeds rebalance_tol, replace (X, Y) by the
  /// balanced factorization of X Y'.
  bool rebalance = true;
  double rebalance_tol = 1e-9;

  static SolverOptions nonconvex_defaults() { return {}; }
  static SolverOptions convex_defaults() { return {5000, 1e-8, std::nullopt, 1e-12}; }
  /// Throws ConfigError unless tolerances > 0, max_iters >= 1, step > 0.
  void validate() const;
};

struct FactorPair {
  Matrix X;
  Matrix Y;
};

struct EstimatorOutput {
  Matrix Z;
  std::optional<FactorPair> factors;
  double lambda = 0.0;
  int iterations = 0;
  /// Nonconvex: ||grad f||_F at the returned iterate. Convex: the first-order
  /// residual ||P_T(P_Omega(Z - M) + lambda U V^T)||_F.
  double final_grad_norm = 0.0;
  /// final_grad_norm / ||(X, Y)||_F (nonconvex) or / ||Z||_F (convex).
  double relative_grad_norm = 0.0;
  double objective = 0.0;
  bool converged = false;
  double step_size = 0.0;
  int monotonicity_violations = 0;
  int rebalances = 0;
  /// Nonconvex: r. Convex: number of singular values surviving the last SVT.
  Index rank = 0;
};

/// 2.5 * sigma * sqrt(n p). sigma = 0 gives 0; negative sigma, n < 1 or p
/// outside (0, 1] throw ConfigError.
double default_lambda(double sigma, Index n, double p);

/// Balanced rank-r factors of the truncated SVD of P_Omega(M) / p_hat.
FactorPair spectral_init(const ObservationSet& obs, Index r);

/// (1/2p)||P_Omega(X Y^T - M)||_F^2 + (lambda/2p)(||X||_F^2 + ||Y||_F^2), p = obs.p().
double nonconvex_loss(const FactorPair& F, const ObservationSet& obs, double lambda);

/// Gradients of nonconvex_loss with respect to X and Y.
FactorPair nonconvex_gradient(const FactorPair& F, const ObservationSet& obs, double lambda);

/// Fixed-step gradient descent on nonconvex_loss from `init` (spectral_init
/// when empty). Stops when ||grad||_F / ||(X, Y)||_F <= grad_tol.
/// A loss increase first halves the step (once); later increases are counted
/// and 20 in a row raise NumericalError with the recent loss trace.
/// See SolverOptions::rebalance for the optional balancing step.
EstimatorOutput solve_nonconvex(const ObservationSet& obs, Index r, double lambda,
                                const SolverOptions& opts = SolverOptions::nonconvex_defaults(),
                                const std::optional<FactorPair>& init = std::nullopt);

/// Singular value soft-thresholding at tau.
Matrix svt(const Matrix& A, double tau);

/// Proximal gradient with unit step on 0.5||P_Omega(Z - M)||_F^2 + lambda ||Z||_*,
/// started from `init` (zero when empty). Stops on relative objective change
/// <= objective_tol. An objective increase beyond rounding raises NumericalError.
EstimatorOutput solve_convex(const ObservationSet& obs, double lambda,
                             const SolverOptions& opts = SolverOptions::convex_defaults(),
                             const std::optional<Matrix>& init = std::nullopt);

/// 0.5||P_Omega(Z - M)||_F^2 + lambda ||Z||_*.
double convex_objective(const Matrix& Z, const ObservationSet& obs, double lambda);

/// X = U S^{1/2}, Y = V S^{1/2} from the rank-r truncated SVD of Z.
FactorPair balanced_factors(const Matrix& Z, Index r);

}  // namespace mcinf
