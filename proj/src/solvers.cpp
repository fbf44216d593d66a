#include "mcinf/solvers.hpp"

#include <cmath>
#include <deque>
#include <sstream>

#include "mcinf/error.hpp"

namespace mcinf {

namespace {

// Factors are held transposed (r x n) inside the hot loops so each row of X
// or Y is a contiguous column.
struct FactorState {
  Matrix Xt;
  Matrix Yt;
};

// Loss and gradient in one sweep over Omega.
double loss_and_gradient(const FactorState& F, const ObservationSet& obs, double lambda, FactorState* grad) {
  const double p = obs.p();
  const auto idx = obs.indices();
  const auto val = obs.values();
  if (grad) {
    grad->Xt.setZero(F.Xt.rows(), F.Xt.cols());
    grad->Yt.setZero(F.Yt.rows(), F.Yt.cols());
  }
  double acc = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Index i = idx[k].row;
    const Index j = idx[k].col;
    const double res = F.Xt.col(i).dot(F.Yt.col(j)) - val[k];
    acc += res * res;
    if (grad) {
      grad->Xt.col(i).noalias() += res * F.Yt.col(j);
      grad->Yt.col(j).noalias() += res * F.Xt.col(i);
    }
  }
  if (grad) {
    grad->Xt = (grad->Xt + lambda * F.Xt) / p;
    grad->Yt = (grad->Yt + lambda * F.Yt) / p;
  }
  return (0.5 * acc + 0.5 * lambda * (F.Xt.squaredNorm() + F.Yt.squaredNorm())) / p;
}

double imbalance(const FactorState& F) {
  const Matrix GX = F.Xt * F.Xt.transpose();
  const Matrix GY = F.Yt * F.Yt.transpose();
  return (GX - GY).norm() / std::max(GX.norm(), 1e-300);
}

// Replaces (X, Y) by the balanced factorization U S^{1/2}, V S^{1/2} of
// X Y'. The product is unchanged and ||X||^2 + ||Y||^2 can only drop, so
// the loss does not increase.
void rebalance(FactorState& F) {
  const Eigen::HouseholderQR<Matrix> qx(F.Xt.transpose());
  const Eigen::HouseholderQR<Matrix> qy(F.Yt.transpose());
  const Index r = F.Xt.rows();
  const Matrix Rx = qx.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  const Matrix Ry = qy.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  Eigen::JacobiSVD<Matrix> svd(Rx * Ry.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector root = svd.singularValues().cwiseSqrt();
  const Matrix Qx = qx.householderQ() * Matrix::Identity(F.Xt.cols(), r);
  const Matrix Qy = qy.householderQ() * Matrix::Identity(F.Yt.cols(), r);
  F.Xt = (Qx * svd.matrixU() * root.asDiagonal()).transpose();
  F.Yt = (Qy * svd.matrixV() * root.asDiagonal()).transpose();
}

void check_factors(const FactorPair& F, const ObservationSet& obs) {
  if (F.X.rows() != obs.n1() || F.Y.rows() != obs.n2() || F.X.cols() != F.Y.cols() || F.X.cols() < 1)
    throw ConfigError("factor dimensions do not match the observation grid");
  require_finite(F.X, "factor X");
  require_finite(F.Y, "factor Y");
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be finite and nonnegative");
}

struct SvtStep {
  Matrix Z;
  Matrix U;
  Matrix V;
  double nuclear = 0.0;
};

SvtStep svt_step(const Matrix& A, double tau) {
  const TruncatedSvd full = full_svd(A);
  Index k = 0;
  while (k < full.S.size() && full.S(k) > tau) ++k;
  SvtStep out;
  const Vector shrunk = (full.S.head(k).array() - tau).matrix();
  out.U = full.U.leftCols(k);
  out.V = full.V.leftCols(k);
  out.Z = out.U * shrunk.asDiagonal() * out.V.transpose();
  out.nuclear = shrunk.sum();
  return out;
}

double nuclear_norm(const Matrix& Z) {
  Eigen::BDCSVD<Matrix> svd(Z);
  return svd.singularValues().sum();
}

// ||P_T(W)||_F for T spanned by the orthonormal columns of U, V.
double tangent_norm(const Matrix& U, const Matrix& V, const Matrix& W) {
  if (U.cols() == 0) return 0.0;
  const Matrix A = U.transpose() * W;
  const Matrix B = W * V;
  const Matrix P = U * A + B * V.transpose() - U * (A * V) * V.transpose();
  return P.norm();
}

}  // namespace

void SolverOptions::validate() const {
  if (max_iters < 1) throw ConfigError("solver: max_iters must be at least 1");
  if (!(grad_tol > 0.0)) throw ConfigError("solver: grad_tol must be positive");
  if (!(objective_tol > 0.0)) throw ConfigError("solver: objective_tol must be positive");
  if (step_size && !(*step_size > 0.0 && std::isfinite(*step_size)))
    throw ConfigError("solver: step_size must be positive");
}

double default_lambda(double sigma, Index n, double p) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("default_lambda: sigma must be nonnegative");
  if (n < 1) throw ConfigError("default_lambda: n must be positive");
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("default_lambda: p must lie in (0, 1]");
  return 2.5 * sigma * std::sqrt(static_cast<double>(n) * p);
}

FactorPair spectral_init(const ObservationSet& obs, Index r) {
  if (obs.size() == 0) throw ConfigError("spectral_init: no observations");
  const TruncatedSvd svd = truncated_svd(obs.dense() / obs.p_hat(), r);
  const Vector root = svd.S.cwiseSqrt();
  return FactorPair{svd.U * root.asDiagonal(), svd.V * root.asDiagonal()};
}

double nonconvex_loss(const FactorPair& F, const ObservationSet& obs, double lambda) {
  check_factors(F, obs);
  return loss_and_gradient(FactorState{F.X.transpose(), F.Y.transpose()}, obs, lambda, nullptr);
}

FactorPair nonconvex_gradient(const FactorPair& F, const ObservationSet& obs, double lambda) {
  check_factors(F, obs);
  FactorState g;
  loss_and_gradient(FactorState{F.X.transpose(), F.Y.transpose()}, obs, lambda, &g);
  return FactorPair{g.Xt.transpose(), g.Yt.transpose()};
}

EstimatorOutput solve_nonconvex(const ObservationSet& obs, Index r, double lambda, const SolverOptions& opts,
                                const std::optional<FactorPair>& init) {
  opts.validate();
  check_lambda(lambda);
  if (r < 1 || r > std::min(obs.n1(), obs.n2())) throw ConfigError("solve_nonconvex: rank out of range");
  FactorPair start = init ? *init : spectral_init(obs, r);
  check_factors(start, obs);
  if (start.X.cols() != r) throw ConfigError("solve_nonconvex: initial factors have the wrong rank");

  double eta = 0.0;
  if (opts.step_size) {
    eta = *opts.step_size;
  } else {
    Eigen::JacobiSVD<Matrix> s(start.X);
    const double s1 = s.singularValues()(0);
    if (!(s1 > 0.0)) throw NumericalError("solve_nonconvex: spectral initialization is zero");
    eta = 0.5 / (s1 * s1);
  }

  FactorState cur{start.X.transpose(), start.Y.transpose()};
  FactorState grad;
  double loss = loss_and_gradient(cur, obs, lambda, &grad);

  EstimatorOutput out;
  out.lambda = lambda;
  out.rank = r;
  bool halved = false;
  int consecutive = 0;
  std::deque<double> trace{loss};
  FactorState next;
  FactorState next_grad;
  int it = 0;
  double gnorm = 0.0;
  double rel = 0.0;
  for (;;) {
    gnorm = std::sqrt(grad.Xt.squaredNorm() + grad.Yt.squaredNorm());
    const double fnorm = std::sqrt(cur.Xt.squaredNorm() + cur.Yt.squaredNorm());
    rel = fnorm > 0.0 ? gnorm / fnorm : gnorm;
    if (!std::isfinite(loss) || !std::isfinite(gnorm))
      throw NumericalError("solve_nonconvex: non-finite loss or gradient");
    if (rel <= opts.grad_tol) {
      out.converged = true;
      break;
    }
    if (it >= opts.max_iters) break;
    ++it;
    next.Xt = cur.Xt - eta * grad.Xt;
    next.Yt = cur.Yt - eta * grad.Yt;
    const double next_loss = loss_and_gradient(next, obs, lambda, &next_grad);
    if (next_loss > loss + 1e-12 * std::abs(loss)) {
      if (!halved) {
        halved = true;
        eta *= 0.5;
        continue;
      }
      ++out.monotonicity_violations;
      if (++consecutive >= 20) {
        std::ostringstream msg;
        msg << "solve_nonconvex: loss increased for 20 consecutive iterations (step " << eta
            << "); recent losses:";
        for (double v : trace) msg << ' ' << v;
        msg << ' ' << next_loss;
        throw NumericalError(msg.str());
      }
    } else {
      consecutive = 0;
    }
    std::swap(cur, next);
    std::swap(grad, next_grad);
    loss = next_loss;
    if (opts.rebalance && imbalance(cur) > opts.rebalance_tol) {
      rebalance(cur);
      loss = loss_and_gradient(cur, obs, lambda, &grad);
      ++out.rebalances;
    }
    trace.push_back(loss);
    if (trace.size() > 24) trace.pop_front();
  }

  out.factors = FactorPair{cur.Xt.transpose(), cur.Yt.transpose()};
  out.Z = out.factors->X * out.factors->Y.transpose();
  out.iterations = it;
  out.final_grad_norm = gnorm;
  out.relative_grad_norm = rel;
  out.objective = loss;
  out.step_size = eta;
  return out;
}

Matrix svt(const Matrix& A, double tau) {
  if (!(tau >= 0.0) || !std::isfinite(tau)) throw ConfigError("svt: threshold must be nonnegative");
  return svt_step(A, tau).Z;
}

double convex_objective(const Matrix& Z, const ObservationSet& obs, double lambda) {
  return omega_half_sq_residual(Z, obs) + lambda * nuclear_norm(Z);
}

EstimatorOutput solve_convex(const ObservationSet& obs, double lambda, const SolverOptions& opts,
                             const std::optional<Matrix>& init) {
  opts.validate();
  check_lambda(lambda);
  if (!(lambda > 0.0)) throw ConfigError("solve_convex: lambda must be positive");
  Matrix Z = init ? *init : Matrix::Zero(obs.n1(), obs.n2());
  if (Z.rows() != obs.n1() || Z.cols() != obs.n2()) throw ConfigError("solve_convex: warm start has wrong shape");
  require_finite(Z, "solve_convex warm start");

  EstimatorOutput out;
  out.lambda = lambda;
  out.step_size = 1.0;
  double F = init ? convex_objective(Z, obs, lambda) : omega_half_sq_residual(Z, obs);
  SvtStep step;
  int it = 0;
  while (it < opts.max_iters) {
    ++it;
    step = svt_step(Z - omega_residual(Z, obs), lambda);
    const double F_next = omega_half_sq_residual(step.Z, obs) + lambda * step.nuclear;
    if (!std::isfinite(F_next)) throw NumericalError("solve_convex: non-finite objective");
    if (F_next > F + 1e-10 * std::abs(F)) {
      std::ostringstream msg;
      msg << "solve_convex: objective increased at iteration " << it << " (" << F << " -> " << F_next << ")";
      throw NumericalError(msg.str());
    }
    const double change = std::abs(F - F_next);
    Z = std::move(step.Z);
    F = F_next;
    if (change <= opts.objective_tol * std::abs(F)) {
      out.converged = true;
      break;
    }
  }

  out.rank = step.U.cols();
  out.final_grad_norm = tangent_norm(step.U, step.V, omega_residual(Z, obs) + lambda * step.U * step.V.transpose());
  const double znorm = Z.norm();
  out.relative_grad_norm = znorm > 0.0 ? out.final_grad_norm / znorm : out.final_grad_norm;
  out.Z = std::move(Z);
  out.iterations = it;
  out.objective = F;
  return out;
}

FactorPair balanced_factors(const Matrix& Z, Index r) {
  const TruncatedSvd svd = truncated_svd(Z, r);
  const Vector root = svd.S.cwiseSqrt();
  return FactorPair{svd.U * root.asDiagonal(), svd.V * root.asDiagonal()};
}

}  // namespace mcinf
