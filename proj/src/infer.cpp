#include "mcinf/infer.hpp"

#include <cmath>
#include <sstream>

#include "mcinf/error.hpp"
#include "mcinf/normal.hpp"

namespace mcinf {

namespace {

void check_sigma_p(double sigma, double p) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be finite and nonnegative");
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("p must lie in (0, 1]");
}

void check_index(Index i, Index n, const char* what) {
  if (i < 0 || i >= n) {
    std::ostringstream msg;
    msg << what << " index " << i << " out of range [0, " << n << ")";
    throw ConfigError(msg.str());
  }
}

bool low_leverage(double v, double sigma, double p, Index n, Index r) {
  return v < 1e-3 * sigma * sigma * static_cast<double>(r) / (static_cast<double>(n) * p);
}

}  // namespace

Vector leverages(const Matrix& F) {
  const Matrix Ginv = spd_inverse(F.transpose() * F);
  return (F * Ginv).cwiseProduct(F).rowwise().sum();
}

LeverageTable::LeverageTable(const Matrix& Xd, const Matrix& Yd) : row_(leverages(Xd)), col_(leverages(Yd)) {}

VarianceEstimate true_entry_variance(const GroundTruth& gt, double sigma, double p, Index i, Index j) {
  check_sigma_p(sigma, p);
  check_index(i, gt.n1, "row");
  check_index(j, gt.n2, "column");
  const double v = sigma * sigma / p * (gt.Ustar.row(i).squaredNorm() + gt.Vstar.row(j).squaredNorm());
  return {v, VarianceKind::truth, low_leverage(v, sigma, p, std::max(gt.n1, gt.n2), gt.r)};
}

VarianceEstimate entry_variance(const LeverageTable& lev, double sigma, double p, Index i, Index j) {
  check_sigma_p(sigma, p);
  check_index(i, lev.row().size(), "row");
  check_index(j, lev.col().size(), "column");
  const double v = sigma * sigma / p * (lev.row()(i) + lev.col()(j));
  const Index n = std::max(lev.row().size(), lev.col().size());
  // leverages sum to r over the rows
  const auto r = static_cast<Index>(std::lround(lev.row().sum()));
  return {v, VarianceKind::empirical, low_leverage(v, sigma, p, n, std::max<Index>(r, 1))};
}

VarianceEstimate factor_variance(const LeverageTable& lev, double sigma, double p, Index i, Index j) {
  check_sigma_p(sigma, p);
  check_index(i, lev.row().size(), "row");
  check_index(j, lev.row().size(), "row");
  if (i == j) throw ConfigError("factor statistic requires distinct rows i != j");
  const double v = sigma * sigma / p * (lev.row()(i) + lev.row()(j));
  const auto r = static_cast<Index>(std::lround(lev.row().sum()));
  return {v, VarianceKind::factor, low_leverage(v, sigma, p, lev.row().size(), std::max<Index>(r, 1))};
}

VarianceEstimate empirical_entry_variance(const DebiasedEstimate& est, double sigma, double p, Index i, Index j) {
  return entry_variance(LeverageTable(est.Xd, est.Yd), sigma, p, i, j);
}

ConfidenceInterval entry_ci(double center, const VarianceEstimate& v, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("entry_ci: alpha must lie in (0, 1)");
  if (!(v.value >= 0.0) || !std::isfinite(v.value)) throw NumericalError("entry_ci: invalid variance");
  return {center, normal_quantile(1.0 - 0.5 * alpha) * std::sqrt(v.value), 1.0 - alpha, v.low_leverage};
}

FactorStat factor_inner_stat(const DebiasedEstimate& est, const GroundTruth& gt, double sigma, double p, Index i,
                             Index j) {
  if (est.Xd.rows() != gt.n1 || est.Xd.cols() != gt.r) throw ConfigError("factor_inner_stat: shape mismatch");
  const LeverageTable lev(est.Xd, est.Yd);
  FactorStat out;
  out.rho = factor_variance(lev, sigma, p, i, j);
  if (!(out.rho.value > 0.0)) throw NumericalError("factor_inner_stat: zero variance");
  const double diff = est.Xd.row(i).dot(est.Xd.row(j)) - gt.Xstar.row(i).dot(gt.Xstar.row(j));
  out.T = diff / std::sqrt(out.rho.value);
  return out;
}

double entry_stat(const DebiasedEstimate& est, const GroundTruth& gt, double sigma, double p, Index i, Index j) {
  if (est.Md.rows() != gt.n1 || est.Md.cols() != gt.n2) throw ConfigError("entry_stat: shape mismatch");
  const VarianceEstimate v = empirical_entry_variance(est, sigma, p, i, j);
  if (!(v.value > 0.0)) throw NumericalError("entry_stat: zero variance");
  return (est.Md(i, j) - gt.entry(i, j)) / std::sqrt(v.value);
}

Matrix factor_alignment(const DebiasedEstimate& est, const GroundTruth& gt) {
  return procrustes_align(stack_rows(est.Xd, est.Yd), stack_rows(gt.Xstar, gt.Ystar));
}

Vector factor_row_whitened_residual(const DebiasedEstimate& est, const GroundTruth& gt, const Matrix& H,
                                    double sigma, double p, Index j) {
  check_sigma_p(sigma, p);
  if (!(sigma > 0.0)) throw ConfigError("whitened residual requires sigma > 0");
  check_index(j, gt.n1, "row");
  const Vector diff = (est.Xd.row(j) * H - gt.Xstar.row(j)).transpose();
  return std::sqrt(p) / sigma * gt.sigma.cwiseSqrt().asDiagonal() * diff;
}

Vector factor_row_whitened_residual(const DebiasedEstimate& est, const GroundTruth& gt, double sigma, double p,
                                    Index j) {
  return factor_row_whitened_residual(est, gt, factor_alignment(est, gt), sigma, p, j);
}

}  // namespace mcinf
