#pragma once

#include <cmath>
#include <string>

#include "mcinf/debias.hpp"
#include "mcinf/linalg.hpp"
#include "mcinf/model.hpp"

namespace mcinf {

enum class VarianceKind { truth, empirical, factor };

struct VarianceEstimate {
  double value = 0.0;
  VarianceKind kind = VarianceKind::truth;
  /// Set when value < 1e-3 sigma^2 r / (n p): the normal approximation is
  /// unreliable for this index.
  bool low_leverage = false;
};

struct ConfidenceInterval {
  double center = 0.0;
  double half_width = 0.0;
  double level = 0.95;
  bool low_leverage = false;

  double lower() const { return center - half_width; }
  double upper() const { return center + half_width; }
  bool contains(double x) const { return std::abs(x - center) <= half_width; }
};

/// Row leverages x_i (F'F)^{-1} x_i' for every row of F.
Vector leverages(const Matrix& F);

/// (sigma^2/p)(||U*_i||^2 + ||V*_j||^2).
VarianceEstimate true_entry_variance(const GroundTruth& gt, double sigma, double p, Index i, Index j);

/// (sigma^2/p)(leverage of X^d row i + leverage of Y^d row j).
VarianceEstimate empirical_entry_variance(const DebiasedEstimate& est, double sigma, double p, Index i, Index j);

/// Precomputed leverages for evaluating many (i, j) without refactoring the
/// Gram matrices each time.
class LeverageTable {
 public:
  LeverageTable(const Matrix& Xd, const Matrix& Yd);
  const Vector& row() const { return row_; }
  const Vector& col() const { return col_; }

 private:
  Vector row_;
  Vector col_;
};

VarianceEstimate entry_variance(const LeverageTable& lev, double sigma, double p, Index i, Index j);
VarianceEstimate factor_variance(const LeverageTable& lev, double sigma, double p, Index i, Index j);

/// [center +- Phi^{-1}(1 - alpha/2) sqrt(v)].
ConfidenceInterval entry_ci(double center, const VarianceEstimate& v, double alpha);

struct FactorStat {
  double T = 0.0;
  VarianceEstimate rho;
};

/// T_ij = (e_i' X^d X^d' e_j - e_i' X* X*' e_j) / sqrt(rho_ij) with rho_ij
/// from X^d leverages of rows i and j. Requires i != j.
FactorStat factor_inner_stat(const DebiasedEstimate& est, const GroundTruth& gt, double sigma, double p, Index i,
                             Index j);

/// S_ij = (M^d_ij - M*_ij) / sqrt(v_ij). NumericalError on zero variance.
double entry_stat(const DebiasedEstimate& est, const GroundTruth& gt, double sigma, double p, Index i, Index j);

/// H^d = argmin_R ||[X^d; Y^d] R - [X*; Y*]||_F.
Matrix factor_alignment(const DebiasedEstimate& est, const GroundTruth& gt);

/// sqrt(p)/sigma (Sigma*)^{1/2} (X^d H^d - X*)' e_j.
Vector factor_row_whitened_residual(const DebiasedEstimate& est, const GroundTruth& gt, double sigma, double p,
                                    Index j);

/// Same, with a precomputed alignment.
Vector factor_row_whitened_residual(const DebiasedEstimate& est, const GroundTruth& gt, const Matrix& H,
                                    double sigma, double p, Index j);

}  // namespace mcinf
