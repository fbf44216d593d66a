#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mcinf/linalg.hpp"
#include "mcinf/model.hpp"
#include "mcinf/observe.hpp"
#include "mcinf/solvers.hpp"

namespace mcinf {

enum class EstimateSource { convex, nonconvex };

const char* to_string(EstimateSource s);

struct DebiasedEstimate {
  Matrix Md;
  Matrix Xd;
  Matrix Yd;
  EstimateSource source = EstimateSource::nonconvex;
  Index r = 0;
  double lambda = 0.0;
  double p = 1.0;
  /// max over X, Y of ||F^d' F^d - F'F - (lambda/p) I||_F / ||F'F||_F.
  double gram_shift_defect = 0.0;
  std::vector<std::string> warnings;
};

/// P_rank-r[ Z - (1/p) P_Omega(Z - M) ].
Matrix debias_matrix(const Matrix& Z, const ObservationSet& obs, Index r, double p);

/// F^d = F (I + (lambda/p)(F'F)^{-1})^{1/2} for F = X and F = Y.
FactorPair deshrink_factors(const FactorPair& F, double lambda, double p);

/// U U' A + A V V' - U U' A V V'.
Matrix tangent_project(const Matrix& U, const Matrix& V, const Matrix& A);

/// Z - (1/p) P_T(P_Omega(Z - M)), T the tangent space at the rank-r
/// truncation of Z.
Matrix debias_linearized(const Matrix& Z, const ObservationSet& obs, Index r, double p);

/// De-biased matrix plus de-shrunken factors of an estimator output. Uses
/// the output's factors when present, otherwise the balanced factorization
/// of the rank-r truncation of Z. p defaults to obs.p().
DebiasedEstimate debias(const EstimatorOutput& est, const ObservationSet& obs, Index r,
                        std::optional<double> p = std::nullopt);

struct EquivalenceReport {
  double matrix_gap_cvx_vs_factored = 0.0;   // ||M^{cvx,d} - X^{ncvx,d} Y^{ncvx,d}'||_F
  double matrix_gap_ncvx_vs_factored = 0.0;  // ||M^{ncvx,d} - X^{ncvx,d} Y^{ncvx,d}'||_F
  double factor_procrustes_gap = 0.0;        // min_R ||[X^{cvx,d}; Y^{cvx,d}] R - [X^{ncvx,d}; Y^{ncvx,d}]||_F
  double linearized_gap = 0.0;               // ||M^{ncvx,d} - linearized form at X^{ncvx} Y^{ncvx}'||_F
  std::optional<double> reference_error;     // ||M^{ncvx,d} - M*||_F
  std::optional<double> convex_reference_error;  // ||M^{cvx,d} - M*||_F
  std::vector<std::string> warnings;
};

EquivalenceReport equivalence_report(const EstimatorOutput& cvx, const EstimatorOutput& ncvx,
                                     const ObservationSet& obs, Index r, double lambda,
                                     const GroundTruth* gt = nullptr);

}  // namespace mcinf
