#pragma once

// Dense matrix primitives shared by every estimator: truncated SVD with a
// fixed sign convention, rank-r projection, SPD square root and inverse,
// and orthogonal Procrustes alignment.

#include <Eigen/Dense>

namespace mcinf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Rank-r singular triplets U diag(S) V^T with U, V column-orthonormal and S
/// nonincreasing. In every column of U the entry of largest magnitude (first
/// one on ties) is nonnegative; the matching column of V carries the same flip.
struct TruncatedSvd {
  Matrix U;
  Vector S;
  Matrix V;

  Index rank() const { return S.size(); }
  Matrix reconstruct() const;
};

/// Throws ConfigError if any entry is NaN or infinite.
void require_finite(const Matrix& A, const char* what);

/// Thin SVD of all min(rows, cols) triplets, sign convention applied.
TruncatedSvd full_svd(const Matrix& A);

/// Best rank-r approximation factors of A (Eckart-Young). Computed from a
/// full two-sided dense SVD, then truncated.
TruncatedSvd truncated_svd(const Matrix& A, Index r);

/// argmin over rank <= r matrices B of ||A - B||_F.
Matrix rank_r_project(const Matrix& A, Index r);

/// Number of singular values above rel_tol * sigma_1.
Index numerical_rank(const Matrix& A, double rel_tol = 1e-8);

/// Principal square root of a symmetric positive-definite matrix.
/// Throws NumericalError naming the offending eigenvalue when S is not SPD,
/// ConfigError when S is not symmetric to 1e-10 (relative).
Matrix spd_principal_sqrt(const Matrix& S);

/// Inverse of a symmetric positive-definite matrix via an eigendecomposition.
/// Throws NumericalError when S is singular or indefinite. If `condition` is
/// non-null it receives lambda_max / lambda_min.
Matrix spd_inverse(const Matrix& S, double* condition = nullptr);

/// Orthonormal R minimizing ||F R - target||_F, i.e. the polar factor of
/// F^T target. Throws NumericalError when F^T target is rank deficient.
Matrix procrustes_align(const Matrix& F, const Matrix& target);

/// Vertical concatenation [top; bottom].
Matrix stack_rows(const Matrix& top, const Matrix& bottom);

}  // namespace mcinf
