#include "mcinf/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mcinf/error.hpp"

namespace mcinf {

namespace {

void apply_sign_convention(TruncatedSvd& svd) {
  for (Index k = 0; k < svd.U.cols(); ++k) {
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < svd.U.rows(); ++i) {
      const double a = std::abs(svd.U(i, k));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (svd.U(arg, k) < 0.0) {
      svd.U.col(k) *= -1.0;
      svd.V.col(k) *= -1.0;
    }
  }
}

double symmetry_defect(const Matrix& S) {
  const double scale = std::max(S.norm(), 1e-300);
  return (S - S.transpose()).norm() / scale;
}

}  // namespace

Matrix TruncatedSvd::reconstruct() const { return U * S.asDiagonal() * V.transpose(); }

void require_finite(const Matrix& A, const char* what) {
  if (!A.allFinite()) throw ConfigError(std::string(what) + ": matrix has non-finite entries");
}

TruncatedSvd full_svd(const Matrix& A) {
  require_finite(A, "svd");
  if (A.size() == 0) throw ConfigError("svd: empty matrix");
  Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw NumericalError("svd: decomposition did not converge");
  TruncatedSvd out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  apply_sign_convention(out);
  return out;
}

TruncatedSvd truncated_svd(const Matrix& A, Index r) {
  if (r < 1 || r > std::min(A.rows(), A.cols())) {
    std::ostringstream msg;
    msg << "truncated_svd: rank " << r << " out of range for " << A.rows() << "x" << A.cols();
    throw ConfigError(msg.str());
  }
  TruncatedSvd full = full_svd(A);
  return TruncatedSvd{full.U.leftCols(r), full.S.head(r), full.V.leftCols(r)};
}

Matrix rank_r_project(const Matrix& A, Index r) { return truncated_svd(A, r).reconstruct(); }

Index numerical_rank(const Matrix& A, double rel_tol) {
  require_finite(A, "numerical_rank");
  Eigen::BDCSVD<Matrix> svd(A);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  return static_cast<Index>((s.array() > rel_tol * s(0)).count());
}

Matrix spd_principal_sqrt(const Matrix& S) {
  if (S.rows() != S.cols() || S.rows() == 0) throw ConfigError("spd_principal_sqrt: matrix must be square");
  require_finite(S, "spd_principal_sqrt");
  if (symmetry_defect(S) > 1e-10) throw ConfigError("spd_principal_sqrt: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (S + S.transpose()));
  const Vector& w = eig.eigenvalues();
  if (!(w(0) > 0.0)) {
    std::ostringstream msg;
    msg << "spd_principal_sqrt: matrix is not positive definite (eigenvalue " << w(0) << ")";
    throw NumericalError(msg.str());
  }
  const Matrix& Q = eig.eigenvectors();
  Matrix R = Q * w.cwiseSqrt().asDiagonal() * Q.transpose();
  return 0.5 * (R + R.transpose());
}

Matrix spd_inverse(const Matrix& S, double* condition) {
  if (S.rows() != S.cols() || S.rows() == 0) throw ConfigError("spd_inverse: matrix must be square");
  require_finite(S, "spd_inverse");
  Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (S + S.transpose()));
  const Vector& w = eig.eigenvalues();
  const double wmax = w(w.size() - 1);
  if (!(w(0) > 0.0) || !(w(0) > 1e-14 * wmax)) {
    std::ostringstream msg;
    msg << "spd_inverse: matrix is singular or indefinite (eigenvalue " << w(0) << ")";
    throw NumericalError(msg.str());
  }
  if (condition != nullptr) *condition = wmax / w(0);
  const Matrix& Q = eig.eigenvectors();
  Matrix inv = Q * w.cwiseInverse().asDiagonal() * Q.transpose();
  return 0.5 * (inv + inv.transpose());
}

Matrix procrustes_align(const Matrix& F, const Matrix& target) {
  if (F.rows() != target.rows() || F.cols() != target.cols())
    throw ConfigError("procrustes_align: dimension mismatch");
  const Matrix cross = F.transpose() * target;
  Eigen::JacobiSVD<Matrix> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || !(s(s.size() - 1) > 1e-12 * std::max(s(0), 1e-300))) {
    std::ostringstream msg;
    msg << "procrustes_align: cross-Gram is rank deficient (smallest singular value "
        << (s.size() ? s(s.size() - 1) : 0.0) << ")";
    throw NumericalError(msg.str());
  }
  return svd.matrixU() * svd.matrixV().transpose();
}

Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
  if (top.cols() != bottom.cols()) throw ConfigError("stack_rows: column mismatch");
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

}  // namespace mcinf
