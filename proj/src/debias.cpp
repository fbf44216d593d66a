#include "mcinf/debias.hpp"

#include <cmath>
#include <sstream>

#include "mcinf/error.hpp"

namespace mcinf {

namespace {

void check_p(double p) {
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("de-biasing: p must lie in (0, 1]");
}

void check_shape(const Matrix& Z, const ObservationSet& obs) {
  if (Z.rows() != obs.n1() || Z.cols() != obs.n2()) throw ConfigError("de-biasing: dimension mismatch");
}

Matrix deshrink_one(const Matrix& F, double shift, double* defect) {
  const Matrix G = F.transpose() * F;
  const Index r = G.rows();
  const Matrix S = spd_principal_sqrt(Matrix::Identity(r, r) + shift * spd_inverse(G));
  Matrix Fd = F * S;
  const Matrix Gd = Fd.transpose() * Fd;
  *defect = (Gd - G - shift * Matrix::Identity(r, r)).norm() / std::max(G.norm(), 1e-300);
  return Fd;
}

}  // namespace

const char* to_string(EstimateSource s) { return s == EstimateSource::convex ? "convex" : "nonconvex"; }

Matrix debias_matrix(const Matrix& Z, const ObservationSet& obs, Index r, double p) {
  check_p(p);
  check_shape(Z, obs);
  return rank_r_project(Z - omega_residual(Z, obs) / p, r);
}

FactorPair deshrink_factors(const FactorPair& F, double lambda, double p) {
  check_p(p);
  if (!(lambda >= 0.0)) throw ConfigError("deshrink_factors: lambda must be nonnegative");
  if (F.X.cols() != F.Y.cols()) throw ConfigError("deshrink_factors: rank mismatch");
  double dx = 0.0;
  double dy = 0.0;
  return FactorPair{deshrink_one(F.X, lambda / p, &dx), deshrink_one(F.Y, lambda / p, &dy)};
}

Matrix tangent_project(const Matrix& U, const Matrix& V, const Matrix& A) {
  if (U.rows() != A.rows() || V.rows() != A.cols() || U.cols() != V.cols())
    throw ConfigError("tangent_project: dimension mismatch");
  const Matrix UtA = U.transpose() * A;
  const Matrix AV = A * V;
  return U * UtA + AV * V.transpose() - U * (UtA * V) * V.transpose();
}

Matrix debias_linearized(const Matrix& Z, const ObservationSet& obs, Index r, double p) {
  check_p(p);
  check_shape(Z, obs);
  const TruncatedSvd svd = truncated_svd(Z, r);
  return Z - tangent_project(svd.U, svd.V, omega_residual(Z, obs)) / p;
}

DebiasedEstimate debias(const EstimatorOutput& est, const ObservationSet& obs, Index r, std::optional<double> p) {
  DebiasedEstimate out;
  out.r = r;
  out.lambda = est.lambda;
  out.p = p ? *p : obs.p();
  out.source = est.factors ? EstimateSource::nonconvex : EstimateSource::convex;
  out.Md = debias_matrix(est.Z, obs, r, out.p);
  const FactorPair base =
      (est.factors && est.factors->X.cols() == r) ? *est.factors : balanced_factors(est.Z, r);
  double dx = 0.0;
  double dy = 0.0;
  out.Xd = deshrink_one(base.X, est.lambda / out.p, &dx);
  out.Yd = deshrink_one(base.Y, est.lambda / out.p, &dy);
  out.gram_shift_defect = std::max(dx, dy);
  if (out.gram_shift_defect > 1e-6) {
    std::ostringstream msg;
    msg << "de-shrinking: Gram shift identity violated (relative defect " << out.gram_shift_defect << ")";
    throw NumericalError(msg.str());
  }
  if (out.gram_shift_defect > 1e-9) out.warnings.push_back("Gram shift identity holds only to 1e-6");
  const Matrix GX = base.X.transpose() * base.X;
  const Matrix GY = base.Y.transpose() * base.Y;
  if ((GX - GY).norm() > 1e-6 * std::max(GX.norm(), 1e-300))
    out.warnings.push_back("source factors are unbalanced");
  return out;
}

EquivalenceReport equivalence_report(const EstimatorOutput& cvx, const EstimatorOutput& ncvx,
                                     const ObservationSet& obs, Index r, double lambda, const GroundTruth* gt) {
  if (!ncvx.factors) throw ConfigError("equivalence_report: nonconvex estimate must carry factors");
  EquivalenceReport rep;
  if (!cvx.converged) rep.warnings.push_back("convex solver did not converge");
  if (!ncvx.converged) rep.warnings.push_back("nonconvex solver did not converge");
  const double p = obs.p();

  EstimatorOutput cvx_l = cvx;
  EstimatorOutput ncvx_l = ncvx;
  cvx_l.lambda = lambda;
  ncvx_l.lambda = lambda;
  const DebiasedEstimate dc = debias(cvx_l, obs, r, p);
  const DebiasedEstimate dn = debias(ncvx_l, obs, r, p);

  const Matrix factored = dn.Xd * dn.Yd.transpose();
  rep.matrix_gap_cvx_vs_factored = (dc.Md - factored).norm();
  rep.matrix_gap_ncvx_vs_factored = (dn.Md - factored).norm();

  const Matrix Fc = stack_rows(dc.Xd, dc.Yd);
  const Matrix Fn = stack_rows(dn.Xd, dn.Yd);
  rep.factor_procrustes_gap = (Fc * procrustes_align(Fc, Fn) - Fn).norm();

  rep.linearized_gap = (dn.Md - debias_linearized(ncvx.Z, obs, r, p)).norm();

  if (gt) {
    rep.reference_error = (dn.Md - gt->matrix()).norm();
    rep.convex_reference_error = (dc.Md - gt->matrix()).norm();
  }
  return rep;
}

}  // namespace mcinf
