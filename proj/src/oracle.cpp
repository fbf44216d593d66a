#include "mcinf/oracle.hpp"

#include <cmath>
#include <sstream>

#include "mcinf/error.hpp"

namespace mcinf {

namespace {

Matrix row_design_gram(const ObservationSet& obs, const Matrix& Ystar, Index i, Index skip_col) {
  const auto [b, e] = obs.row_range(i);
  const auto idx = obs.indices();
  Matrix G = Matrix::Zero(Ystar.cols(), Ystar.cols());
  for (std::size_t k = b; k < e; ++k) {
    const Index c = idx[k].col;
    if (c == skip_col) continue;
    G.selfadjointView<Eigen::Lower>().rankUpdate(Ystar.row(c).transpose());
  }
  return G.selfadjointView<Eigen::Lower>();
}

Matrix col_design_gram(const ObservationSet& obs, const Matrix& Xstar, Index j, Index skip_row) {
  const auto idx = obs.indices();
  Matrix G = Matrix::Zero(Xstar.cols(), Xstar.cols());
  for (std::size_t k : obs.column_entries(j)) {
    const Index rr = idx[k].row;
    if (rr == skip_row) continue;
    G.selfadjointView<Eigen::Lower>().rankUpdate(Xstar.row(rr).transpose());
  }
  return G.selfadjointView<Eigen::Lower>();
}

void check_sigma(double sigma) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma must be finite and nonnegative");
}

Matrix checked_inverse(const Matrix& G, const char* what, double* cond) {
  try {
    return spd_inverse(G, cond);
  } catch (const NumericalError& e) {
    throw NumericalError(std::string(what) + ": design is rank deficient (" + e.what() + ")");
  }
}

}  // namespace

Vector ideal_row_estimator(const ObservationSet& obs, const Matrix& Ystar, Index i) {
  if (Ystar.rows() != obs.n2()) throw ConfigError("ideal_row_estimator: Y* has the wrong number of rows");
  const Matrix G = row_design_gram(obs, Ystar, i, -1);
  const auto [b, e] = obs.row_range(i);
  const auto idx = obs.indices();
  const auto val = obs.values();
  Vector rhs = Vector::Zero(Ystar.cols());
  for (std::size_t k = b; k < e; ++k) rhs += val[k] * Ystar.row(idx[k].col).transpose();
  Eigen::LDLT<Matrix> ldlt(G);
  const Vector d = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || d.size() == 0 || !(d.minCoeff() > 1e-14 * std::max(d.maxCoeff(), 1e-300)))
    throw NumericalError("ideal_row_estimator: design is rank deficient");
  return ldlt.solve(rhs);
}

CrlbRow crlb_row(const ObservationSet& obs, const Matrix& Ystar, double sigma, Index i) {
  check_sigma(sigma);
  if (Ystar.rows() != obs.n2()) throw ConfigError("crlb_row: Y* has the wrong number of rows");
  CrlbRow out;
  out.row_index = i;
  out.matrix = sigma * sigma * checked_inverse(row_design_gram(obs, Ystar, i, -1), "crlb_row", &out.condition);
  out.ill_conditioned = out.condition > 1e10;
  return out;
}

double crlb_entry(const ObservationSet& obs, const Matrix& Xstar, const Matrix& Ystar, double sigma, double p,
                  Index i, Index j) {
  check_sigma(sigma);
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("crlb_entry: p must lie in (0, 1]");
  if (Xstar.rows() != obs.n1() || Ystar.rows() != obs.n2() || Xstar.cols() != Ystar.cols())
    throw ConfigError("crlb_entry: factor shapes do not match the observations");
  if (j < 0 || j >= obs.n2()) throw ConfigError("crlb_entry: column index out of range");
  const Matrix GY = row_design_gram(obs, Ystar, i, j) / p;
  const Matrix GX = col_design_gram(obs, Xstar, j, i) / p;
  const Vector y = Ystar.row(j).transpose();
  const Vector x = Xstar.row(i).transpose();
  const double qy = y.dot(checked_inverse(GY, "crlb_entry", nullptr) * y);
  const double qx = x.dot(checked_inverse(GX, "crlb_entry", nullptr) * x);
  return sigma * sigma / p * (qy + qx);
}

double oracle_l2_lower(Index n, Index r, double sigma, double p) {
  if (n < 1 || r < 1) throw ConfigError("oracle_l2_lower: n and r must be positive");
  check_sigma(sigma);
  if (!(p > 0.0 && p <= 1.0)) throw ConfigError("oracle_l2_lower: p must lie in (0, 1]");
  return 2.0 * static_cast<double>(n) * static_cast<double>(r) * sigma * sigma / p;
}

}  // namespace mcinf
