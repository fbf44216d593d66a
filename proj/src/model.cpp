#include "mcinf/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mcinf/error.hpp"

namespace mcinf {

namespace {

void validate_spectrum(std::span<const double> spectrum, Index r) {
  if (static_cast<Index>(spectrum.size()) != r) {
    std::ostringstream msg;
    msg << "ground truth: spectrum has " << spectrum.size() << " values, rank is " << r;
    throw ConfigError(msg.str());
  }
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    if (!(spectrum[k] > 0.0) || !std::isfinite(spectrum[k]))
      throw ConfigError("ground truth: spectrum must be positive and finite");
    if (k > 0 && spectrum[k] > spectrum[k - 1])
      throw ConfigError("ground truth: spectrum must be nonincreasing");
  }
}

}  // namespace

Matrix random_orthonormal(Index n, Index r, Rng& rng) {
  if (r < 1 || r > n) throw ConfigError("random_orthonormal: need 1 <= r <= n");
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix G(n, r);
  // Fill row by row so the draw order does not depend on storage order.
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < r; ++k) G(i, k) = gauss(rng);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ() * Matrix::Identity(n, r);
  const Matrix R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
  for (Index k = 0; k < r; ++k)
    if (R(k, k) < 0.0) Q.col(k) *= -1.0;
  return Q;
}

GroundTruth ground_truth_from_bases(Matrix Ustar, Matrix Vstar, std::span<const double> spectrum) {
  const Index r = Ustar.cols();
  if (Vstar.cols() != r) throw ConfigError("ground truth: U* and V* rank mismatch");
  validate_spectrum(spectrum, r);
  GroundTruth gt;
  gt.n1 = Ustar.rows();
  gt.n2 = Vstar.rows();
  gt.r = r;
  gt.sigma = Eigen::Map<const Vector>(spectrum.data(), r);
  const Vector root = gt.sigma.cwiseSqrt();
  gt.Xstar = Ustar * root.asDiagonal();
  gt.Ystar = Vstar * root.asDiagonal();
  gt.mu = std::max(incoherence(Ustar), incoherence(Vstar));
  gt.kappa = gt.sigma(0) / gt.sigma(r - 1);
  gt.Ustar = std::move(Ustar);
  gt.Vstar = std::move(Vstar);
  return gt;
}

GroundTruth generate_ground_truth(Index n1, Index n2, Index r, std::span<const double> spectrum,
                                  std::uint64_t seed) {
  if (n1 < 1 || n2 < 1 || r < 1 || r > std::min(n1, n2))
    throw ConfigError("generate_ground_truth: need 1 <= r <= min(n1, n2)");
  validate_spectrum(spectrum, r);
  Rng rng(derive_seed(seed, stream::truth));
  Matrix U = random_orthonormal(n1, r, rng);
  Matrix V = random_orthonormal(n2, r, rng);
  return ground_truth_from_bases(std::move(U), std::move(V), spectrum);
}

GroundTruth generate_ground_truth(Index n, Index r, std::span<const double> spectrum,
                                  std::uint64_t seed) {
  return generate_ground_truth(n, n, r, spectrum, seed);
}

double incoherence(const Matrix& U) {
  const Index n = U.rows();
  const Index r = U.cols();
  if (r < 1 || n < r) throw ConfigError("incoherence: basis must be n x r with 1 <= r <= n");
  const double defect = (U.transpose() * U - Matrix::Identity(r, r)).norm();
  if (defect > 1e-8) throw ConfigError("incoherence: basis is not column-orthonormal");
  const double max_row = U.rowwise().squaredNorm().maxCoeff();
  return static_cast<double>(n) / static_cast<double>(r) * max_row;
}

std::vector<double> unit_spectrum(Index r) { return std::vector<double>(static_cast<std::size_t>(r), 1.0); }

}  // namespace mcinf
