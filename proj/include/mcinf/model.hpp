#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mcinf/linalg.hpp"
#include "mcinf/rng.hpp"

namespace mcinf {

/// Planted rank-r matrix M* = X* Y*^T with balanced factors
/// X* = U* diag(sigma)^{1/2}, Y* = V* diag(sigma)^{1/2}.
struct GroundTruth {
  Index n1 = 0;
  Index n2 = 0;
  Index r = 0;
  Matrix Ustar;  // n1 x r, column-orthonormal
  Matrix Vstar;  // n2 x r, column-orthonormal
  Vector sigma;  // r singular values, nonincreasing
  Matrix Xstar;
  Matrix Ystar;
  double mu = 1.0;     // max(incoherence(U*), incoherence(V*))
  double kappa = 1.0;  // sigma[0] / sigma[r-1]

  Matrix matrix() const { return Xstar * Ystar.transpose(); }
  double entry(Index i, Index j) const { return Xstar.row(i).dot(Ystar.row(j)); }
};

/// Column-orthonormal n x r basis of the range of a seeded Gaussian matrix
/// (Householder QR, diagonal of R made positive so the basis is Haar
/// distributed).
Matrix random_orthonormal(Index n, Index r, Rng& rng);

/// Square n x n ground truth; U*, V* are independent random orthonormal bases.
GroundTruth generate_ground_truth(Index n, Index r, std::span<const double> spectrum,
                                  std::uint64_t seed);

/// Rectangular variant.
GroundTruth generate_ground_truth(Index n1, Index n2, Index r, std::span<const double> spectrum,
                                  std::uint64_t seed);

/// Assemble a GroundTruth from given orthonormal bases and spectrum.
GroundTruth ground_truth_from_bases(Matrix Ustar, Matrix Vstar, std::span<const double> spectrum);

/// (n / r) * max_i ||U_{i,.}||^2; the smallest mu for which this basis meets
/// the incoherence condition. Requires U^T U = I to 1e-8.
double incoherence(const Matrix& U);

/// All-ones spectrum of length r.
std::vector<double> unit_spectrum(Index r);

}  // namespace mcinf
