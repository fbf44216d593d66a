#pragma once

// Helpers and independent reference computations for the unit tests. Nothing
// here calls into the library code it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace testing {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix A(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) A(i, j) = d(g);
  return A;
}

// Orthonormal columns via modified Gram-Schmidt (the library uses Householder).
inline Matrix gram_schmidt(Matrix A) {
  for (Eigen::Index j = 0; j < A.cols(); ++j) {
    for (Eigen::Index k = 0; k < j; ++k) A.col(j) -= A.col(k).dot(A.col(j)) * A.col(k);
    A.col(j) /= A.col(j).norm();
  }
  return A;
}

inline Matrix random_rotation(Eigen::Index r, std::uint64_t seed) { return gram_schmidt(gaussian(r, r, seed)); }

// Singular values from the eigenvalues of A'A, sorted nonincreasing.
inline Vector singular_values_oracle(const Matrix& A) {
  const Matrix G = A.cols() <= A.rows() ? Matrix(A.transpose() * A) : Matrix(A * A.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(G);
  Vector s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  std::sort(s.data(), s.data() + s.size(), std::greater<>());
  return s;
}

inline double tail_norm(const Vector& s, Eigen::Index r) {
  return std::sqrt(s.tail(s.size() - r).squaredNorm());
}

// Central differences of f at x along every coordinate.
inline Matrix finite_difference(const std::function<double(const Matrix&)>& f, const Matrix& x, double h) {
  Matrix g(x.rows(), x.cols());
  Matrix y = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      y(i, j) = x(i, j) + h;
      const double up = f(y);
      y(i, j) = x(i, j) - h;
      const double down = f(y);
      y(i, j) = x(i, j);
      g(i, j) = (up - down) / (2.0 * h);
    }
  return g;
}

inline double phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Kolmogorov-Smirnov distance to N(0, 1), evaluated on both sides of every jump.
inline double ks_oracle(std::vector<double> x) {
  std::sort(x.begin(), x.end());
  const double N = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double F = phi(x[k]);
    d = std::max({d, std::abs((k + 1) / N - F), std::abs(k / N - F)});
  }
  return d;
}

inline double rel_diff(const Matrix& A, const Matrix& B) { return (A - B).norm() / std::max(B.norm(), 1e-300); }

}  // namespace testing
