#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mcinf/linalg.hpp"
#include "mcinf/model.hpp"

namespace mcinf {

struct Index2 {
  Index row = 0;
  Index col = 0;
  auto operator<=>(const Index2&) const = default;
};

/// A sampling pattern Omega over an n1 x n2 grid: strictly sorted (row-major),
/// duplicate-free, in-bounds index pairs.
struct IndexSet {
  Index n1 = 0;
  Index n2 = 0;
  std::vector<Index2> indices;

  std::size_t size() const { return indices.size(); }
  /// Throws ConfigError unless sorted, unique and within bounds.
  void validate() const;
};

/// Each of the n1*n2 positions included independently with probability p.
/// Deterministic per seed (uses the mask sub-stream of `seed`).
IndexSet sample_mask(Index n1, Index n2, double p, std::uint64_t seed);

/// Every position of the grid.
IndexSet full_mask(Index n1, Index n2);

/// Rows and columns of the grid that received no observation. The estimators
/// still run, but the usual np >> log n regime is clearly violated.
struct CoverageDiagnostics {
  std::vector<Index> empty_rows;
  std::vector<Index> empty_cols;
  bool ok() const { return empty_rows.empty() && empty_cols.empty(); }
};

/// Observed entries M_ij = M*_ij + E_ij on Omega, stored in row-major order
/// together with a column-major permutation for column sweeps.
class ObservationSet {
 public:
  ObservationSet(Index n1, Index n2, std::vector<Index2> indices, std::vector<double> values,
                 std::optional<double> p_nominal = std::nullopt);

  Index n1() const { return n1_; }
  Index n2() const { return n2_; }
  std::size_t size() const { return indices_.size(); }
  std::span<const Index2> indices() const { return indices_; }
  std::span<const double> values() const { return values_; }
  std::optional<double> p_nominal() const { return p_nominal_; }
  /// |Omega| / (n1 n2).
  double p_hat() const;
  /// Sampling rate used inside losses and variances: p_nominal when known,
  /// otherwise p_hat.
  double p() const { return p_nominal_ ? *p_nominal_ : p_hat(); }

  /// Positions [begin, end) of row i in indices()/values().
  std::pair<std::size_t, std::size_t> row_range(Index i) const;
  /// Entry positions (into indices()/values()) of column j.
  std::span<const std::size_t> column_entries(Index j) const;

  IndexSet mask() const { return IndexSet{n1_, n2_, indices_}; }
  /// Dense P_Omega(M).
  Matrix dense() const;
  CoverageDiagnostics diagnostics() const;

 private:
  Index n1_;
  Index n2_;
  std::vector<Index2> indices_;
  std::vector<double> values_;
  std::optional<double> p_nominal_;
  std::vector<std::size_t> row_ptr_;
  std::vector<std::size_t> col_ptr_;
  std::vector<std::size_t> col_order_;
};

/// Noisy observation of the ground truth on `mask`: values M*_ij + N(0, sigma^2),
/// noise drawn from the noise sub-stream of `seed` (independent of the mask
/// stream). `p_nominal` is recorded if given.
ObservationSet observe(const GroundTruth& gt, const IndexSet& mask, double sigma, std::uint64_t seed,
                       std::optional<double> p_nominal = std::nullopt);

/// Same as observe() for an explicit reference matrix.
ObservationSet observe_matrix(const Matrix& reference, const IndexSet& mask, double sigma,
                              std::uint64_t seed, std::optional<double> p_nominal = std::nullopt);

/// Entries of A on Omega copied, everything else zero.
Matrix p_omega(const Matrix& A, const IndexSet& mask);

/// P_Omega(Z - M) as a dense matrix.
Matrix omega_residual(const Matrix& Z, const ObservationSet& obs);

/// 0.5 * ||P_Omega(Z - M)||_F^2 without forming a dense residual.
double omega_half_sq_residual(const Matrix& Z, const ObservationSet& obs);

}  // namespace mcinf
