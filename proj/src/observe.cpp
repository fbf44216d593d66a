#include "mcinf/observe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mcinf/error.hpp"

namespace mcinf {

namespace {

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void check_dims(Index n1, Index n2) {
  if (n1 < 1 || n2 < 1) throw ConfigError("observation grid must have positive dimensions");
}

}  // namespace

void IndexSet::validate() const {
  check_dims(n1, n2);
  for (std::size_t k = 0; k < indices.size(); ++k) {
    const Index2& ix = indices[k];
    if (ix.row < 0 || ix.row >= n1 || ix.col < 0 || ix.col >= n2) {
      std::ostringstream msg;
      msg << "index (" << ix.row << "," << ix.col << ") out of bounds for " << n1 << "x" << n2;
      throw ConfigError(msg.str());
    }
    if (k > 0 && !(indices[k - 1] < ix)) throw ConfigError("index set must be strictly sorted without duplicates");
  }
}

IndexSet sample_mask(Index n1, Index n2, double p, std::uint64_t seed) {
  check_dims(n1, n2);
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("sample_mask: p must lie in [0, 1]");
  IndexSet out{n1, n2, {}};
  out.indices.reserve(static_cast<std::size_t>(p * static_cast<double>(n1 * n2) * 1.01) + 16);
  Rng rng(derive_seed(seed, stream::mask));
  for (Index i = 0; i < n1; ++i)
    for (Index j = 0; j < n2; ++j)
      if (uniform01(rng) < p) out.indices.push_back({i, j});
  return out;
}

IndexSet full_mask(Index n1, Index n2) {
  check_dims(n1, n2);
  IndexSet out{n1, n2, {}};
  out.indices.reserve(static_cast<std::size_t>(n1 * n2));
  for (Index i = 0; i < n1; ++i)
    for (Index j = 0; j < n2; ++j) out.indices.push_back({i, j});
  return out;
}

ObservationSet::ObservationSet(Index n1, Index n2, std::vector<Index2> indices, std::vector<double> values,
                               std::optional<double> p_nominal)
    : n1_(n1), n2_(n2), indices_(std::move(indices)), values_(std::move(values)), p_nominal_(p_nominal) {
  IndexSet{n1_, n2_, indices_}.validate();
  if (values_.size() != indices_.size()) throw ConfigError("observation values and indices differ in length");
  for (double v : values_)
    if (!std::isfinite(v)) throw ConfigError("observation values must be finite");
  if (p_nominal_ && !(*p_nominal_ > 0.0 && *p_nominal_ <= 1.0))
    throw ConfigError("nominal sampling rate must lie in (0, 1]");

  row_ptr_.assign(static_cast<std::size_t>(n1_) + 1, 0);
  col_ptr_.assign(static_cast<std::size_t>(n2_) + 1, 0);
  for (const Index2& ix : indices_) {
    ++row_ptr_[static_cast<std::size_t>(ix.row) + 1];
    ++col_ptr_[static_cast<std::size_t>(ix.col) + 1];
  }
  std::partial_sum(row_ptr_.begin(), row_ptr_.end(), row_ptr_.begin());
  std::partial_sum(col_ptr_.begin(), col_ptr_.end(), col_ptr_.begin());
  col_order_.resize(indices_.size());
  std::vector<std::size_t> fill(col_ptr_.begin(), col_ptr_.end() - 1);
  for (std::size_t k = 0; k < indices_.size(); ++k)
    col_order_[fill[static_cast<std::size_t>(indices_[k].col)]++] = k;
}

double ObservationSet::p_hat() const {
  return static_cast<double>(indices_.size()) / (static_cast<double>(n1_) * static_cast<double>(n2_));
}

std::pair<std::size_t, std::size_t> ObservationSet::row_range(Index i) const {
  if (i < 0 || i >= n1_) throw ConfigError("row index out of range");
  return {row_ptr_[static_cast<std::size_t>(i)], row_ptr_[static_cast<std::size_t>(i) + 1]};
}

std::span<const std::size_t> ObservationSet::column_entries(Index j) const {
  if (j < 0 || j >= n2_) throw ConfigError("column index out of range");
  const std::size_t b = col_ptr_[static_cast<std::size_t>(j)];
  const std::size_t e = col_ptr_[static_cast<std::size_t>(j) + 1];
  return std::span<const std::size_t>(col_order_).subspan(b, e - b);
}

Matrix ObservationSet::dense() const {
  Matrix out = Matrix::Zero(n1_, n2_);
  for (std::size_t k = 0; k < indices_.size(); ++k) out(indices_[k].row, indices_[k].col) = values_[k];
  return out;
}

CoverageDiagnostics ObservationSet::diagnostics() const {
  CoverageDiagnostics d;
  for (Index i = 0; i < n1_; ++i)
    if (row_ptr_[static_cast<std::size_t>(i)] == row_ptr_[static_cast<std::size_t>(i) + 1]) d.empty_rows.push_back(i);
  for (Index j = 0; j < n2_; ++j)
    if (col_ptr_[static_cast<std::size_t>(j)] == col_ptr_[static_cast<std::size_t>(j) + 1]) d.empty_cols.push_back(j);
  return d;
}

template <typename EntryFn>
ObservationSet observe_with(Index n1, Index n2, EntryFn&& truth, const IndexSet& mask, double sigma,
                            std::uint64_t seed, std::optional<double> p_nominal) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("observe: sigma must be nonnegative");
  if (n1 != mask.n1 || n2 != mask.n2) throw ConfigError("observe: mask and matrix dimensions differ");
  mask.validate();
  Rng rng(derive_seed(seed, stream::noise));
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> values(mask.size());
  for (std::size_t k = 0; k < mask.size(); ++k) {
    const double e = gauss(rng);
    values[k] = truth(mask.indices[k].row, mask.indices[k].col) + sigma * e;
  }
  return ObservationSet(mask.n1, mask.n2, mask.indices, std::move(values), p_nominal);
}

ObservationSet observe_matrix(const Matrix& reference, const IndexSet& mask, double sigma, std::uint64_t seed,
                              std::optional<double> p_nominal) {
  return observe_with(
      reference.rows(), reference.cols(), [&](Index i, Index j) { return reference(i, j); }, mask, sigma, seed,
      p_nominal);
}

ObservationSet observe(const GroundTruth& gt, const IndexSet& mask, double sigma, std::uint64_t seed,
                       std::optional<double> p_nominal) {
  return observe_with(
      gt.n1, gt.n2, [&](Index i, Index j) { return gt.entry(i, j); }, mask, sigma, seed, p_nominal);
}

Matrix p_omega(const Matrix& A, const IndexSet& mask) {
  if (A.rows() != mask.n1 || A.cols() != mask.n2) throw ConfigError("p_omega: dimension mismatch");
  Matrix out = Matrix::Zero(A.rows(), A.cols());
  for (const Index2& ix : mask.indices) out(ix.row, ix.col) = A(ix.row, ix.col);
  return out;
}

Matrix omega_residual(const Matrix& Z, const ObservationSet& obs) {
  if (Z.rows() != obs.n1() || Z.cols() != obs.n2()) throw ConfigError("omega_residual: dimension mismatch");
  Matrix out = Matrix::Zero(Z.rows(), Z.cols());
  const auto idx = obs.indices();
  const auto val = obs.values();
  for (std::size_t k = 0; k < idx.size(); ++k) out(idx[k].row, idx[k].col) = Z(idx[k].row, idx[k].col) - val[k];
  return out;
}

double omega_half_sq_residual(const Matrix& Z, const ObservationSet& obs) {
  if (Z.rows() != obs.n1() || Z.cols() != obs.n2()) throw ConfigError("omega_residual: dimension mismatch");
  const auto idx = obs.indices();
  const auto val = obs.values();
  double acc = 0.0;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const double d = Z(idx[k].row, idx[k].col) - val[k];
    acc += d * d;
  }
  return 0.5 * acc;
}

}  // namespace mcinf
