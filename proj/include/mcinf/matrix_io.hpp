#pragma once

#include <iosfwd>
#include <optional>
#include <string>

#include "mcinf/linalg.hpp"
#include "mcinf/observe.hpp"

namespace mcinf {

/// A (possibly incomplete) data matrix read from disk. Missing positions hold
/// 0 in `values` and are absent from `available`.
struct MatrixData {
  Matrix values;
  IndexSet available;

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
  bool complete() const { return available.size() == static_cast<std::size_t>(values.size()); }
  double density() const {
    return static_cast<double>(available.size()) / static_cast<double>(values.size());
  }
};

enum class MatrixFormat { automatic, dense, triplet };

/// Dense CSV: one matrix row per line, comma separated. Empty fields and
/// nan/NA mark missing entries. A leading non-numeric line is a header.
MatrixData parse_dense_csv(std::istream& in);

/// Triplet text: lines `i,j,value` with 0-based indices, optional header.
/// Dimensions default to (max index + 1) unless given.
MatrixData parse_triplets(std::istream& in, std::optional<std::pair<Index, Index>> dims = std::nullopt);

/// Reads a file. With MatrixFormat::automatic, a first line of the form
/// `i,j,value` or a `.triplets` extension selects the triplet reader;
/// anything else is read as dense CSV. Throws ConfigError on unreadable or
/// malformed input.
MatrixData read_matrix_file(const std::string& path, MatrixFormat format = MatrixFormat::automatic);

void write_dense_csv(std::ostream& out, const Matrix& A);
void write_triplets(std::ostream& out, const ObservationSet& obs);

}  // namespace mcinf
