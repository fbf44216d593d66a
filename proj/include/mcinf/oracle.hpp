#pragma once

#include "mcinf/linalg.hpp"
#include "mcinf/observe.hpp"

namespace mcinf {

struct CrlbRow {
  Matrix matrix;  // r x r covariance lower bound
  Index row_index = 0;
  double condition = 1.0;  // of the design Gram
  bool ill_conditioned = false;  // condition > 1e10
};

/// argmin_u sum_{k:(i,k) in Omega} (M_ik - u Y*_k')^2 via the normal equations.
Vector ideal_row_estimator(const ObservationSet& obs, const Matrix& Ystar, Index i);

/// sigma^2 (sum_{k:(i,k) in Omega} Y*_k' Y*_k)^{-1}.
CrlbRow crlb_row(const ObservationSet& obs, const Matrix& Ystar, double sigma, Index i);

/// (sigma^2/p) [ Y*_j (G_Y/p)^{-1} Y*_j' + X*_i (G_X/p)^{-1} X*_i' ] with
/// G_Y summed over observed (i,k), k != j and G_X over observed (k,j), k != i.
double crlb_entry(const ObservationSet& obs, const Matrix& Xstar, const Matrix& Ystar, double sigma, double p,
                  Index i, Index j);

/// 2 n r sigma^2 / p.
double oracle_l2_lower(Index n, Index r, double sigma, double p);

}  // namespace mcinf
