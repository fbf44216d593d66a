#pragma once

#include <span>
#include <vector>

namespace mcinf {

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal quantile for q in (0, 1); ConfigError otherwise.
/// Rational initial guess refined by one Halley step (~1e-15 absolute).
double normal_quantile(double q);

/// sup_x |F_N(x) - Phi(x)| for the empirical CDF F_N of `samples`.
/// ConfigError on empty input.
double ks_statistic(std::span<const double> samples);

}  // namespace mcinf
