#include "mcinf/normal.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mcinf/error.hpp"

namespace mcinf {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double q) {
  if (!(q > 0.0 && q < 1.0)) throw ConfigError("normal_quantile: level must lie in (0, 1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double lo = 0.02425;
  double x = 0.0;
  if (q < lo) {
    const double t = std::sqrt(-2.0 * std::log(q));
    x = (((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) /
        ((((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0);
  } else if (q <= 1.0 - lo) {
    const double s = q - 0.5;
    const double t = s * s;
    x = (((((a[0] * t + a[1]) * t + a[2]) * t + a[3]) * t + a[4]) * t + a[5]) * s /
        (((((b[0] * t + b[1]) * t + b[2]) * t + b[3]) * t + b[4]) * t + 1.0);
  } else {
    const double t = std::sqrt(-2.0 * std::log1p(-q));
    x = -(((((c[0] * t + c[1]) * t + c[2]) * t + c[3]) * t + c[4]) * t + c[5]) /
        ((((d[0] * t + d[1]) * t + d[2]) * t + d[3]) * t + 1.0);
  }
  // Halley refinement; the upper tail uses the complementary CDF to avoid
  // cancellation in 1 - q.
  const double e = q < 0.5 ? normal_cdf(x) - q : (1.0 - q) - 0.5 * std::erfc(x / std::numbers::sqrt2);
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

double ks_statistic(std::span<const double> samples) {
  if (samples.empty()) throw ConfigError("ks_statistic: no samples");
  std::vector<double> s(samples.begin(), samples.end());
  for (double v : s)
    if (!std::isfinite(v)) throw NumericalError("ks_statistic: non-finite sample");
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double d = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double F = normal_cdf(s[k]);
    d = std::max({d, static_cast<double>(k + 1) / n - F, F - static_cast<double>(k) / n});
  }
  return d;
}

}  // namespace mcinf
