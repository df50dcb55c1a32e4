#pragma once

// Independent reference computations used only by the tests.

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace oracle {

/// sup |F_n - F| for a sample against a continuous cdf.
inline double ks_distance(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

/// Critical value of the one-sample KS statistic at level 1e-3.
inline double ks_critical_1e3(std::size_t n) { return 1.9495 / std::sqrt(static_cast<double>(n)); }

/// int_a^b f with adaptive Gauss-Kronrod; a or b may be infinite.
inline double integrate(const std::function<double(double)>& f, double a, double b) {
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-12, &err);
}

/// Double-exponential quadrature, robust to integrable endpoint singularities.
inline double integrate_ts(const std::function<double(double)>& f, double a, double b) {
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate(f, a, b, 1e-12);
}

}  // namespace oracle
