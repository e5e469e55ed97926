#pragma once

// Independent reference computations for the test suites. Everything here
// uses Boost.Math or closed forms, never the library's own quadrature.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace htq::oracle {

/// int_a^b f by 61-point Gauss-Kronrod with adaptive bisection.
inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-13) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, tol);
}

/// int_0^inf f by the exp-sinh rule.
inline double integrate_half_line(const std::function<double(double)>& f, double tol = 1e-13) {
  boost::math::quadrature::exp_sinh<double> rule;
  return rule.integrate(f, 0.0, std::numeric_limits<double>::infinity(), tol);
}

/// Moment E[X^m] of the density proportional to exp(log_kernel(x)) on [0, inf).
inline double kernel_moment(const std::function<double(double)>& log_kernel, double m,
                            double tol = 1e-13) {
  const double mass = integrate_half_line([&](double x) { return std::exp(log_kernel(x)); }, tol);
  const double raw = integrate_half_line(
      [&](double x) { return std::pow(x, m) * std::exp(log_kernel(x)); }, tol);
  return raw / mass;
}

/// Asymptotic 1% critical value of the one-sample Kolmogorov statistic.
inline double ks_critical_1pct(std::size_t n) { return 1.63 / std::sqrt(static_cast<double>(n)); }

/// Asymptotic 5% critical value of the two-sample Kolmogorov statistic.
inline double ks_two_sample_critical_5pct(std::size_t n, std::size_t m) {
  const double nn = static_cast<double>(n);
  const double mm = static_cast<double>(m);
  return 1.358 * std::sqrt((nn + mm) / (nn * mm));
}

inline double ks_statistic(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double sup = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    sup = std::max({sup, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return sup;
}

inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0;
  std::size_t j = 0;
  double sup = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    sup = std::max(sup, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return sup;
}

inline double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

/// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace htq::oracle
