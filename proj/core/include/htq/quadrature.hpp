#pragma once

#include <cmath>
#include <cstddef>
#include <limits>

namespace htq::quadrature {

namespace detail {

template <class F>
double simpson_recurse(const F& f, double a, double b, double fa, double fm,
                       double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  // Stop at the tolerance or once the correction is at rounding level.
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol ||
      std::abs(delta) <= 64.0 * std::numeric_limits<double>::epsilon() *
                             std::abs(left + right)) {
    return left + right + delta / 15.0;
  }
  return simpson_recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

/// Adaptive Simpson with Richardson correction on [a, b].
template <class F>
double adaptive_simpson(const F& f, double a, double b, double abs_tol,
                        int max_depth = 40) {
  if (b <= a) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_recurse(f, a, b, fa, fm, fb, whole, abs_tol,
                                 max_depth);
}

/// Splits [a, b] into equal panels before adapting, so narrow features are
/// not skipped by the initial five-point sample.
template <class F>
double integrate(const F& f, double a, double b, double abs_tol,
                 std::size_t panels = 64) {
  if (b <= a) return 0.0;
  const double width = (b - a) / static_cast<double>(panels);
  const double panel_tol = abs_tol / static_cast<double>(panels);
  double sum = 0.0;
  double compensation = 0.0;
  for (std::size_t k = 0; k < panels; ++k) {
    const double lo = a + width * static_cast<double>(k);
    const double hi = (k + 1 == panels) ? b : lo + width;
    const double term = adaptive_simpson(f, lo, hi, panel_tol) - compensation;
    const double next = sum + term;
    compensation = (next - sum) - term;
    sum = next;
  }
  return sum;
}

}  // namespace htq::quadrature
