#pragma once

#include <cmath>

namespace auction_lab {

struct QuadratureResult {
  double value = 0.0;
  bool converged = true;
};

namespace detail {

template <class F>
QuadratureResult simpson_step(F& f, double a, double b, double fa, double fm, double fb, double whole,
                              double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  // The second test stops refinement once the estimates agree to rounding,
  // which otherwise recurses to full depth on every branch.
  if (std::abs(delta) <= 15.0 * tol || std::abs(delta) <= 1e-14 * std::abs(left + right))
    return {left + right + delta / 15.0, true};
  if (depth <= 0) return {left + right + delta / 15.0, false};
  const QuadratureResult l = simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1);
  const QuadratureResult r = simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
  return {l.value + r.value, l.converged && r.converged};
}

}  // namespace detail

/// Adaptive Simpson on [a, b] with caller-supplied endpoint values, so that a
/// right-continuous integrand can be sampled by its left limit at b.
template <class F>
QuadratureResult adaptive_simpson(F&& f, double a, double b, double fa, double fb, double tol,
                                  int max_depth = 48) {
  if (!(b > a)) return {0.0, true};
  // One split is forced so that a coincidentally flat 3-point pattern cannot
  // end the recursion before the integrand has been looked at.
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  const double fl = f(0.5 * (a + m));
  const double fr = f(0.5 * (m + b));
  const double left = (m - a) / 6.0 * (fa + 4.0 * fl + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * fr + fb);
  const QuadratureResult l = detail::simpson_step(f, a, m, fa, fl, fm, left, 0.5 * tol, max_depth);
  const QuadratureResult r = detail::simpson_step(f, m, b, fm, fr, fb, right, 0.5 * tol, max_depth);
  return {l.value + r.value, l.converged && r.converged};
}

template <class F>
QuadratureResult adaptive_simpson(F&& f, double a, double b, double tol, int max_depth = 48) {
  return adaptive_simpson(f, a, b, f(a), f(b), tol, max_depth);
}

}  // namespace auction_lab
