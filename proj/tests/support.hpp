#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "auction_lab/revenue.hpp"
#include "auction_lab/rng.hpp"

namespace test_support {

/// Kolmogorov-Smirnov distance between the empirical law of `xs` and `cdf`.
/// Uses both one-sided gaps, so atoms in `cdf` are handled with its left limit.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf,
                           const std::function<double(double)>& cdf_left) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i + 1 < xs.size() && xs[i + 1] == xs[i]) continue;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::abs(hi - cdf(xs[i])));
    const std::size_t first = static_cast<std::size_t>(std::lower_bound(xs.begin(), xs.end(), xs[i]) - xs.begin());
    d = std::max(d, std::abs(static_cast<double>(first) / n - cdf_left(xs[i])));
  }
  return d;
}

inline bool within_se(double estimate, double truth, double se, double k = 4.0) {
  return std::abs(estimate - truth) <= k * se;
}

/// Composite Gauss-Legendre (5 points per panel) on [a, b]; used as an
/// independent oracle for smooth integrands.
inline double gauss_legendre(const std::function<double(double)>& f, double a, double b, int panels = 2000) {
  static const double x[5] = {-0.9061798459386640, -0.5384693101056831, 0.0, 0.5384693101056831,
                              0.9061798459386640};
  static const double w[5] = {0.2369268850561891, 0.4786286704993665, 0.5688888888888889, 0.4786286704993665,
                              0.2369268850561891};
  const double h = (b - a) / panels;
  double total = 0.0;
  for (int p = 0; p < panels; ++p) {
    const double lo = a + p * h;
    const double mid = lo + 0.5 * h;
    for (int j = 0; j < 5; ++j) total += w[j] * f(mid + 0.5 * h * x[j]);
  }
  return total * 0.5 * h;
}

}  // namespace test_support
