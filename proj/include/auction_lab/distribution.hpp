#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "auction_lab/error.hpp"
#include "auction_lab/rng.hpp"

namespace auction_lab {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Quantile-space margin used by every grid routine: grids live in (eps, 1 - eps)
/// so unbounded supports never need a value-space truncation.
inline constexpr double kQuantileMargin = 1e-9;

/// Absolute tie tolerance of all monotonicity certificates.
inline constexpr double kMonotoneTolerance = 1e-9;

inline constexpr std::size_t kDefaultCertificateGrid = 10001;

struct SupportInterval {
  double lo = 0.0;
  double hi = kInfinity;

  bool contains(double x) const { return x >= lo && x <= hi; }
  bool bounded() const { return std::isfinite(hi); }
};

namespace family {

struct Uniform {
  double a;
  double b;
};
struct Exponential {
  double rate;
};
/// F(x) = 1 - x^{-alpha} on [1, inf).
struct PowerLaw {
  double alpha;
};
/// F(x) = 1 - 1/(x + 1) on [0, inf); virtual value is identically -1.
struct EqualRevenue {};
/// Normal(mu, sigma) conditioned on [0, inf).
struct TruncatedNormal {
  double mu;
  double sigma;
};
struct PointMass {
  double value;
};
struct TwoPoint {
  double low;
  double high;
  double p_high;
};

}  // namespace family

namespace detail {

inline double normal_upper_tail(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

inline double normal_density(double z) {
  constexpr double inv_sqrt_2pi = 0.39894228040143267794;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

/// phi(z) / (1 - Phi(z)), stable in the far upper tail.
inline double normal_mills_inverse(double z) {
  if (z > 35.0) {
    const double z2 = z * z;
    return z + 1.0 / z - 2.0 / (z * z2) + 10.0 / (z * z2 * z2);
  }
  return normal_density(z) / normal_upper_tail(z);
}

}  // namespace detail

/// A parameterized one-dimensional value distribution. Immutable; cheap to copy.
class Distribution {
 public:
  using Family = std::variant<family::Uniform, family::Exponential, family::PowerLaw,
                              family::EqualRevenue, family::TruncatedNormal, family::PointMass,
                              family::TwoPoint>;

  static Distribution uniform(double a, double b) {
    require(std::isfinite(a) && std::isfinite(b) && a >= 0.0 && b > a, ErrorCode::InvalidParameter,
            "uniform requires 0 <= a < b");
    return Distribution(family::Uniform{a, b});
  }
  static Distribution exponential(double rate) {
    require(std::isfinite(rate) && rate > 0.0, ErrorCode::InvalidParameter,
            "exponential requires rate > 0");
    return Distribution(family::Exponential{rate});
  }
  static Distribution power_law(double alpha) {
    require(std::isfinite(alpha) && alpha > 0.0, ErrorCode::InvalidParameter,
            "power_law requires alpha > 0");
    return Distribution(family::PowerLaw{alpha});
  }
  static Distribution equal_revenue() { return Distribution(family::EqualRevenue{}); }
  static Distribution truncated_normal(double mu, double sigma) {
    require(std::isfinite(mu) && std::isfinite(sigma) && sigma > 0.0, ErrorCode::InvalidParameter,
            "truncated_normal requires sigma > 0");
    require(detail::normal_upper_tail(-mu / sigma) > 1e-300, ErrorCode::InvalidParameter,
            "truncated_normal has no mass on [0, inf)");
    return Distribution(family::TruncatedNormal{mu, sigma});
  }
  static Distribution point_mass(double value) {
    require(std::isfinite(value) && value >= 0.0, ErrorCode::InvalidParameter,
            "point_mass requires a finite value >= 0");
    return Distribution(family::PointMass{value});
  }
  static Distribution two_point(double low, double high, double p_high) {
    require(std::isfinite(low) && std::isfinite(high) && low >= 0.0 && low < high,
            ErrorCode::InvalidParameter, "two_point requires 0 <= low < high");
    require(p_high > 0.0 && p_high < 1.0, ErrorCode::InvalidParameter,
            "two_point requires 0 < p_high < 1");
    return Distribution(family::TwoPoint{low, high, p_high});
  }

  const Family& family() const { return family_; }

  std::string name() const {
    return std::visit(
        [](const auto& f) -> std::string {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, family::Uniform>) return "uniform";
          else if constexpr (std::is_same_v<F, family::Exponential>) return "exponential";
          else if constexpr (std::is_same_v<F, family::PowerLaw>) return "power_law";
          else if constexpr (std::is_same_v<F, family::EqualRevenue>) return "equal_revenue";
          else if constexpr (std::is_same_v<F, family::TruncatedNormal>) return "truncated_normal";
          else if constexpr (std::is_same_v<F, family::PointMass>) return "point_mass";
          else return "two_point";
        },
        family_);
  }

  /// Short human-readable literal, e.g. "uniform(0,1)".
  std::string describe() const {
    std::ostringstream os;
    os << name() << '(';
    std::visit(
        [&os](const auto& f) {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, family::Uniform>) os << f.a << ',' << f.b;
          else if constexpr (std::is_same_v<F, family::Exponential>) os << f.rate;
          else if constexpr (std::is_same_v<F, family::PowerLaw>) os << f.alpha;
          else if constexpr (std::is_same_v<F, family::TruncatedNormal>) os << f.mu << ',' << f.sigma;
          else if constexpr (std::is_same_v<F, family::PointMass>) os << f.value;
          else if constexpr (std::is_same_v<F, family::TwoPoint>)
            os << f.low << ',' << f.high << ',' << f.p_high;
        },
        family_);
    os << ')';
    return os.str();
  }

  bool is_atomic() const {
    return std::holds_alternative<family::PointMass>(family_) ||
           std::holds_alternative<family::TwoPoint>(family_);
  }

  SupportInterval support() const {
    return std::visit(
        [](const auto& f) -> SupportInterval {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, family::Uniform>) return {f.a, f.b};
          else if constexpr (std::is_same_v<F, family::PowerLaw>) return {1.0, kInfinity};
          else if constexpr (std::is_same_v<F, family::PointMass>) return {f.value, f.value};
          else if constexpr (std::is_same_v<F, family::TwoPoint>) return {f.low, f.high};
          else return {0.0, kInfinity};
        },
        family_);
  }

  /// Locations of probability atoms (empty for continuous families).
  std::vector<double> atoms() const {
    if (const auto* p = std::get_if<family::PointMass>(&family_)) return {p->value};
    if (const auto* t = std::get_if<family::TwoPoint>(&family_)) return {t->low, t->high};
    return {};
  }

  /// P(X > x).
  double survival(double x) const {
    return std::visit(
        [x](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, family::Uniform>) {
            if (x <= f.a) return 1.0;
            if (x >= f.b) return 0.0;
            return (f.b - x) / (f.b - f.a);
          } else if constexpr (std::is_same_v<F, family::Exponential>) {
            return x <= 0.0 ? 1.0 : std::exp(-f.rate * x);
          } else if constexpr (std::is_same_v<F, family::PowerLaw>) {
            return x <= 1.0 ? 1.0 : std::pow(x, -f.alpha);
          } else if constexpr (std::is_same_v<F, family::EqualRevenue>) {
            return x <= 0.0 ? 1.0 : 1.0 / (x + 1.0);
          } else if constexpr (std::is_same_v<F, family::TruncatedNormal>) {
            if (x <= 0.0) return 1.0;
            return detail::normal_upper_tail((x - f.mu) / f.sigma) /
                   detail::normal_upper_tail(-f.mu / f.sigma);
          } else if constexpr (std::is_same_v<F, family::PointMass>) {
            return x < f.value ? 1.0 : 0.0;
          } else {
            if (x < f.low) return 1.0;
            if (x < f.high) return f.p_high;
            return 0.0;
          }
        },
        family_);
  }

  /// Right-continuous cdf P(X <= x).
  double cdf(double x) const {
    return std::visit(
        [this, x](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, family::Exponential>) {
            return x <= 0.0 ? 0.0 : -std::expm1(-f.rate * x);
          } else if constexpr (std::is_same_v<F, family::PowerLaw>) {
            return x <= 1.0 ? 0.0 : -std::expm1(-f.alpha * std::log(x));
          } else if constexpr (std::is_same_v<F, family::EqualRevenue>) {
            return x <= 0.0 ? 0.0 : x / (x + 1.0);
          } else {
            return 1.0 - survival(x);
          }
        },
        family_);
  }

  /// Left limit P(X < x); differs from cdf only at atoms.
  double cdf_left(double x) const {
    if (const auto* p = std::get_if<family::PointMass>(&family_)) return x > p->value ? 1.0 : 0.0;
    if (const auto* t = std::get_if<family::TwoPoint>(&family_)) {
      if (x <= t->low) return 0.0;
      if (x <= t->high) return 1.0 - t->p_high;
      return 1.0;
    }
    return cdf(x);
  }

  /// P(X >= x); equals survival(x) except at atoms.
  double survival_left(double x) const { return is_atomic() ? 1.0 - cdf_left(x) : survival(x); }

  /// Density; zero outside the support. Atomic families have no density.
  double pdf(double x) const {
    return std::visit(
        [x](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, family::Uniform>) {
            return (x < f.a || x > f.b) ? 0.0 : 1.0 / (f.b - f.a);
          } else if constexpr (std::is_same_v<F, family::Exponential>) {
            return x < 0.0 ? 0.0 : f.rate * std::exp(-f.rate * x);
          } else if constexpr (std::is_same_v<F, family::PowerLaw>) {
            return x < 1.0 ? 0.0 : f.alpha * std::pow(x, -f.alpha - 1.0);
          } else if constexpr (std::is_same_v<F, family::EqualRevenue>) {
            return x < 0.0 ? 0.0 : 1.0 / ((x + 1.0) * (x + 1.0));
          } else if constexpr (std::is_same_v<F, family::TruncatedNormal>) {
            if (x < 0.0) return 0.0;
            return detail::normal_density((x - f.mu) / f.sigma) /
                   (f.sigma * detail::normal_upper_tail(-f.mu / f.sigma));
          } else {
            throw Error(ErrorCode::AtomicDistribution, "atomic distributions have no density");
          }
        },
        family_);
  }

  /// Generalized inverse inf{x : F(x) >= q}.
  double quantile(double q) const {
    require(q >= 0.0 && q <= 1.0, ErrorCode::InvalidParameter, "quantile level must lie in [0,1]");
    const SupportInterval s = support();
    if (q <= 0.0) return s.lo;
    if (q >= 1.0) {
      require(s.bounded(), ErrorCode::UnboundedQuantile,
              name() + " has no finite quantile at level 1");
      return s.hi;
    }
    return std::visit(
        [q](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, family::Uniform>) {
            return f.a + q * (f.b - f.a);
          } else if constexpr (std::is_same_v<F, family::Exponential>) {
            return -std::log1p(-q) / f.rate;
          } else if constexpr (std::is_same_v<F, family::PowerLaw>) {
            return std::exp(-std::log1p(-q) / f.alpha);
          } else if constexpr (std::is_same_v<F, family::EqualRevenue>) {
            return q / (1.0 - q);
          } else if constexpr (std::is_same_v<F, family::TruncatedNormal>) {
            return truncated_normal_quantile(f, q);
          } else if constexpr (std::is_same_v<F, family::PointMass>) {
            return f.value;
          } else {
            return q <= 1.0 - f.p_high ? f.low : f.high;
          }
        },
        family_);
  }

  /// Closed-form hazard rate; valid for lo <= x < hi on continuous families.
  double hazard(double x) const {
    return std::visit(
        [x](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, family::Uniform>) {
            return 1.0 / (f.b - x);
          } else if constexpr (std::is_same_v<F, family::Exponential>) {
            return f.rate;
          } else if constexpr (std::is_same_v<F, family::PowerLaw>) {
            return f.alpha / x;
          } else if constexpr (std::is_same_v<F, family::EqualRevenue>) {
            return 1.0 / (x + 1.0);
          } else if constexpr (std::is_same_v<F, family::TruncatedNormal>) {
            return detail::normal_mills_inverse((x - f.mu) / f.sigma) / f.sigma;
          } else {
            throw Error(ErrorCode::AtomicDistribution, "atomic distributions have no hazard rate");
          }
        },
        family_);
  }

  /// Closed-form virtual value x - 1/h(x); valid for lo <= x < hi.
  double virtual_value(double x) const {
    return std::visit(
        [this, x](const auto& f) -> double {
          using F = std::decay_t<decltype(f)>;
          if constexpr (std::is_same_v<F, family::Uniform>) {
            return 2.0 * x - f.b;
          } else if constexpr (std::is_same_v<F, family::Exponential>) {
            return x - 1.0 / f.rate;
          } else if constexpr (std::is_same_v<F, family::PowerLaw>) {
            return x * (1.0 - 1.0 / f.alpha);
          } else if constexpr (std::is_same_v<F, family::EqualRevenue>) {
            return x - (x + 1.0);
          } else {
            return x - 1.0 / hazard(x);
          }
        },
        family_);
  }

  /// Inverse-transform draw from an explicit uniform u in (0, 1).
  double from_uniform(double u) const { return quantile(u); }

  double sample(Stream& stream) const { return quantile(stream.uniform()); }

 private:
  explicit Distribution(Family f) : family_(f) {}

  static double truncated_normal_quantile(const family::TruncatedNormal& f, double q) {
    const Distribution d(f);
    // F(x) >= q  <=>  S(x) <= 1 - q; comparing survivals keeps precision near q = 1.
    const double target = 1.0 - q;
    double lo = 0.0;
    double hi = std::max(f.mu, 0.0) + f.sigma;
    while (d.survival(hi) > target) hi = 2.0 * hi + f.sigma;
    for (int i = 0; i < 300 && hi - lo > 1e-13 * std::max(1.0, hi); ++i) {
      const double mid = 0.5 * (lo + hi);
      if (d.survival(mid) <= target) hi = mid;
      else lo = mid;
    }
    return hi;
  }

  Family family_;
};

/// The surface shared by single distributions and per-bidder mixtures; the
/// grid certificates below are written once against it.
template <class D>
concept ValueDistribution = requires(const D& d, double x) {
  { d.cdf(x) } -> std::convertible_to<double>;
  { d.survival(x) } -> std::convertible_to<double>;
  { d.quantile(x) } -> std::convertible_to<double>;
  { d.virtual_value(x) } -> std::convertible_to<double>;
  { d.support() } -> std::same_as<SupportInterval>;
  { d.is_atomic() } -> std::same_as<bool>;
};

struct HazardAndVirtual {
  double hazard;
  double virtual_value;
};

inline double cdf(const Distribution& d, double x) { return d.cdf(x); }
inline double quantile(const Distribution& d, double q) { return d.quantile(q); }
inline double sample(const Distribution& d, Stream& stream) { return d.sample(stream); }

inline HazardAndVirtual hazard_and_virtual(const Distribution& d, double x) {
  require(!d.is_atomic(), ErrorCode::AtomicDistribution, d.describe() + " has atoms");
  const SupportInterval s = d.support();
  require(x > s.lo && x < s.hi, ErrorCode::OutsideSupport,
          "x is not strictly inside the support of " + d.describe());
  return {d.hazard(x), d.virtual_value(x)};
}

/// R(q) = q * F^{-1}(1 - q): revenue of the posted price that sells with probability q.
template <ValueDistribution D>
double revenue_curve_point(const D& d, double q) {
  require(q > 0.0 && q < 1.0, ErrorCode::InvalidParameter, "revenue curve needs 0 < q < 1");
  return q * d.quantile(1.0 - q);
}

/// Quantile-spaced evaluation points u_j in [eps, 1 - eps].
inline std::vector<double> quantile_grid(std::size_t size) {
  std::vector<double> u(size);
  const double span = 1.0 - 2.0 * kQuantileMargin;
  for (std::size_t j = 0; j < size; ++j)
    u[j] = kQuantileMargin + span * static_cast<double>(j) / static_cast<double>(size - 1);
  return u;
}

/// Grid certificate that the virtual value is nondecreasing (numerical verdict).
template <ValueDistribution D>
bool regularity_check(const D& d, std::size_t grid_size = kDefaultCertificateGrid) {
  require(!d.is_atomic(), ErrorCode::AtomicDistribution, "regularity needs a density");
  require(grid_size >= 100, ErrorCode::InvalidParameter, "grid_size must be at least 100");
  double previous = -kInfinity;
  for (double u : quantile_grid(grid_size)) {
    const double phi = d.virtual_value(d.quantile(u));
    if (phi - previous < -kMonotoneTolerance) return false;
    previous = phi;
  }
  return true;
}

struct HazardComparison {
  bool dominates = true;
  /// First grid value where h_first > h_second + tol.
  std::optional<double> first_violation;
  /// First grid value where sign(h_first - h_second) flips.
  std::optional<double> crossing;
};

/// Compares hazard rates on a quantile-spaced grid over the support intersection.
inline HazardComparison compare_hazards(const Distribution& first, const Distribution& second,
                                        std::size_t grid_size = kDefaultCertificateGrid) {
  require(!first.is_atomic() && !second.is_atomic(), ErrorCode::AtomicDistribution,
          "hazard-rate dominance needs densities");
  require(grid_size >= 2, ErrorCode::InvalidParameter, "grid_size must be at least 2");
  const SupportInterval a = first.support();
  const SupportInterval b = second.support();
  const double lo = std::max(a.lo, b.lo);
  const double hi = std::min(a.hi, b.hi);
  require(hi > lo, ErrorCode::DisjointSupports,
          first.describe() + " and " + second.describe() + " share no interval");

  // Space points by the quantiles of the distribution that bounds the
  // intersection from above, restricted to the intersection.
  const Distribution& ref = (b.hi <= a.hi) ? second : first;
  const double u_lo = ref.cdf(lo);
  const double u_hi = std::isfinite(hi) ? ref.cdf(hi) : 1.0;
  const double inner = 1.0 - 2.0 * kQuantileMargin;

  HazardComparison out;
  int previous_sign = 0;
  for (std::size_t j = 0; j < grid_size; ++j) {
    const double t = kQuantileMargin + inner * static_cast<double>(j) / static_cast<double>(grid_size - 1);
    const double x = std::clamp(ref.quantile(u_lo + (u_hi - u_lo) * t), lo, hi);
    if (!(x < hi)) continue;
    const double diff = first.hazard(x) - second.hazard(x);
    if (diff > kMonotoneTolerance) {
      out.dominates = false;
      if (!out.first_violation) out.first_violation = x;
    }
    const int sign = diff > kMonotoneTolerance ? 1 : (diff < -kMonotoneTolerance ? -1 : 0);
    if (sign != 0) {
      if (previous_sign != 0 && sign != previous_sign && !out.crossing) out.crossing = x;
      previous_sign = sign;
    }
  }
  return out;
}

/// True iff `first` hazard-rate dominates `second` (h_first <= h_second) on the grid.
inline bool hr_dominates(const Distribution& first, const Distribution& second,
                         std::size_t grid_size = kDefaultCertificateGrid) {
  return compare_hazards(first, second, grid_size).dominates;
}

namespace detail {

template <class Objective>
double golden_section_max(Objective&& f, double lo, double hi) {
  constexpr double inv_phi = 0.6180339887498949;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int i = 0; i < 300 && (hi - lo) > 1e-9 * std::max(1e-12, std::abs(0.5 * (lo + hi))); ++i) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = f(x1);
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Expected revenue of the take-it-or-leave-it price r: r * P(X >= r).
inline double posted_price_revenue(const Distribution& d, double r) { return r * (1.0 - d.cdf_left(r)); }

/// argmax_r r * P(X >= r). Coarse quantile grid, then golden-section refinement.
inline double monopoly_reserve(const Distribution& d) {
  if (d.is_atomic()) {
    double best = 0.0;
    double best_revenue = -1.0;
    for (double r : d.atoms()) {
      const double rev = posted_price_revenue(d, r);
      if (rev > best_revenue) {
        best_revenue = rev;
        best = r;
      }
    }
    return best;
  }

  constexpr std::size_t coarse = 2049;
  std::vector<double> xs;
  xs.reserve(coarse + 1);
  xs.push_back(d.support().lo);
  for (double u : quantile_grid(coarse)) xs.push_back(d.quantile(u));

  std::size_t best = 0;
  double best_revenue = -1.0;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double rev = posted_price_revenue(d, xs[j]);
    if (rev > best_revenue) {
      best_revenue = rev;
      best = j;
    }
  }
  const std::size_t last = xs.size() - 1;
  if (best == last && posted_price_revenue(d, xs[last]) > posted_price_revenue(d, xs[last - 1])) {
    throw Error(ErrorCode::SupremumNotAttained,
                "posted-price revenue of " + d.describe() + " still increases at the search cap");
  }
  const double lo = xs[best == 0 ? 0 : best - 1];
  const double hi = xs[std::min(best + 1, last)];
  if (hi <= lo) return xs[best];
  const double refined = detail::golden_section_max(
      [&d](double r) { return posted_price_revenue(d, r); }, lo, hi);
  return posted_price_revenue(d, refined) >= best_revenue ? refined : xs[best];
}

}  // namespace auction_lab
