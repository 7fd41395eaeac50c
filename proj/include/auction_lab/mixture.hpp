#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "auction_lab/distribution.hpp"
#include "auction_lab/error.hpp"
#include "auction_lab/rng.hpp"

namespace auction_lab {

inline constexpr double kWeightRowTolerance = 1e-12;
inline constexpr std::uint64_t kDefaultProfileCap = 1'000'000;
inline constexpr std::size_t kDefaultIroningGrid = 4097;

/// One bidder's value law: sum_t p_t G_t. Satisfies ValueDistribution.
class BidderMixture {
 public:
  BidderMixture(std::vector<Distribution> components, std::vector<double> weights)
      : components_(std::move(components)), weights_(std::move(weights)) {}

  std::span<const Distribution> components() const { return components_; }
  std::span<const double> weights() const { return weights_; }

  bool is_atomic() const {
    for (std::size_t t = 0; t < components_.size(); ++t)
      if (weights_[t] > 0.0 && components_[t].is_atomic()) return true;
    return false;
  }

  SupportInterval support() const {
    SupportInterval s{kInfinity, 0.0};
    for (std::size_t t = 0; t < components_.size(); ++t) {
      if (weights_[t] <= 0.0) continue;
      const SupportInterval c = components_[t].support();
      s.lo = std::min(s.lo, c.lo);
      s.hi = std::max(s.hi, c.hi);
    }
    return s;
  }

  double cdf(double x) const { return mix([x](const Distribution& d) { return d.cdf(x); }); }
  double cdf_left(double x) const { return mix([x](const Distribution& d) { return d.cdf_left(x); }); }
  double survival(double x) const { return mix([x](const Distribution& d) { return d.survival(x); }); }
  double survival_left(double x) const {
    return mix([x](const Distribution& d) { return d.survival_left(x); });
  }
  double pdf(double x) const { return mix([x](const Distribution& d) { return d.pdf(x); }); }

  /// x - S(x)/f(x) of the mixture itself (not of any component).
  double virtual_value(double x) const { return x - survival(x) / pdf(x); }

  /// Generalized inverse by bisection. The mixture quantile at level q lies
  /// between the smallest and largest component quantiles at the same level.
  double quantile(double q) const {
    require(q >= 0.0 && q <= 1.0, ErrorCode::InvalidParameter, "quantile level must lie in [0,1]");
    const SupportInterval s = support();
    if (q <= 0.0) return s.lo;
    if (q >= 1.0) {
      require(s.bounded(), ErrorCode::UnboundedQuantile, "mixture has no finite quantile at level 1");
      return s.hi;
    }
    double lo = kInfinity;
    double hi = -kInfinity;
    for (std::size_t t = 0; t < components_.size(); ++t) {
      if (weights_[t] <= 0.0) continue;
      const double x = components_[t].quantile(q);
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    if (cdf(lo) >= q) return lo;
    const double target = 1.0 - q;
    for (int i = 0; i < 300 && hi - lo > 1e-13 * std::max(1.0, hi); ++i) {
      const double mid = 0.5 * (lo + hi);
      if (survival(mid) <= target) hi = mid;
      else lo = mid;
    }
    for (const auto& d : components_)
      for (double a : d.atoms())
        if (a >= lo && a <= hi && cdf(a) >= q) return a;
    return hi;
  }

 private:
  template <class F>
  double mix(F&& f) const {
    double total = 0.0;
    for (std::size_t t = 0; t < components_.size(); ++t)
      if (weights_[t] > 0.0) total += weights_[t] * f(components_[t]);
    return total;
  }

  std::vector<Distribution> components_;
  std::vector<double> weights_;
};

/// n bidders, k shared regular components, and the n-by-k mixture weights.
/// Coins are independent across bidders; correlated coins are not representable.
class MarketModel {
 public:
  std::size_t n() const { return weights_.size(); }
  std::size_t k() const { return components_.size(); }

  const std::vector<Distribution>& components() const { return components_; }
  const Distribution& component(std::size_t t) const { return components_.at(t); }
  const std::vector<std::vector<double>>& weights() const { return weights_; }
  double weight(std::size_t bidder, std::size_t t) const { return weights_.at(bidder).at(t); }

  /// Minimum strictly positive mixture weight.
  double delta() const { return delta_; }
  /// True when every bidder uses the same weight row.
  bool is_iid() const { return iid_; }
  bool component_regular(std::size_t t) const { return regular_.at(t); }
  bool all_components_regular() const {
    return std::all_of(regular_.begin(), regular_.end(), [](bool r) { return r; });
  }
  /// Non-fatal IrregularComponent diagnostics collected at build time.
  const std::vector<std::string>& warnings() const { return warnings_; }

  BidderMixture bidder(std::size_t i) const {
    require(i < n(), ErrorCode::IndexOutOfRange, "bidder index out of range");
    return BidderMixture(components_, weights_[i]);
  }

  /// The market with every coin fixed: bidder i draws from component q[i].
  MarketModel conditioned_on(std::span<const std::uint32_t> q) const {
    require(q.size() == n(), ErrorCode::InvalidParameter, "profile length differs from n");
    MarketModel out = *this;
    for (std::size_t i = 0; i < n(); ++i) {
      require(q[i] < k(), ErrorCode::IndexOutOfRange, "profile names a nonexistent component");
      out.weights_[i].assign(k(), 0.0);
      out.weights_[i][q[i]] = 1.0;
    }
    out.delta_ = 1.0;
    out.iid_ = std::all_of(q.begin(), q.end(), [&](std::uint32_t t) { return t == q.front(); });
    return out;
  }

 private:
  friend MarketModel build_market(std::vector<Distribution>, std::vector<std::vector<double>>);

  std::vector<Distribution> components_;
  std::vector<std::vector<double>> weights_;
  std::vector<bool> regular_;
  std::vector<std::string> warnings_;
  double delta_ = 1.0;
  bool iid_ = true;
};

inline MarketModel build_market(std::vector<Distribution> components,
                                std::vector<std::vector<double>> weights) {
  require(!components.empty(), ErrorCode::InvalidParameter, "market needs at least one component");
  require(!weights.empty(), ErrorCode::InvalidParameter, "market needs at least one bidder");
  MarketModel m;
  m.delta_ = 1.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    const auto& row = weights[i];
    require(row.size() == components.size(), ErrorCode::InvalidParameter,
            "weights row " + std::to_string(i) + " has the wrong length");
    double sum = 0.0;
    for (double p : row) {
      require(std::isfinite(p) && p >= 0.0, ErrorCode::NegativeWeight,
              "weights row " + std::to_string(i) + " has a negative entry");
      sum += p;
      if (p > 0.0) m.delta_ = std::min(m.delta_, p);
    }
    require(std::abs(sum - 1.0) <= kWeightRowTolerance, ErrorCode::WeightRowSum,
            "weights row " + std::to_string(i) + " sums to " + std::to_string(sum));
    if (row != weights.front()) m.iid_ = false;
  }
  m.regular_.resize(components.size());
  for (std::size_t t = 0; t < components.size(); ++t) {
    const bool regular = !components[t].is_atomic() && regularity_check(components[t]);
    m.regular_[t] = regular;
    if (!regular)
      m.warnings_.push_back(to_string(ErrorCode::IrregularComponent).data() + std::string(": component ") +
                            std::to_string(t) + " " + components[t].describe() + " is not regular");
  }
  m.components_ = std::move(components);
  m.weights_ = std::move(weights);
  return m;
}

/// Convenience for i.i.d. markets: one weight row shared by n bidders.
inline MarketModel build_iid_market(std::vector<Distribution> components, std::vector<double> row,
                                    std::size_t n) {
  return build_market(std::move(components), std::vector<std::vector<double>>(n, std::move(row)));
}

inline double mixture_cdf(const MarketModel& m, std::size_t i, double x) { return m.bidder(i).cdf(x); }
inline double mixture_pdf(const MarketModel& m, std::size_t i, double x) { return m.bidder(i).pdf(x); }

struct CoinAndValue {
  std::size_t component;
  double value;
};

/// Draws a categorical index with the given probabilities from one uniform.
inline std::size_t draw_coin(std::span<const double> weights, Stream& stream) {
  const double u = stream.uniform();
  double cumulative = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t t = 0; t < weights.size(); ++t) {
    if (weights[t] <= 0.0) continue;
    cumulative += weights[t];
    last_positive = t;
    if (u < cumulative) return t;
  }
  return last_positive;
}

/// Coin first, then a draw from the selected component; both are returned.
inline CoinAndValue sample_two_stage(const MarketModel& m, std::size_t i, Stream& stream) {
  const std::size_t t = draw_coin(m.weights().at(i), stream);
  return {t, m.component(t).sample(stream)};
}

struct IndexProfile {
  std::vector<std::uint32_t> components;
  double weight = 0.0;

  /// Number of distinct components present, k(q).
  std::size_t distinct_count() const {
    std::vector<std::uint32_t> sorted = components;
    std::sort(sorted.begin(), sorted.end());
    return static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
  }
};

inline std::uint64_t profile_space_size(const MarketModel& m, std::uint64_t cap) {
  std::uint64_t size = 1;
  for (std::size_t i = 0; i < m.n(); ++i) {
    if (size > cap / m.k() + 1) return cap + 1;
    size *= m.k();
  }
  return size;
}

/// All k^n index profiles with their exact weights p(q) = prod_i p_{i,q_i}.
inline std::vector<IndexProfile> enumerate_profiles(const MarketModel& m,
                                                    std::uint64_t cap = kDefaultProfileCap) {
  const std::uint64_t total = profile_space_size(m, cap);
  require(total <= cap, ErrorCode::ProfileSpaceTooLarge,
          "k^n exceeds the enumeration cap of " + std::to_string(cap));
  std::vector<IndexProfile> out;
  out.reserve(static_cast<std::size_t>(total));
  std::vector<std::uint32_t> q(m.n(), 0);
  for (std::uint64_t idx = 0; idx < total; ++idx) {
    double w = 1.0;
    for (std::size_t i = 0; i < m.n(); ++i) w *= m.weight(i, q[i]);
    out.push_back({q, w});
    // odometer increment, last bidder fastest
    for (std::size_t i = m.n(); i-- > 0;) {
      if (++q[i] < m.k()) break;
      q[i] = 0;
    }
  }
  return out;
}

/// A revenue curve on a uniform quantile grid together with its upper concave
/// hull. `ironed_phi[j]` is the hull slope on cell [grid[j], grid[j+1]], which
/// is the ironed virtual value of every value whose sale quantile falls there.
class IronedCurve {
 public:
  std::vector<double> grid;
  std::vector<double> raw_revenue;
  std::vector<double> hull_revenue;
  std::vector<double> ironed_phi;

  IronedCurve() = default;
  IronedCurve(std::function<double(double)> survival, SupportInterval support)
      : survival_(std::move(survival)), support_(support) {}

  SupportInterval support() const { return support_; }

  /// Ironed virtual value of a bidder with value v (sale quantile q = S(v)).
  double virtual_value(double v) const {
    const double q = survival_(v);
    const double step = grid[1] - grid[0];
    const double pos = (q - grid.front()) / step;
    const auto cells = static_cast<std::ptrdiff_t>(ironed_phi.size());
    auto j = static_cast<std::ptrdiff_t>(std::floor(pos));
    j = std::clamp<std::ptrdiff_t>(j, 0, cells - 1);
    return ironed_phi[static_cast<std::size_t>(j)];
  }

  /// Largest gap between hull and raw curve.
  double max_ironing_gap() const {
    double gap = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j) gap = std::max(gap, hull_revenue[j] - raw_revenue[j]);
    return gap;
  }

 private:
  std::function<double(double)> survival_;
  SupportInterval support_;
};

/// Indices of the upper concave hull vertices (Andrew's monotone chain) of
/// points with ascending x.
inline std::vector<std::size_t> upper_hull_vertices(std::span<const double> xs, std::span<const double> ys) {
  std::vector<std::size_t> hull;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    while (hull.size() >= 2) {
      const std::size_t a = hull[hull.size() - 2];
      const std::size_t b = hull.back();
      // drop b when it lies on or below the chord a -> j
      const double cross = (xs[b] - xs[a]) * (ys[j] - ys[a]) - (ys[b] - ys[a]) * (xs[j] - xs[a]);
      if (cross >= 0.0) hull.pop_back();
      else break;
    }
    hull.push_back(j);
  }
  return hull;
}

/// Upper concave hull evaluated back on the same abscissae.
inline std::vector<double> upper_concave_hull(std::span<const double> xs, std::span<const double> ys) {
  const std::vector<std::size_t> hull = upper_hull_vertices(xs, ys);
  std::vector<double> out(xs.size());
  for (std::size_t h = 0; h + 1 < hull.size(); ++h) {
    const std::size_t a = hull[h];
    const std::size_t b = hull[h + 1];
    out[a] = ys[a];
    for (std::size_t j = a + 1; j < b; ++j) {
      const double t = (xs[j] - xs[a]) / (xs[b] - xs[a]);
      out[j] = std::max(ys[j], ys[a] + t * (ys[b] - ys[a]));
    }
  }
  out[hull.back()] = ys[hull.back()];
  return out;
}

template <ValueDistribution D>
IronedCurve iron_distribution(const D& d, std::size_t grid_size = kDefaultIroningGrid) {
  require(!d.is_atomic(), ErrorCode::AtomicDistribution, "ironing needs a continuous distribution");
  require(grid_size >= 257, ErrorCode::InvalidParameter, "ironing grid must have at least 257 points");
  IronedCurve curve([d](double v) { return d.survival(v); }, d.support());
  curve.grid = quantile_grid(grid_size);
  curve.raw_revenue.resize(grid_size);
  for (std::size_t j = 0; j < grid_size; ++j)
    curve.raw_revenue[j] = curve.grid[j] * d.quantile(1.0 - curve.grid[j]);
  curve.hull_revenue = upper_concave_hull(curve.grid, curve.raw_revenue);
  // One slope per hull segment, so ironed stretches share an exactly equal value.
  const std::vector<std::size_t> hull = upper_hull_vertices(curve.grid, curve.raw_revenue);
  curve.ironed_phi.resize(grid_size - 1);
  double previous = kInfinity;
  for (std::size_t h = 0; h + 1 < hull.size(); ++h) {
    const std::size_t a = hull[h];
    const std::size_t b = hull[h + 1];
    const double slope = std::min(previous, (curve.raw_revenue[b] - curve.raw_revenue[a]) / (curve.grid[b] - curve.grid[a]));
    for (std::size_t j = a; j < b; ++j) curve.ironed_phi[j] = slope;
    previous = slope;
  }
  return curve;
}

/// Ironed revenue curve of bidder i's mixture.
inline IronedCurve iron(const MarketModel& m, std::size_t i, std::size_t grid_size = kDefaultIroningGrid) {
  return iron_distribution(m.bidder(i), grid_size);
}

}  // namespace auction_lab
