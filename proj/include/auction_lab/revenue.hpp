#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "auction_lab/distribution.hpp"
#include "auction_lab/error.hpp"
#include "auction_lab/mechanism.hpp"
#include "auction_lab/mixture.hpp"
#include "auction_lab/quadrature.hpp"
#include "auction_lab/rng.hpp"

namespace auction_lab {

enum class Method { MonteCarlo, Exact, Quadrature };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::MonteCarlo: return "MC";
    case Method::Exact: return "exact";
    case Method::Quadrature: return "quadrature";
  }
  return "?";
}

struct RevenueEstimate {
  double mean = 0.0;
  double std_err = 0.0;
  std::uint64_t n_samples = 0;
  Method method = Method::MonteCarlo;
};

struct EstimatorConfig {
  std::uint64_t seed = 0;
  std::uint64_t n_samples = 100'000;
  std::uint32_t n_streams = 16;
  std::uint64_t profile_cap = kDefaultProfileCap;
  double quadrature_tolerance = 1e-6;
  /// Floor on the per-profile sample count of the stratified benchmark.
  std::uint64_t min_profile_samples = 200;

  void validate() const {
    require(n_samples >= 1, ErrorCode::InvalidParameter, "n_samples must be at least 1");
    require(n_streams >= 1, ErrorCode::InvalidParameter, "n_streams must be at least 1");
    require(quadrature_tolerance > 0.0, ErrorCode::InvalidParameter, "quadrature tolerance must be > 0");
  }
};

/// An extra participant: a fresh draw from a market component, or a fixed value.
struct ExtraBidder {
  std::optional<std::size_t> component;
  double value = 0.0;

  static ExtraBidder drawn_from(std::size_t t) { return {t, 0.0}; }
  static ExtraBidder fixed(double v) {
    require(std::isfinite(v) && v >= 0.0, ErrorCode::InvalidParameter, "extra bidder value must be >= 0");
    return {std::nullopt, v};
  }
};

class KahanSum {
 public:
  void add(double x) {
    const double y = x - carry_;
    const double t = sum_ + y;
    carry_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  double sum_ = 0.0;
  double carry_ = 0.0;
};

/// Running first and second moments.
class Moments {
 public:
  void add(double x) {
    sum_.add(x);
    sum_sq_.add(x * x);
    ++count_;
  }
  void merge(const Moments& other) {
    sum_.add(other.sum_.value());
    sum_sq_.add(other.sum_sq_.value());
    count_ += other.count_;
  }
  std::uint64_t count() const { return count_; }
  double mean() const { return count_ == 0 ? 0.0 : sum_.value() / static_cast<double>(count_); }
  double std_err() const {
    if (count_ < 2) return 0.0;
    const double n = static_cast<double>(count_);
    const double m = mean();
    const double var = std::max(0.0, (sum_sq_.value() - n * m * m) / (n - 1.0));
    return std::sqrt(var / n);
  }
  RevenueEstimate estimate() const { return {mean(), std_err(), count_, Method::MonteCarlo}; }

 private:
  KahanSum sum_;
  KahanSum sum_sq_;
  std::uint64_t count_ = 0;
};

/// Runs `body(stream, state, first_sample, count)` once per stream and returns
/// the per-stream states in stream order. Stream s owns a fixed slice of the
/// sample indices, so the result does not depend on how many threads run.
template <class State, class Body>
std::vector<State> run_streams(std::uint64_t seed, std::uint64_t n_samples, std::uint32_t n_streams,
                               Body&& body) {
  std::vector<State> states(n_streams);
  std::vector<std::exception_ptr> errors(n_streams);
  const std::uint64_t base = n_samples / n_streams;
  const std::uint64_t extra = n_samples % n_streams;
  auto run_one = [&](std::uint32_t s) {
    const std::uint64_t count = base + (s < extra ? 1 : 0);
    const std::uint64_t first = s * base + std::min<std::uint64_t>(s, extra);
    try {
      Stream stream(seed, s);
      body(stream, states[s], first, count);
    } catch (...) {
      errors[s] = std::current_exception();
    }
  };
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned workers = std::min<unsigned>(hw, n_streams);
  if (workers <= 1) {
    for (std::uint32_t s = 0; s < n_streams; ++s) run_one(s);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (std::uint32_t s = w; s < n_streams; s += workers) run_one(s);
      });
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return states;
}

inline void check_extras(const MarketModel& m, std::span<const ExtraBidder> extras) {
  for (const auto& e : extras)
    if (e.component)
      require(*e.component < m.k(), ErrorCode::IndexOutOfRange, "extra bidder names a nonexistent component");
}

/// One joint draw: originals (coin then value) followed by the extras.
inline void draw_profile(const MarketModel& m, std::span<const ExtraBidder> extras, Stream& stream,
                         ValuationProfile& out) {
  out.values.clear();
  out.origins.clear();
  for (std::size_t i = 0; i < m.n(); ++i) {
    const CoinAndValue cv = sample_two_stage(m, i, stream);
    out.values.push_back(cv.value);
    out.origins.push_back({Origin::Kind::Original, static_cast<int>(cv.component)});
  }
  for (const auto& e : extras) {
    if (e.component) {
      out.values.push_back(m.component(*e.component).sample(stream));
      out.origins.push_back({Origin::Kind::Extra, static_cast<int>(*e.component)});
    } else {
      out.values.push_back(e.value);
      out.origins.push_back({Origin::Kind::DeterministicExtra, -1});
    }
  }
}

/// Virtual value of a participant under the component it was drawn from.
inline double component_virtual_value(const MarketModel& m, const ValuationProfile& p, std::size_t i) {
  const int t = p.origins[i].component;
  require(t >= 0, ErrorCode::InvalidParameter, "virtual surplus needs every participant's component");
  const Distribution& d = m.component(static_cast<std::size_t>(t));
  require(!d.is_atomic(), ErrorCode::AtomicDistribution, "virtual surplus needs continuous components");
  return d.virtual_value(p.values[i]);
}

struct McResult {
  RevenueEstimate revenue;
  /// Winner's virtual value under its drawn component (0 on no sale).
  RevenueEstimate virtual_surplus;
  /// Summed utility each participant would get at the floor of its drawn
  /// component, others unchanged. Zero when every floor is 0 or never wins.
  RevenueEstimate floor_rent;
  /// virtual surplus minus floor rent, per draw. Equals revenue in
  /// expectation for any truthful mechanism.
  RevenueEstimate net_surplus;
};

namespace detail {

struct McState {
  Moments revenue;
  Moments surplus;
  Moments rent;
  Moments net;
};

/// Utility summed over participants when each in turn bids the floor of its
/// component's support. Uses its own stream so revenue draws are unaffected.
inline double floor_rent(const MarketModel& m, const MechanismSpec& mech, ValuationProfile& profile,
                         Stream& stream) {
  const MechanismContext ctx{&m.components(), &stream};
  double rent = 0.0;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    const int t = profile.origins[i].component;
    if (t < 0) continue;
    const double floor = m.component(static_cast<std::size_t>(t)).support().lo;
    if (floor <= 0.0) continue;
    const double v = profile.values[i];
    profile.values[i] = floor;
    const AuctionOutcome out = run_mechanism(mech, profile, ctx);
    rent += (out.winner == i ? floor : 0.0) - out.payments[i];
    profile.values[i] = v;
  }
  return rent;
}

/// Re-labels an error message (which starts with its code name) with the sample index.
inline std::string with_sample_index(std::uint64_t index, const Error& e) {
  std::string msg = e.what();
  const std::string prefix = std::string(to_string(e.code())) + ": ";
  if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
  return "sample " + std::to_string(index) + ": " + msg;
}

inline McResult estimate_mc_impl(const MarketModel& m, const MechanismSpec& mech,
                                 std::span<const ExtraBidder> extras, const EstimatorConfig& cfg,
                                 bool with_surplus) {
  cfg.validate();
  check_extras(m, extras);
  auto states = run_streams<McState>(
      cfg.seed, cfg.n_samples, cfg.n_streams,
      [&](Stream& stream, McState& st, std::uint64_t first, std::uint64_t count) {
        ValuationProfile profile;
        const MechanismContext ctx{&m.components(), &stream};
        Stream rent_stream(derive_seed(cfg.seed, 0x72656e74ull), first);
        for (std::uint64_t j = 0; j < count; ++j) {
          try {
            draw_profile(m, extras, stream, profile);
            const AuctionOutcome out = run_mechanism(mech, profile, ctx);
            st.revenue.add(out.revenue);
            if (with_surplus) {
              const double phi = out.winner ? component_virtual_value(m, profile, *out.winner) : 0.0;
              const double rent = floor_rent(m, mech, profile, rent_stream);
              st.surplus.add(phi);
              st.rent.add(rent);
              st.net.add(phi - rent);
            }
          } catch (const Error& e) {
            throw Error(e.code(), with_sample_index(first + j, e));
          }
        }
      });
  McState total;
  for (const auto& s : states) {
    total.revenue.merge(s.revenue);
    total.surplus.merge(s.surplus);
    total.rent.merge(s.rent);
    total.net.merge(s.net);
  }
  return {total.revenue.estimate(), total.surplus.estimate(), total.rent.estimate(), total.net.estimate()};
}

}  // namespace detail

/// Monte Carlo expected revenue of `mech` run on the market's bidders plus `extras`.
inline RevenueEstimate estimate_mc(const MarketModel& m, const MechanismSpec& mech,
                                   std::span<const ExtraBidder> extras, const EstimatorConfig& cfg) {
  return detail::estimate_mc_impl(m, mech, extras, cfg, false).revenue;
}

/// Revenue, virtual surplus and floor rent from the same draws, for checking
/// revenue = E[winner's virtual value] - E[floor rent] on truthful mechanisms.
inline McResult estimate_mc_with_surplus(const MarketModel& m, const MechanismSpec& mech,
                                         std::span<const ExtraBidder> extras, const EstimatorConfig& cfg) {
  return detail::estimate_mc_impl(m, mech, extras, cfg, true);
}

// ---------------------------------------------------------------------------
// Order statistics of independent bidders.

struct ExceedanceCounts {
  double none = 1.0;         // P(no bidder above z)
  double one = 0.0;          // P(exactly one)
  double two_or_more = 0.0;  // P(at least two)
};

/// Distribution of the number of bidders whose value exceeds z (or reaches z
/// when `inclusive`). The "two or more" mass is accumulated directly so that
/// far-tail probabilities keep their relative precision.
template <ValueDistribution D>
ExceedanceCounts exceedance_counts(std::span<const D> dists, double z, bool inclusive = false) {
  ExceedanceCounts c;
  for (const auto& d : dists) {
    const double above = inclusive ? d.survival_left(z) : d.survival(z);
    const double below = inclusive ? d.cdf_left(z) : d.cdf(z);
    const ExceedanceCounts prev = c;
    c.none = prev.none * below;
    c.one = prev.one * below + prev.none * above;
    c.two_or_more = prev.two_or_more + prev.one * above;
  }
  return c;
}

/// P(second-highest value <= z).
template <ValueDistribution D>
double vickrey_revenue_cdf(std::span<const D> dists, double z) {
  require(dists.size() >= 2, ErrorCode::InvalidParameter, "second-highest value needs at least two bidders");
  const ExceedanceCounts c = exceedance_counts(dists, z);
  return std::clamp(c.none + c.one, 0.0, 1.0);
}

namespace detail {

/// P(max >= r) computed from the complement product.
template <ValueDistribution D>
double prob_max_reaches(std::span<const D> dists, double r) {
  double all_below = 1.0;
  for (const auto& d : dists) all_below *= d.cdf_left(r);
  return 1.0 - all_below;
}

template <ValueDistribution D>
std::vector<double> breakpoints_above(std::span<const D> dists, double r) {
  std::vector<double> pts;
  auto add = [&](double x) {
    if (std::isfinite(x) && x > r) pts.push_back(x);
  };
  for (const auto& d : dists) {
    const SupportInterval s = d.support();
    add(s.lo);
    add(s.hi);
    if constexpr (requires { d.atoms(); }) {
      for (double a : d.atoms()) add(a);
    } else if constexpr (requires { d.components(); }) {
      for (const auto& c : d.components()) {
        const SupportInterval cs = c.support();
        add(cs.lo);
        add(cs.hi);
        for (double a : c.atoms()) add(a);
      }
    }
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return pts;
}

}  // namespace detail

/// Second-price expected revenue by quadrature:
///   E = r * P(max >= r) + int_r^inf P(second > z) dz.
/// The integral is split at every atom and support endpoint; the unbounded
/// tail is mapped to [0, 1) by z = b + u / (1 - u).
template <ValueDistribution D>
RevenueEstimate expected_revenue_quadrature(std::span<const D> dists, std::optional<double> reserve,
                                            double tol = 1e-6) {
  require(dists.size() >= 2, ErrorCode::InvalidParameter, "second-price quadrature needs two bidders");
  require(tol > 0.0, ErrorCode::InvalidParameter, "tolerance must be > 0");
  const double r = reserve.value_or(0.0);
  require(r >= 0.0, ErrorCode::NegativeReserve, "reserve < 0");

  auto above_two = [&](double z) { return exceedance_counts(dists, z).two_or_more; };
  auto above_two_left = [&](double z) { return exceedance_counts(dists, z, true).two_or_more; };

  double total = r > 0.0 ? r * detail::prob_max_reaches(dists, r) : 0.0;
  const std::vector<double> pts = detail::breakpoints_above(dists, r);
  const double piece_tol = tol / static_cast<double>(pts.size() + 2);

  double a = r;
  for (double b : pts) {
    const QuadratureResult q = adaptive_simpson(above_two, a, b, above_two(a), above_two_left(b), piece_tol);
    require(q.converged, ErrorCode::DivergentTail, "quadrature failed to converge on a bounded segment");
    total += q.value;
    a = b;
  }

  // tail [a, inf)
  auto g = [&](double u) {
    const double w = 1.0 - u;
    return above_two(a + u / w) / (w * w);
  };
  constexpr double u_max = 1.0 - 1e-12;
  constexpr double u_probe = 1.0 - 1e-8;
  const double g_end = g(u_max);
  const QuadratureResult tail = adaptive_simpson(g, 0.0, u_max, g(0.0), g_end, piece_tol);
  if (g_end > 0.0) {
    // local power law g ~ (1-u)^s near u = 1; the remainder is finite only for s > -1
    const double g_probe = g(u_probe);
    const double s = std::log(g_end / g_probe) / std::log((1.0 - u_max) / (1.0 - u_probe));
    require(s > -1.0, ErrorCode::DivergentTail, "tail of the second-price integrand is not integrable");
    const double remainder = g_end * (1.0 - u_max) / (s + 1.0);
    require(remainder <= tol, ErrorCode::DivergentTail, "tail remainder exceeds the tolerance");
    total += remainder;
  }
  require(tail.converged, ErrorCode::DivergentTail, "tail quadrature failed to converge");
  total += tail.value;
  return {total, 0.0, 0, Method::Quadrature};
}

/// Exact second-price revenue when every bidder is atomic: the integrand of
/// the quadrature formula is then a step function between atoms.
inline RevenueEstimate exact_second_price_revenue(std::span<const Distribution> dists,
                                                  std::optional<double> reserve = std::nullopt) {
  require(dists.size() >= 2, ErrorCode::InvalidParameter, "second price needs two bidders");
  for (const auto& d : dists)
    require(d.is_atomic(), ErrorCode::InvalidParameter, "exact evaluation needs atomic bidders");
  const double r = reserve.value_or(0.0);
  require(r >= 0.0, ErrorCode::NegativeReserve, "reserve < 0");
  double total = r > 0.0 ? r * detail::prob_max_reaches(dists, r) : 0.0;
  std::vector<double> pts = detail::breakpoints_above(dists, r);
  double a = r;
  for (double b : pts) {
    total += (b - a) * exceedance_counts(dists, a).two_or_more;
    a = b;
  }
  return {total, 0.0, 0, Method::Exact};
}

// ---------------------------------------------------------------------------
// Posted sequences.

/// Exact revenue of a posted-price sequence against independent bidders.
template <ValueDistribution D>
double posted_sequence_revenue_exact(std::span<const D> dists, std::span<const double> prices,
                                     std::span<const std::size_t> order) {
  require(prices.size() == order.size(), ErrorCode::InvalidParameter, "one price per offer");
  double reach = 1.0;
  double total = 0.0;
  for (std::size_t j = 0; j < order.size(); ++j) {
    require(order[j] < dists.size(), ErrorCode::IndexOutOfRange, "offer to a nonexistent bidder");
    const D& d = dists[order[j]];
    total += reach * d.survival_left(prices[j]) * prices[j];
    reach *= d.cdf_left(prices[j]);
  }
  return total;
}

struct PostedPolicy {
  mechanism::PostedSequence sequence;
  double revenue = 0.0;
};

/// Best posted sequence with prices drawn from `candidates`, by backward
/// induction for each visiting order. All orders are tried for up to seven
/// bidders; identical bidders need only one order; otherwise the index order
/// is used. A bidder may be skipped (no offer) when every price loses value.
template <ValueDistribution D>
PostedPolicy optimal_posted_sequence(std::span<const D> dists, std::span<const double> candidates) {
  require(!dists.empty(), ErrorCode::InvalidParameter, "no bidders");
  require(!candidates.empty(), ErrorCode::InvalidParameter, "no candidate prices");
  std::vector<std::size_t> order(dists.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  bool identical = true;
  if constexpr (std::is_same_v<D, Distribution>) {
    for (const auto& d : dists) identical = identical && d.describe() == dists.front().describe();
  } else {
    identical = dists.size() == 1;
  }
  const bool all_orders = !identical && dists.size() <= 7;

  PostedPolicy best;
  best.revenue = -1.0;
  do {
    std::vector<double> price(order.size(), kInfinity);
    double continuation = 0.0;
    for (std::size_t j = order.size(); j-- > 0;) {
      const D& d = dists[order[j]];
      double stage_best = continuation;
      double stage_price = kInfinity;
      for (double p : candidates) {
        const double v = p * d.survival_left(p) + d.cdf_left(p) * continuation;
        if (v > stage_best) {
          stage_best = v;
          stage_price = p;
        }
      }
      price[j] = stage_price;
      continuation = stage_best;
    }
    if (continuation > best.revenue) {
      best.revenue = continuation;
      best.sequence.prices.clear();
      best.sequence.order.clear();
      for (std::size_t j = 0; j < order.size(); ++j)
        if (std::isfinite(price[j])) {
          best.sequence.prices.push_back(price[j]);
          best.sequence.order.push_back(order[j]);
        }
    }
  } while (all_orders && std::next_permutation(order.begin(), order.end()));
  return best;
}

// ---------------------------------------------------------------------------
// The discriminating benchmark sum_q p(q) OPT(G(q)).

/// Per-profile posted policy for markets whose profile optimum is not a Myerson auction.
using ProfilePolicy = std::function<mechanism::PostedSequence(const IndexProfile&)>;

struct BenchmarkOptions {
  /// When set, OPT(G(q)) is the exact revenue of this policy's posted sequence.
  ProfilePolicy policy;
  /// Fall back to sampling coin profiles when k^n exceeds the profile cap.
  bool allow_sampling = true;
};

namespace detail {

inline std::vector<Distribution> profile_distributions(const MarketModel& m, std::span<const std::uint32_t> q) {
  std::vector<Distribution> out;
  out.reserve(q.size());
  for (std::uint32_t t : q) out.push_back(m.component(t));
  return out;
}

inline double policy_revenue(const MarketModel& m, const ProfilePolicy& policy, const IndexProfile& q) {
  const mechanism::PostedSequence seq = policy(q);
  const std::vector<Distribution> dists = profile_distributions(m, q.components);
  return posted_sequence_revenue_exact<Distribution>(dists, seq.prices, seq.order);
}

}  // namespace detail

/// Revenue of a seller who observes every bidder's mixture coin before
/// running the per-profile optimal auction.
///
/// With enumeration, Myerson profiles are estimated by stratified MC (profile
/// q gets max(min_profile_samples, round(p(q) N)) samples) and combined with
/// their exact weights; policy profiles are evaluated exactly.
inline RevenueEstimate discriminating_benchmark(const MarketModel& m, const EstimatorConfig& cfg,
                                                const BenchmarkOptions& opts = {}) {
  cfg.validate();
  const bool use_policy = static_cast<bool>(opts.policy);
  if (!use_policy)
    require(m.all_components_regular(), ErrorCode::IrregularComponent,
            "benchmark needs regular components or a per-profile policy");

  const std::uint64_t space = profile_space_size(m, cfg.profile_cap);
  if (space > cfg.profile_cap) {
    require(opts.allow_sampling, ErrorCode::ProfileSpaceTooLarge,
            "k^n exceeds the profile cap and coin sampling is disabled");
    if (!use_policy) return estimate_mc(m, mechanism::DiscriminatingMyerson{}, {}, cfg);
    auto states = run_streams<Moments>(
        cfg.seed, cfg.n_samples, cfg.n_streams, [&](Stream& stream, Moments& acc, std::uint64_t, std::uint64_t count) {
          IndexProfile q;
          q.components.resize(m.n());
          for (std::uint64_t j = 0; j < count; ++j) {
            for (std::size_t i = 0; i < m.n(); ++i)
              q.components[i] = static_cast<std::uint32_t>(draw_coin(m.weights()[i], stream));
            acc.add(detail::policy_revenue(m, opts.policy, q));
          }
        });
    Moments total;
    for (const auto& s : states) total.merge(s);
    return total.estimate();
  }

  const std::vector<IndexProfile> profiles = enumerate_profiles(m, cfg.profile_cap);
  if (use_policy) {
    KahanSum sum;
    for (const auto& q : profiles)
      if (q.weight > 0.0) sum.add(q.weight * detail::policy_revenue(m, opts.policy, q));
    return {sum.value(), 0.0, 0, Method::Exact};
  }

  KahanSum mean;
  KahanSum variance;
  std::uint64_t used = 0;
  for (std::size_t j = 0; j < profiles.size(); ++j) {
    const IndexProfile& q = profiles[j];
    if (q.weight <= 0.0) continue;
    EstimatorConfig sub = cfg;
    sub.seed = derive_seed(cfg.seed, j);
    sub.n_samples = std::max<std::uint64_t>(
        cfg.min_profile_samples, static_cast<std::uint64_t>(std::llround(q.weight * static_cast<double>(cfg.n_samples))));
    const MarketModel fixed = m.conditioned_on(q.components);
    const RevenueEstimate e = estimate_mc(fixed, mechanism::DiscriminatingMyerson{}, {}, sub);
    mean.add(q.weight * e.mean);
    variance.add(q.weight * q.weight * e.std_err * e.std_err);
    used += e.n_samples;
  }
  return {mean.value(), std::sqrt(std::max(0.0, variance.value())), used, Method::MonteCarlo};
}

// ---------------------------------------------------------------------------

struct Ratio {
  double value = 0.0;
  double std_err = 0.0;
};

/// opt / simple with first-order (delta-method) error propagation.
inline Ratio approximation_ratio(const RevenueEstimate& opt, const RevenueEstimate& simple) {
  require(simple.mean > 0.0, ErrorCode::ZeroDenominator, "simple mechanism has zero revenue");
  const double r = opt.mean / simple.mean;
  const double rel_opt = opt.mean != 0.0 ? opt.std_err / opt.mean : 0.0;
  const double rel_simple = simple.std_err / simple.mean;
  return {r, std::abs(r) * std::sqrt(rel_opt * rel_opt + rel_simple * rel_simple)};
}

/// Combined standard error of a difference of independent estimates a - c*b.
inline double combined_se(const RevenueEstimate& a, const RevenueEstimate& b, double c = 1.0) {
  return std::sqrt(a.std_err * a.std_err + c * c * b.std_err * b.std_err);
}

// ---------------------------------------------------------------------------
// Commensurateness of M' (run with extras) to M (run on the originals).

inline constexpr std::uint64_t kMinDivergenceSamples = 100;

struct CommensuratenessReport {
  std::uint64_t samples = 0;
  std::uint64_t divergences = 0;
  /// E[phi_{W'}(v_{W'}) | W' != W]; undefined when there are no divergences.
  RevenueEstimate winner_virtual_value;
  /// E[phi_W(v_W) | W' != W] and E[p_{W'} | W' != W], for reference.
  RevenueEstimate loser_virtual_value;
  RevenueEstimate divergent_price;
  /// Divergence samples on which p_{W'} >= phi_W(v_W).
  std::uint64_t price_passes = 0;

  bool no_divergence() const { return divergences == 0; }
  bool virtual_condition_holds() const {
    return no_divergence() || winner_virtual_value.mean >= -4.0 * winner_virtual_value.std_err;
  }
  bool price_condition_holds() const { return price_passes == divergences; }
  double price_pass_rate() const {
    return divergences == 0 ? 1.0 : static_cast<double>(price_passes) / static_cast<double>(divergences);
  }
};

inline constexpr double kPointwiseSlack = 1e-9;

/// Both mechanisms see the same value draws (common random numbers). M runs on
/// the original bidders only; M' also sees the extras. When M does not sell,
/// its winner's virtual value counts as 0.
inline CommensuratenessReport commensurateness_check(const MarketModel& m, const MechanismSpec& mech,
                                                     const MechanismSpec& mech_prime,
                                                     std::span<const ExtraBidder> extras,
                                                     const EstimatorConfig& cfg) {
  cfg.validate();
  check_extras(m, extras);
  for (const auto& d : m.components())
    require(!d.is_atomic(), ErrorCode::AtomicDistribution, "commensurateness needs continuous components");
  for (const auto& e : extras)
    require(e.component.has_value(), ErrorCode::InvalidParameter, "commensurateness needs drawn extras");

  struct State {
    Moments winner_phi;
    Moments loser_phi;
    Moments price;
    std::uint64_t passes = 0;
  };
  auto states = run_streams<State>(
      cfg.seed, cfg.n_samples, cfg.n_streams, [&](Stream& stream, State& st, std::uint64_t first, std::uint64_t count) {
        ValuationProfile full;
        ValuationProfile originals;
        const MechanismContext ctx{&m.components(), &stream};
        for (std::uint64_t j = 0; j < count; ++j) {
          try {
            draw_profile(m, extras, stream, full);
            originals.values.assign(full.values.begin(), full.values.begin() + static_cast<std::ptrdiff_t>(m.n()));
            originals.origins.assign(full.origins.begin(), full.origins.begin() + static_cast<std::ptrdiff_t>(m.n()));
            const AuctionOutcome w = run_mechanism(mech, originals, ctx);
            const AuctionOutcome w_prime = run_mechanism(mech_prime, full, ctx);
            if (w.winner == w_prime.winner) continue;
            const double phi_w = w.winner ? component_virtual_value(m, full, *w.winner) : 0.0;
            const double phi_w_prime = w_prime.winner ? component_virtual_value(m, full, *w_prime.winner) : 0.0;
            const double price = w_prime.revenue;
            st.winner_phi.add(phi_w_prime);
            st.loser_phi.add(phi_w);
            st.price.add(price);
            if (price >= phi_w - kPointwiseSlack * std::max(1.0, std::abs(phi_w))) ++st.passes;
          } catch (const Error& e) {
            throw Error(e.code(), detail::with_sample_index(first + j, e));
          }
        }
      });
  State total;
  for (const auto& s : states) {
    total.winner_phi.merge(s.winner_phi);
    total.loser_phi.merge(s.loser_phi);
    total.price.merge(s.price);
    total.passes += s.passes;
  }
  CommensuratenessReport rep;
  rep.samples = cfg.n_samples;
  rep.divergences = total.winner_phi.count();
  rep.winner_virtual_value = total.winner_phi.estimate();
  rep.loser_virtual_value = total.loser_phi.estimate();
  rep.divergent_price = total.price.estimate();
  rep.price_passes = total.passes;
  require(rep.divergences == 0 || rep.divergences >= kMinDivergenceSamples,
          ErrorCode::InsufficientDivergenceSamples,
          "only " + std::to_string(rep.divergences) + " samples with W' != W; need " +
              std::to_string(kMinDivergenceSamples));
  return rep;
}

}  // namespace auction_lab
