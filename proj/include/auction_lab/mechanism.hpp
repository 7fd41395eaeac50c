#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "auction_lab/distribution.hpp"
#include "auction_lab/error.hpp"
#include "auction_lab/mixture.hpp"
#include "auction_lab/rng.hpp"

namespace auction_lab {

/// Where a participant came from. Extras drawn fresh from a component carry the
/// component index; deterministic extras carry only their value.
struct Origin {
  enum class Kind { Original, Extra, DeterministicExtra };
  Kind kind = Kind::Original;
  /// Component the value was drawn from, or -1 when unknown / deterministic.
  int component = -1;
};

struct ValuationProfile {
  std::vector<double> values;
  std::vector<Origin> origins;

  std::size_t size() const { return values.size(); }
};

struct AuctionOutcome {
  std::optional<std::size_t> winner;
  std::vector<double> payments;
  double revenue = 0.0;
};

inline AuctionOutcome no_sale(std::size_t n) { return {std::nullopt, std::vector<double>(n, 0.0), 0.0}; }

inline AuctionOutcome sale(std::size_t n, std::size_t winner, double price) {
  AuctionOutcome out{winner, std::vector<double>(n, 0.0), price};
  out.payments[winner] = price;
  return out;
}

/// Vickrey auction with an optional anonymous reserve or per-bidder reserves.
/// A bidder qualifies when value >= reserve; ties go to the lowest index.
inline AuctionOutcome run_second_price(std::span<const double> values,
                                       std::optional<double> anonymous_reserve = std::nullopt,
                                       std::span<const double> bidder_reserves = {}) {
  require(!values.empty(), ErrorCode::InvalidParameter, "profile is empty");
  require(!(anonymous_reserve && !bidder_reserves.empty()), ErrorCode::InvalidParameter,
          "at most one reserve mode may be set");
  require(bidder_reserves.empty() || bidder_reserves.size() == values.size(),
          ErrorCode::InvalidParameter, "one reserve per bidder is required");
  if (anonymous_reserve) require(*anonymous_reserve >= 0.0, ErrorCode::NegativeReserve, "reserve < 0");
  for (double r : bidder_reserves) require(r >= 0.0, ErrorCode::NegativeReserve, "reserve < 0");

  auto reserve_of = [&](std::size_t i) {
    if (anonymous_reserve) return *anonymous_reserve;
    return bidder_reserves.empty() ? 0.0 : bidder_reserves[i];
  };

  std::optional<std::size_t> winner;
  double runner_up = -kInfinity;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < reserve_of(i)) continue;
    if (!winner || values[i] > values[*winner]) {
      if (winner) runner_up = std::max(runner_up, values[*winner]);
      winner = i;
    } else {
      runner_up = std::max(runner_up, values[i]);
    }
  }
  if (!winner) return no_sale(values.size());
  return sale(values.size(), *winner, std::max(runner_up, reserve_of(*winner)));
}

/// Infimum of the winning bids in [lo, hi], by bisection on a monotone
/// allocation rule. `wins(hi)` must hold.
inline double critical_payment(double lo, double hi, const std::function<bool(double)>& wins) {
  require(hi >= lo, ErrorCode::InvalidParameter, "empty bisection bracket");
  require(wins(hi), ErrorCode::NonMonotoneAllocation, "bidder does not win at its own bid");
  // Probe a few ascending bids: a win followed by a loss is a monotonicity breach.
  bool won_before = false;
  for (int j = 0; j <= 8; ++j) {
    const bool w = wins(lo + (hi - lo) * j / 8.0);
    if (won_before && !w)
      throw Error(ErrorCode::NonMonotoneAllocation, "allocation rule is not monotone in the bid");
    won_before = won_before || w;
  }
  if (wins(lo)) return lo;
  for (int i = 0; i < 200 && hi - lo > 1e-10 * std::max(1.0, std::abs(hi)); ++i) {
    const double mid = 0.5 * (lo + hi);
    if (wins(mid)) hi = mid;
    else lo = mid;
  }
  return hi;
}

/// Myerson allocation on (possibly ironed) virtual values: the highest
/// nonnegative virtual value wins, lowest index on ties; the winner pays its
/// critical bid. `phi(i, v)` evaluates bidder i's virtual value at v and
/// `floor_of(i)` is the bottom of bidder i's support.
template <class Phi, class Floor>
AuctionOutcome run_myerson_with(std::span<const double> values, Phi&& phi, Floor&& floor_of) {
  const std::size_t n = values.size();
  require(n > 0, ErrorCode::InvalidParameter, "profile is empty");
  std::vector<double> virtual_values(n);
  std::optional<std::size_t> winner;
  for (std::size_t i = 0; i < n; ++i) {
    virtual_values[i] = phi(i, values[i]);
    if (virtual_values[i] < 0.0) continue;
    if (!winner || virtual_values[i] > virtual_values[*winner]) winner = i;
  }
  if (!winner) return no_sale(n);
  const std::size_t w = *winner;
  double beat_strictly = 0.0;  // bidders before w win ties
  double beat_weakly = 0.0;
  bool has_strict = false;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == w) continue;
    if (j < w) {
      beat_strictly = has_strict ? std::max(beat_strictly, virtual_values[j]) : virtual_values[j];
      has_strict = true;
    } else {
      beat_weakly = std::max(beat_weakly, virtual_values[j]);
    }
  }
  auto wins = [&](double bid) {
    const double v = phi(w, bid);
    if (v < 0.0 || v < beat_weakly) return false;
    return !has_strict || v > beat_strictly;
  };
  const double price = critical_payment(floor_of(w), values[w], wins);
  return sale(n, w, price);
}

inline void check_in_support(double v, SupportInterval s, std::size_t i) {
  require(s.contains(v), ErrorCode::ValueOutsideSupport,
          "value of bidder " + std::to_string(i) + " lies outside its support");
}

/// Myerson's optimal auction for regular per-bidder distributions.
inline AuctionOutcome run_myerson(std::span<const double> values, std::span<const Distribution> dists) {
  require(values.size() == dists.size(), ErrorCode::InvalidParameter, "one distribution per bidder");
  for (std::size_t i = 0; i < values.size(); ++i) {
    require(!dists[i].is_atomic(), ErrorCode::AtomicDistribution, "Myerson needs densities");
    check_in_support(values[i], dists[i].support(), i);
  }
  return run_myerson_with(
      values, [&](std::size_t i, double v) { return dists[i].virtual_value(v); },
      [&](std::size_t i) { return dists[i].support().lo; });
}

/// Myerson's auction on ironed virtual values (irregular bidders).
inline AuctionOutcome run_myerson(std::span<const double> values, std::span<const IronedCurve> curves) {
  require(values.size() == curves.size(), ErrorCode::InvalidParameter, "one ironed curve per bidder");
  for (std::size_t i = 0; i < values.size(); ++i) check_in_support(values[i], curves[i].support(), i);
  return run_myerson_with(
      values, [&](std::size_t i, double v) { return curves[i].virtual_value(v); },
      [&](std::size_t i) { return curves[i].support().lo; });
}

/// Sequential take-it-or-leave-it offers: the first bidder in `order` whose
/// value meets their price buys at that price.
inline AuctionOutcome run_posted_sequence(std::span<const double> values, std::span<const double> prices,
                                          std::span<const std::size_t> order) {
  require(prices.size() == order.size(), ErrorCode::InvalidParameter, "one price per offer");
  require(order.size() <= values.size(), ErrorCode::IndexOutOfRange, "more offers than bidders");
  for (std::size_t i : order)
    require(i < values.size(), ErrorCode::IndexOutOfRange, "offer to a nonexistent bidder");
  for (std::size_t j = 0; j < order.size(); ++j)
    if (values[order[j]] >= prices[j]) return sale(values.size(), order[j], prices[j]);
  return no_sale(values.size());
}

namespace mechanism {

struct SecondPrice {};
struct SecondPriceAnonymousReserve {
  double reserve;
};
struct SecondPriceBidderReserves {
  std::vector<double> reserves;
};
/// Myerson with one regular distribution per participant.
struct MyersonRegular {
  std::vector<Distribution> dists;
};
/// Myerson with one ironed curve per participant.
struct MyersonIroned {
  std::vector<IronedCurve> curves;
};
/// Myerson run by a seller who observes each participant's mixture coin and
/// uses that component's virtual value (the per-profile optimum).
struct DiscriminatingMyerson {};
struct PostedSequence {
  std::vector<double> prices;
  std::vector<std::size_t> order;
};
/// Vickrey with a random reserve: the maximum of one fresh draw from each listed component.
struct SampleReserve {
  std::vector<std::size_t> components;
};
/// `size` randomly chosen original bidders set the reserve (their maximum value)
/// for a Vickrey auction among everyone else.
struct RandomSubsetReserve {
  std::size_t size;
};

}  // namespace mechanism

using MechanismSpec =
    std::variant<mechanism::SecondPrice, mechanism::SecondPriceAnonymousReserve,
                 mechanism::SecondPriceBidderReserves, mechanism::MyersonRegular, mechanism::MyersonIroned,
                 mechanism::DiscriminatingMyerson, mechanism::PostedSequence, mechanism::SampleReserve,
                 mechanism::RandomSubsetReserve>;

/// Validated constructor: every distribution must pass the regularity certificate.
inline MechanismSpec make_myerson_regular(std::vector<Distribution> dists) {
  for (const auto& d : dists)
    require(!d.is_atomic() && regularity_check(d), ErrorCode::IrregularComponent,
            d.describe() + " is not regular; use ironed Myerson");
  return mechanism::MyersonRegular{std::move(dists)};
}

inline MechanismSpec make_anonymous_reserve(double r) {
  require(r >= 0.0, ErrorCode::NegativeReserve, "reserve < 0");
  return mechanism::SecondPriceAnonymousReserve{r};
}

inline std::string mechanism_name(const MechanismSpec& spec) {
  return std::visit(
      [](const auto& m) -> std::string {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, mechanism::SecondPrice>) return "second_price";
        else if constexpr (std::is_same_v<M, mechanism::SecondPriceAnonymousReserve>)
          return "second_price_reserve(" + std::to_string(m.reserve) + ")";
        else if constexpr (std::is_same_v<M, mechanism::SecondPriceBidderReserves>) return "second_price_bidder_reserves";
        else if constexpr (std::is_same_v<M, mechanism::MyersonRegular>) return "myerson";
        else if constexpr (std::is_same_v<M, mechanism::MyersonIroned>) return "myerson_ironed";
        else if constexpr (std::is_same_v<M, mechanism::DiscriminatingMyerson>) return "discriminating_myerson";
        else if constexpr (std::is_same_v<M, mechanism::PostedSequence>) return "posted_sequence";
        else if constexpr (std::is_same_v<M, mechanism::SampleReserve>) return "sample_reserve";
        else return "random_subset_reserve(" + std::to_string(m.size) + ")";
      },
      spec);
}

/// What a mechanism may consult beyond the bids: the market's components
/// (for coin-aware Myerson and sampled reserves) and a caller-owned stream.
struct MechanismContext {
  const std::vector<Distribution>* components = nullptr;
  Stream* stream = nullptr;
};

inline AuctionOutcome run_mechanism(const MechanismSpec& spec, const ValuationProfile& profile,
                                    const MechanismContext& ctx = {}) {
  const std::span<const double> values = profile.values;
  return std::visit(
      [&](const auto& m) -> AuctionOutcome {
        using M = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<M, mechanism::SecondPrice>) {
          return run_second_price(values);
        } else if constexpr (std::is_same_v<M, mechanism::SecondPriceAnonymousReserve>) {
          return run_second_price(values, m.reserve);
        } else if constexpr (std::is_same_v<M, mechanism::SecondPriceBidderReserves>) {
          return run_second_price(values, std::nullopt, m.reserves);
        } else if constexpr (std::is_same_v<M, mechanism::MyersonRegular>) {
          return run_myerson(values, m.dists);
        } else if constexpr (std::is_same_v<M, mechanism::MyersonIroned>) {
          return run_myerson(values, m.curves);
        } else if constexpr (std::is_same_v<M, mechanism::DiscriminatingMyerson>) {
          require(ctx.components != nullptr, ErrorCode::InvalidParameter,
                  "discriminating Myerson needs the market components");
          const auto& comps = *ctx.components;
          for (std::size_t i = 0; i < profile.size(); ++i)
            require(profile.origins[i].component >= 0, ErrorCode::InvalidParameter,
                    "discriminating Myerson needs every participant's component");
          auto dist_of = [&](std::size_t i) -> const Distribution& {
            return comps[static_cast<std::size_t>(profile.origins[i].component)];
          };
          return run_myerson_with(
              values, [&](std::size_t i, double v) { return dist_of(i).virtual_value(v); },
              [&](std::size_t i) { return dist_of(i).support().lo; });
        } else if constexpr (std::is_same_v<M, mechanism::PostedSequence>) {
          return run_posted_sequence(values, m.prices, m.order);
        } else if constexpr (std::is_same_v<M, mechanism::SampleReserve>) {
          require(ctx.components != nullptr && ctx.stream != nullptr, ErrorCode::InvalidParameter,
                  "sample reserve needs components and a stream");
          double reserve = 0.0;
          for (std::size_t t : m.components) reserve = std::max(reserve, ctx.components->at(t).sample(*ctx.stream));
          return run_second_price(values, reserve);
        } else {
          require(ctx.stream != nullptr, ErrorCode::InvalidParameter, "random subset reserve needs a stream");
          std::vector<std::size_t> originals;
          for (std::size_t i = 0; i < profile.size(); ++i)
            if (profile.origins[i].kind == Origin::Kind::Original) originals.push_back(i);
          require(m.size < originals.size(), ErrorCode::InvalidParameter,
                  "reserve subset must leave at least one original bidder");
          // partial Fisher-Yates: the first m.size entries form the subset
          for (std::size_t j = 0; j < m.size; ++j) {
            const std::size_t pick = j + static_cast<std::size_t>(ctx.stream->below(originals.size() - j));
            std::swap(originals[j], originals[pick]);
          }
          std::vector<bool> in_subset(profile.size(), false);
          double reserve = 0.0;
          for (std::size_t j = 0; j < m.size; ++j) {
            in_subset[originals[j]] = true;
            reserve = std::max(reserve, values[originals[j]]);
          }
          std::vector<double> rest;
          std::vector<std::size_t> index;
          for (std::size_t i = 0; i < profile.size(); ++i)
            if (!in_subset[i]) {
              rest.push_back(values[i]);
              index.push_back(i);
            }
          const AuctionOutcome inner = run_second_price(rest, reserve);
          if (!inner.winner) return no_sale(profile.size());
          return sale(profile.size(), index[*inner.winner], inner.revenue);
        }
      },
      spec);
}

}  // namespace auction_lab
