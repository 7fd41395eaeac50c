#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "auction_lab/distribution.hpp"
#include "auction_lab/error.hpp"
#include "auction_lab/mechanism.hpp"
#include "auction_lab/mixture.hpp"
#include "auction_lab/revenue.hpp"

namespace auction_lab {

enum class Strategy {
  TargetedPerComponent,
  SingleHRDominant,
  NonTargetedCount,
  NonTargetedHRCount,
  AnonymousReserve,
  SampleReserve,
  RandomSubsetReserve,
  NoReserve,
};

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::TargetedPerComponent: return "TargetedPerComponent";
    case Strategy::SingleHRDominant: return "SingleHRDominant";
    case Strategy::NonTargetedCount: return "NonTargetedCount";
    case Strategy::NonTargetedHRCount: return "NonTargetedHRCount";
    case Strategy::AnonymousReserve: return "AnonymousReserve";
    case Strategy::SampleReserve: return "SampleReserve";
    case Strategy::RandomSubsetReserve: return "RandomSubsetReserve";
    case Strategy::NoReserve: return "NoReserve";
  }
  return "?";
}

/// A named precondition and whether it was checked to hold.
struct Assumption {
  std::string name;
  bool verified = false;
  std::string detail;
};

struct AugmentationPlan {
  Strategy strategy = Strategy::TargetedPerComponent;
  /// Targeted extras (one fresh draw per listed component).
  std::vector<ExtraBidder> extras;
  /// Non-targeted extras drawn from the bidders' own mixture.
  std::uint64_t mixture_extras = 0;
  std::optional<double> reserve;
  std::optional<std::size_t> reserve_component;
  /// Bidders sacrificed to set the reserve (RandomSubsetReserve).
  std::size_t subset_size = 0;
  /// Minimum group size t (sample-based plans).
  std::size_t min_group_size = 0;
  double factor = 1.0;
  std::vector<Assumption> assumptions;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, RevenueEstimate>> evidence;

  bool assumptions_verified() const {
    return std::all_of(assumptions.begin(), assumptions.end(), [](const Assumption& a) { return a.verified; });
  }
};

/// The factor attached to the plan, provided every precondition was verified.
inline double guarantee_factor(const AugmentationPlan& plan) {
  for (const auto& a : plan.assumptions)
    require(a.verified, ErrorCode::AssumptionUnverified,
            std::string(to_string(plan.strategy)) + " relies on unverified assumption '" + a.name + "'");
  return plan.factor;
}

namespace detail {

inline Assumption regularity_assumption(const MarketModel& m) {
  std::string irregular;
  for (std::size_t t = 0; t < m.k(); ++t)
    if (!m.component_regular(t)) irregular += (irregular.empty() ? "" : ", ") + m.component(t).describe();
  return {"components regular", irregular.empty(), irregular.empty() ? "grid certificate" : "irregular: " + irregular};
}

inline Assumption iid_assumption(const MarketModel& m) {
  return {"i.i.d. bidders", m.is_iid(), m.is_iid() ? "all weight rows equal" : "weight rows differ"};
}

/// ceil that ignores representation noise just above an integer.
inline std::uint64_t ceil_count(double x) {
  const double r = std::round(x);
  if (std::abs(x - r) <= 1e-9 * std::max(1.0, std::abs(x))) return static_cast<std::uint64_t>(std::max(0.0, r));
  return static_cast<std::uint64_t>(std::ceil(x));
}

}  // namespace detail

/// One extra bidder from every component; factor 2.
inline AugmentationPlan plan_targeted(const MarketModel& m) {
  const Assumption regular = detail::regularity_assumption(m);
  require(regular.verified, ErrorCode::IrregularComponent, "targeted plan needs regular components: " + regular.detail);
  AugmentationPlan plan;
  plan.strategy = Strategy::TargetedPerComponent;
  for (std::size_t t = 0; t < m.k(); ++t) plan.extras.push_back(ExtraBidder::drawn_from(t));
  plan.factor = 2.0;
  plan.assumptions.push_back(regular);
  return plan;
}

/// Index of a component whose hazard rate is below every other component's,
/// or nullopt with the first crossing (or violation) point found.
struct DominanceSearch {
  std::optional<std::size_t> dominant;
  std::optional<double> witness;
};

inline DominanceSearch find_hr_dominant(const MarketModel& m, std::size_t grid = kDefaultCertificateGrid) {
  DominanceSearch out;
  std::optional<double> violation;
  for (std::size_t t = 0; t < m.k(); ++t) {
    bool all = true;
    for (std::size_t s = 0; s < m.k(); ++s) {
      if (s == t) continue;
      HazardComparison c;
      try {
        c = compare_hazards(m.component(t), m.component(s), grid);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::DisjointSupports) throw;
        all = false;
        continue;
      }
      if (!c.dominates) {
        all = false;
        if (!out.witness && c.crossing) out.witness = c.crossing;
        if (!violation && c.first_violation) violation = c.first_violation;
      }
    }
    if (all) {
      out.dominant = t;
      out.witness.reset();
      return out;
    }
  }
  if (!out.witness) out.witness = violation;
  return out;
}

/// A single extra from the component that hazard-rate dominates all others; factor 2.
inline AugmentationPlan plan_hr_dominant(const MarketModel& m, std::size_t grid = kDefaultCertificateGrid) {
  const DominanceSearch found = find_hr_dominant(m, grid);
  if (!found.dominant) {
    const double at = found.witness.value_or(std::numeric_limits<double>::quiet_NaN());
    throw NoDominantComponentError("no component hazard-rate dominates all others; hazard rates cross near x=" +
                                       std::to_string(at),
                                   at);
  }
  AugmentationPlan plan;
  plan.strategy = Strategy::SingleHRDominant;
  plan.extras.push_back(ExtraBidder::drawn_from(*found.dominant));
  plan.factor = 2.0;
  plan.assumptions.push_back(detail::regularity_assumption(m));
  plan.assumptions.push_back({"hazard-rate dominant component", true,
                              "component " + std::to_string(*found.dominant) + " " +
                                  m.component(*found.dominant).describe()});
  return plan;
}

struct NonTargetedCounts {
  std::uint64_t general = 0;
  double general_factor = 0.0;
  std::optional<std::uint64_t> hazard;
  std::optional<double> hazard_factor;
  std::vector<std::string> notes;
};

/// Coupon-collector sizing: n* = ceil((ln k + ln(k+1)) / delta) extra draws
/// from the mixture hit every component with probability >= 1 - 1/(k+1).
/// With a hazard-rate dominant component of weight p1, ceil(1/p1) draws.
inline NonTargetedCounts nontargeted_counts(std::size_t k, double delta, std::optional<double> p1 = std::nullopt) {
  require(k >= 1, ErrorCode::InvalidParameter, "k must be at least 1");
  require(std::isfinite(delta) && delta > 0.0 && delta <= 1.0 / static_cast<double>(k) + 1e-12,
          ErrorCode::InvalidDelta, "delta must satisfy 0 < delta <= 1/k");
  const double kd = static_cast<double>(k);
  NonTargetedCounts out;
  out.general = detail::ceil_count((std::log(kd) + std::log(kd + 1.0)) / delta);
  out.general_factor = 2.0 * (kd + 1.0) / kd;
  if (k == 1)
    out.notes.push_back("k=1: the setting is regular, yet the formula still asks for " +
                        std::to_string(out.general) + " extra bidder(s); reported verbatim");
  if (p1) {
    require(std::isfinite(*p1) && *p1 > 0.0 && *p1 <= 1.0, ErrorCode::InvalidParameter, "p1 must lie in (0,1]");
    out.hazard = detail::ceil_count(1.0 / *p1);
    out.hazard_factor = 2.0 * std::exp(1.0) / (std::exp(1.0) - 1.0);
  }
  return out;
}

/// n* extra bidders drawn from the (i.i.d.) mixture itself.
inline AugmentationPlan plan_nontargeted(const MarketModel& m) {
  const NonTargetedCounts c = nontargeted_counts(m.k(), m.delta());
  AugmentationPlan plan;
  plan.strategy = Strategy::NonTargetedCount;
  plan.mixture_extras = c.general;
  plan.factor = c.general_factor;
  plan.assumptions.push_back(detail::regularity_assumption(m));
  plan.assumptions.push_back(detail::iid_assumption(m));
  plan.warnings = c.notes;
  return plan;
}

/// ceil(1/p1) extra mixture draws, p1 the weight of the hazard-rate dominant component.
inline AugmentationPlan plan_nontargeted_hr(const MarketModel& m, std::size_t grid = kDefaultCertificateGrid) {
  const DominanceSearch found = find_hr_dominant(m, grid);
  if (!found.dominant) {
    const double at = found.witness.value_or(std::numeric_limits<double>::quiet_NaN());
    throw NoDominantComponentError("no hazard-rate dominant component near x=" + std::to_string(at), at);
  }
  const double p1 = m.weight(0, *found.dominant);
  require(p1 > 0.0, ErrorCode::InvalidParameter, "the dominant component has zero weight");
  const NonTargetedCounts c = nontargeted_counts(m.k(), m.delta(), p1);
  AugmentationPlan plan;
  plan.strategy = Strategy::NonTargetedHRCount;
  plan.mixture_extras = *c.hazard;
  plan.factor = *c.hazard_factor;
  plan.assumptions.push_back(detail::regularity_assumption(m));
  plan.assumptions.push_back(detail::iid_assumption(m));
  plan.assumptions.push_back({"hazard-rate dominant component", true, m.component(*found.dominant).describe()});
  return plan;
}

/// Vickrey with the best of the k component monopoly reserves (compared by
/// MC on common random numbers); factor 4k.
inline AugmentationPlan select_anonymous_reserve(const MarketModel& m, const EstimatorConfig& cfg) {
  AugmentationPlan plan;
  plan.strategy = Strategy::AnonymousReserve;
  plan.factor = 4.0 * static_cast<double>(m.k());
  std::optional<RevenueEstimate> best;
  for (std::size_t t = 0; t < m.k(); ++t) {
    double r = 0.0;
    try {
      r = monopoly_reserve(m.component(t));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SupremumNotAttained) throw;
      plan.warnings.push_back("component " + std::to_string(t) + " skipped: " + e.what());
      continue;
    }
    const RevenueEstimate e = estimate_mc(m, mechanism::SecondPriceAnonymousReserve{r}, {}, cfg);
    plan.evidence.emplace_back("reserve " + std::to_string(t), e);
    if (!best || e.mean > best->mean) {
      best = e;
      plan.reserve = r;
      plan.reserve_component = t;
    }
  }
  require(best.has_value(), ErrorCode::SupremumNotAttained, "no component has an attained monopoly reserve");
  plan.assumptions.push_back(detail::regularity_assumption(m));
  return plan;
}

/// n_t = floor(n * min_i p_{i,t}): a heuristic stand-in for deterministic group sizes.
inline std::vector<std::size_t> default_group_sizes(const MarketModel& m) {
  std::vector<std::size_t> sizes(m.k());
  for (std::size_t t = 0; t < m.k(); ++t) {
    double lowest = 1.0;
    for (std::size_t i = 0; i < m.n(); ++i) lowest = std::min(lowest, m.weight(i, t));
    sizes[t] = static_cast<std::size_t>(std::floor(static_cast<double>(m.n()) * lowest + 1e-12));
  }
  return sizes;
}

inline AugmentationPlan plan_no_reserve(const MarketModel& m, std::size_t t) {
  require(t >= 2, ErrorCode::GroupTooSmall, "plain Vickrey needs every group to have at least 2 bidders");
  AugmentationPlan plan;
  plan.strategy = Strategy::NoReserve;
  plan.min_group_size = t;
  plan.factor = 2.0 * static_cast<double>(t) / static_cast<double>(t - 1);
  plan.assumptions.push_back(detail::regularity_assumption(m));
  return plan;
}

/// Reserve-from-samples plans. `group_sizes` are the per-component group
/// sizes n_t; when empty they are derived from the weights (flagged).
inline std::vector<AugmentationPlan> sample_based_plans(
    const MarketModel& m, std::vector<std::size_t> group_sizes = {},
    std::vector<Strategy> requested = {Strategy::SampleReserve, Strategy::RandomSubsetReserve, Strategy::NoReserve}) {
  std::string heuristic;
  if (group_sizes.empty()) {
    group_sizes = default_group_sizes(m);
    heuristic = "group sizes derived as floor(n * min_i p_{i,t}); the guarantees assume fixed group sizes";
  }
  require(group_sizes.size() == m.k(), ErrorCode::InvalidParameter, "one group size per component");
  const std::size_t t = *std::min_element(group_sizes.begin(), group_sizes.end());

  std::vector<AugmentationPlan> plans;
  for (Strategy s : requested) {
    AugmentationPlan plan;
    if (s == Strategy::SampleReserve) {
      require(t >= 1, ErrorCode::GroupTooSmall, "sample reserve needs every group to be nonempty");
      plan.strategy = s;
      plan.min_group_size = t;
      plan.factor = 2.0 * static_cast<double>(t + 1) / static_cast<double>(t);
      plan.assumptions.push_back(detail::regularity_assumption(m));
      for (std::size_t c = 0; c < m.k(); ++c) plan.extras.push_back(ExtraBidder::drawn_from(c));
    } else if (s == Strategy::RandomSubsetReserve) {
      plan.strategy = s;
      const NonTargetedCounts c = nontargeted_counts(m.k(), m.delta());
      plan.subset_size = static_cast<std::size_t>(c.general);
      const bool fits = c.general < m.n();
      plan.factor = c.general_factor * static_cast<double>(m.n()) /
                    static_cast<double>(fits ? m.n() - c.general : 1);
      plan.assumptions.push_back(detail::regularity_assumption(m));
      plan.assumptions.push_back(detail::iid_assumption(m));
      plan.assumptions.push_back({"subset smaller than n", fits,
                                  "subset " + std::to_string(c.general) + " of " + std::to_string(m.n())});
      plan.warnings = c.notes;
    } else if (s == Strategy::NoReserve) {
      plan = plan_no_reserve(m, t);
    } else {
      throw Error(ErrorCode::InvalidParameter, std::string(to_string(s)) + " is not a sample-based strategy");
    }
    if (!heuristic.empty()) plan.warnings.push_back(heuristic);
    plans.push_back(std::move(plan));
  }
  return plans;
}

/// What to simulate to measure a plan: the (possibly enlarged) market, the
/// mechanism, and the targeted extras.
struct PlanRun {
  MarketModel market;
  MechanismSpec mechanism;
  std::vector<ExtraBidder> extras;
};

inline PlanRun plan_run(const MarketModel& m, const AugmentationPlan& plan) {
  switch (plan.strategy) {
    case Strategy::TargetedPerComponent:
    case Strategy::SingleHRDominant:
      return {m, mechanism::SecondPrice{}, plan.extras};
    case Strategy::NonTargetedCount:
    case Strategy::NonTargetedHRCount: {
      require(m.is_iid(), ErrorCode::AssumptionUnverified, "mixture extras need i.i.d. bidders");
      std::vector<std::vector<double>> rows = m.weights();
      rows.insert(rows.end(), plan.mixture_extras, m.weights().front());
      return {build_market(m.components(), std::move(rows)), mechanism::SecondPrice{}, {}};
    }
    case Strategy::AnonymousReserve:
      require(plan.reserve.has_value(), ErrorCode::InvalidParameter, "plan carries no reserve");
      return {m, mechanism::SecondPriceAnonymousReserve{*plan.reserve}, {}};
    case Strategy::SampleReserve: {
      mechanism::SampleReserve sr;
      for (const auto& e : plan.extras) sr.components.push_back(*e.component);
      return {m, sr, {}};
    }
    case Strategy::RandomSubsetReserve:
      return {m, mechanism::RandomSubsetReserve{plan.subset_size}, {}};
    case Strategy::NoReserve:
      return {m, mechanism::SecondPrice{}, {}};
  }
  throw Error(ErrorCode::InvalidParameter, "unknown strategy");
}

inline RevenueEstimate evaluate_plan(const MarketModel& m, const AugmentationPlan& plan, const EstimatorConfig& cfg) {
  const PlanRun run = plan_run(m, plan);
  return estimate_mc(run.market, run.mechanism, run.extras, cfg);
}

}  // namespace auction_lab
