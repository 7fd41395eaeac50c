#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "auction_lab/distribution.hpp"
#include "auction_lab/error.hpp"
#include "auction_lab/experiments.hpp"
#include "auction_lab/planner.hpp"
#include "auction_lab/report.hpp"
#include "auction_lab/revenue.hpp"
#include "auction_lab/scenario.hpp"

namespace auction_lab {

inline constexpr int kExitPass = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitVerdictFailed = 2;

struct CliFlags {
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> samples;
  std::optional<std::uint32_t> streams;
  std::optional<double> horizon;
  std::optional<std::string> out;
  std::optional<std::string> format;
};

namespace detail {

struct LoadedScenario {
  ScenarioConfig config;
  EstimatorConfig estimator;
};

inline LoadedScenario load_scenario(const std::string& path, const CliFlags& flags) {
  LoadedScenario s{parse_scenario(read_text(path)), {}};
  s.estimator = s.config.estimator;
  s.estimator.seed = resolve_seed(flags.seed, s.config.seed);
  if (flags.samples) s.estimator.n_samples = *flags.samples;
  if (flags.streams) s.estimator.n_streams = *flags.streams;
  s.estimator.validate();
  return s;
}

inline std::string plan_label(const AugmentationPlan& p, const MarketModel& m) {
  std::string s(to_string(p.strategy));
  if (!p.extras.empty()) {
    s += "(extras:";
    for (std::size_t e = 0; e < p.extras.size(); ++e) s += (e ? " " : "") + m.component(*p.extras[e].component).describe();
    s += ")";
  }
  if (p.mixture_extras) s += "(mixture extras:" + std::to_string(p.mixture_extras) + ")";
  if (p.reserve) s += "(reserve:" + format_number(*p.reserve) + ")";
  if (p.strategy == Strategy::RandomSubsetReserve) s += "(subset:" + std::to_string(p.subset_size) + ")";
  return s;
}

inline nlohmann::ordered_json plan_to_json(const AugmentationPlan& p, const MarketModel& m, const std::string& id) {
  nlohmann::ordered_json j;
  j["scenario_id"] = id;
  j["strategy"] = std::string(to_string(p.strategy));
  nlohmann::ordered_json extras = nlohmann::ordered_json::array();
  for (const auto& e : p.extras)
    extras.push_back({{"component", *e.component}, {"law", m.component(*e.component).describe()}});
  j["extras"] = extras;
  j["mixture_extras"] = p.mixture_extras;
  if (p.reserve) j["reserve"] = *p.reserve;
  if (p.reserve_component) j["reserve_component"] = *p.reserve_component;
  if (p.strategy == Strategy::RandomSubsetReserve) j["subset_size"] = p.subset_size;
  if (p.min_group_size) j["min_group_size"] = p.min_group_size;
  j["factor"] = p.factor;
  nlohmann::ordered_json as = nlohmann::ordered_json::array();
  for (const auto& a : p.assumptions) as.push_back({{"name", a.name}, {"verified", a.verified}, {"detail", a.detail}});
  j["assumptions"] = as;
  j["warnings"] = p.warnings;
  nlohmann::ordered_json ev = nlohmann::ordered_json::array();
  for (const auto& [label, e] : p.evidence)
    ev.push_back({{"label", label},
                  {"mean", e.mean},
                  {"std_err", e.std_err},
                  {"n_samples", e.n_samples},
                  {"method", std::string(to_string(e.method))}});
  j["evidence"] = ev;
  return j;
}

/// Every plan whose recipe applies to the market; recipes that do not apply
/// are reported as notes.
inline std::vector<AugmentationPlan> applicable_plans(const MarketModel& m, const EstimatorConfig& cfg,
                                                      std::vector<std::string>& notes) {
  std::vector<AugmentationPlan> plans;
  auto attempt = [&](const char* what, auto&& make) {
    try {
      make();
    } catch (const Error& e) {
      notes.push_back(std::string(what) + " not applicable: " + e.what());
    }
  };
  attempt("TargetedPerComponent", [&] { plans.push_back(plan_targeted(m)); });
  attempt("SingleHRDominant", [&] { plans.push_back(plan_hr_dominant(m)); });
  if (m.is_iid()) {
    attempt("NonTargetedCount", [&] { plans.push_back(plan_nontargeted(m)); });
    attempt("NonTargetedHRCount", [&] { plans.push_back(plan_nontargeted_hr(m)); });
  }
  attempt("AnonymousReserve", [&] {
    EstimatorConfig sel = cfg;
    sel.seed = derive_seed(cfg.seed, 11);
    plans.push_back(select_anonymous_reserve(m, sel));
  });
  const std::vector<std::size_t> sizes = default_group_sizes(m);
  const std::size_t t = *std::min_element(sizes.begin(), sizes.end());
  std::vector<Strategy> wanted{Strategy::SampleReserve};
  if (m.is_iid()) wanted.push_back(Strategy::RandomSubsetReserve);
  if (t >= 2) wanted.push_back(Strategy::NoReserve);
  attempt("sample-based", [&] {
    for (auto& p : sample_based_plans(m, {}, wanted)) plans.push_back(std::move(p));
  });
  return plans;
}

inline int finish(const ExperimentReport& rep, const CliFlags& flags, const std::optional<std::string>& default_path,
                  const std::string& default_format, std::ostream& out, std::ostream& err) {
  const std::string fmt = flags.format.value_or(default_format);
  const std::string bytes = emit_report(rep, parse_format(fmt));
  const std::optional<std::string> path = flags.out ? flags.out : default_path;
  if (path) write_text(*path, bytes);
  else out << bytes;
  for (const auto& n : rep.notes) err << "note: " << n << '\n';
  err << "runtime: " << format_number(rep.runtime_seconds) << " s\n";
  return rep.all_pass() ? kExitPass : kExitVerdictFailed;
}

inline double elapsed_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

inline int cmd_simulate(const std::string& path, const CliFlags& flags, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  const LoadedScenario s = load_scenario(path, flags);
  const MechanismSpec mech = build_mechanism(s.config.mechanism, s.config.market, s.config.extras);
  ExperimentReport rep;
  rep.scenario_id = s.config.id;
  rep.add_estimate(mechanism_name(mech), estimate_mc(s.config.market, mech, s.config.extras, s.estimator));
  for (const auto& w : s.config.market.warnings()) rep.notes.push_back(w);
  rep.runtime_seconds = elapsed_since(start);
  return finish(rep, flags, s.config.outputs.path, s.config.outputs.format, out, err);
}

/// True when the extras include a fresh draw from every component.
inline bool covers_components(const MarketModel& m, const std::vector<ExtraBidder>& extras) {
  std::vector<bool> seen(m.k(), false);
  for (const auto& e : extras)
    if (e.component) seen[*e.component] = true;
  return std::all_of(seen.begin(), seen.end(), [](bool b) { return b; });
}

inline int cmd_ratio(const std::string& path, const CliFlags& flags, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  const LoadedScenario s = load_scenario(path, flags);
  const MarketModel& m = s.config.market;
  const MechanismSpec mech = build_mechanism(s.config.mechanism, m, s.config.extras);
  ExperimentReport rep;
  rep.scenario_id = s.config.id;

  EstimatorConfig bench_cfg = s.estimator;
  bench_cfg.seed = derive_seed(s.estimator.seed, 1);
  BenchmarkOptions bo;
  if (!m.all_components_regular()) bo.policy = horizon_policy(m, flags.horizon.value_or(1e6));
  const RevenueEstimate bench = discriminating_benchmark(m, bench_cfg, bo);
  const RevenueEstimate simple = estimate_mc(m, mech, s.config.extras, s.estimator);
  rep.add_estimate("discriminating-benchmark", bench);
  rep.add_estimate(mechanism_name(mech), simple);
  const Ratio r = approximation_ratio(bench, simple);

  const bool vickrey = std::holds_alternative<mechanism::SecondPrice>(mech);
  std::optional<double> factor;
  if (vickrey && m.all_components_regular()) {
    if (covers_components(m, s.config.extras)) factor = 2.0;
    else if (const DominanceSearch d = find_hr_dominant(m); d.dominant)
      for (const auto& e : s.config.extras)
        if (e.component == d.dominant) factor = 2.0;
  }
  if (factor) {
    const bool pass = bench.mean <= *factor * simple.mean + 4.0 * combined_se(bench, simple, *factor);
    rep.add_check("ratio", r.value, r.std_err, bench.n_samples + simple.n_samples, "ratio",
                  "ratio <= " + format_number(*factor) + " (+4se)", pass);
  } else {
    rep.rows.push_back({rep.scenario_id, "ratio", r.value, r.std_err, bench.n_samples + simple.n_samples, "ratio", "", ""});
    rep.notes.push_back("no guarantee applies to this mechanism and extras; ratio reported without a verdict");
  }
  rep.runtime_seconds = elapsed_since(start);
  return finish(rep, flags, s.config.outputs.path, s.config.outputs.format, out, err);
}

inline int cmd_plan(const std::string& path, const CliFlags& flags, std::ostream& out, std::ostream& err) {
  const auto start = std::chrono::steady_clock::now();
  const LoadedScenario s = load_scenario(path, flags);
  const MarketModel& m = s.config.market;
  ExperimentReport rep;
  rep.scenario_id = s.config.id;
  std::vector<AugmentationPlan> plans = applicable_plans(m, s.estimator, rep.notes);

  std::optional<RevenueEstimate> bench;
  if (m.all_components_regular()) {
    EstimatorConfig bc = s.estimator;
    bc.seed = derive_seed(s.estimator.seed, 1);
    bench = discriminating_benchmark(m, bc);
    rep.add_estimate("discriminating-benchmark", *bench);
  }
  for (std::size_t j = 0; j < plans.size(); ++j) {
    AugmentationPlan& p = plans[j];
    EstimatorConfig pc = s.estimator;
    pc.seed = derive_seed(s.estimator.seed, 20 + j);
    const RevenueEstimate e = evaluate_plan(m, p, pc);
    p.evidence.emplace_back("plan revenue", e);
    const std::string label = plan_label(p, m);
    if (bench && p.assumptions_verified()) {
      const bool pass = bench->mean <= p.factor * e.mean + 4.0 * combined_se(*bench, e, p.factor);
      rep.add_check(label, e.mean, e.std_err, e.n_samples, std::string(to_string(e.method)),
                    "benchmark <= " + format_number(p.factor) + "*revenue + 4se", pass);
    } else {
      rep.add_estimate(label, e);
    }
    for (const auto& w : p.warnings) rep.notes.push_back(label + ": " + w);
  }
  rep.runtime_seconds = elapsed_since(start);

  const std::string fmt = flags.format.value_or(s.config.outputs.format);
  if (fmt == "json-lines") {
    std::string bytes;
    for (const auto& p : plans) bytes += plan_to_json(p, m, rep.scenario_id).dump() + '\n';
    for (const auto& row : rep.rows)
      if (!row.verdict.empty() || row.mechanism == "discriminating-benchmark") bytes += row_to_json(row).dump() + '\n';
    const std::optional<std::string> target = flags.out ? flags.out : s.config.outputs.path;
    if (target) write_text(*target, bytes);
    else out << bytes;
    for (const auto& n : rep.notes) err << "note: " << n << '\n';
    err << "runtime: " << format_number(rep.runtime_seconds) << " s\n";
    return rep.all_pass() ? kExitPass : kExitVerdictFailed;
  }
  return finish(rep, flags, s.config.outputs.path, s.config.outputs.format, out, err);
}

inline int cmd_check_hr(const std::string& path, const CliFlags& flags, std::ostream& out, std::ostream& err) {
  const ScenarioConfig cfg = parse_scenario(read_text(path));
  const MarketModel& m = cfg.market;
  std::string text;
  for (std::size_t t = 0; t < m.k(); ++t)
    text += "component " + std::to_string(t) + " " + m.component(t).describe() +
            (m.component_regular(t) ? " regular\n" : " not regular\n");
  for (std::size_t a = 0; a < m.k(); ++a)
    for (std::size_t b = 0; b < m.k(); ++b) {
      if (a == b) continue;
      text += std::to_string(a) + " hr-dominates " + std::to_string(b) + ": ";
      try {
        const HazardComparison c = compare_hazards(m.component(a), m.component(b));
        text += c.dominates ? "yes" : "no";
        if (c.crossing) text += " (hazards cross near x=" + format_number(*c.crossing) + ")";
        else if (c.first_violation) text += " (first violation at x=" + format_number(*c.first_violation) + ")";
      } catch (const Error& e) {
        text += std::string("n/a (") + e.what() + ")";
      }
      text += '\n';
    }
  const DominanceSearch d = find_hr_dominant(m);
  text += d.dominant ? "dominant component: " + std::to_string(*d.dominant) + "\n" : "dominant component: none\n";
  if (flags.out) write_text(*flags.out, text);
  else out << text;
  (void)err;
  return kExitPass;
}

}  // namespace detail

/// Entry point shared by the executable and the tests. `args` excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Auction revenue lab: bidder augmentation, reserves, and benchmarks"};
  app.require_subcommand(1);
  CliFlags flags;
  std::uint64_t seed = 0, samples = 0;
  std::uint32_t streams = 0;
  double horizon = 0;
  std::string out_path, format;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", seed, "RNG seed (overrides the scenario and AUCTION_LAB_SEED)");
    sub->add_option("--samples", samples, "Monte Carlo samples")->check(CLI::PositiveNumber);
    sub->add_option("--streams", streams, "independent RNG streams")->check(CLI::Range(1u, 4096u));
    sub->add_option("--horizon", horizon, "posted price standing in for infinity (equal-revenue bidders)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--out", out_path, "write the report here instead of stdout");
    sub->add_option("--format", format, "csv | json-lines | text-table")
        ->check(CLI::IsMember({"csv", "json-lines", "text-table"}));
  };
  std::string target;
  CLI::App* simulate = app.add_subcommand("simulate", "estimate the scenario mechanism's revenue");
  CLI::App* plan = app.add_subcommand("plan", "recommend extra bidders or a reserve");
  CLI::App* check_hr = app.add_subcommand("check-hr", "regularity and pairwise hazard-rate dominance");
  CLI::App* ratio = app.add_subcommand("ratio", "benchmark over mechanism revenue");
  CLI::App* reproduce = app.add_subcommand("reproduce", "run a built-in experiment");
  for (CLI::App* sub : {simulate, plan, check_hr, ratio})
    sub->add_option("scenario", target, "scenario JSON file")->required();
  reproduce->add_option("name", target, "experiment name")->required();
  for (CLI::App* sub : {simulate, plan, check_hr, ratio, reproduce}) add_common(sub);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitPass : kExitError;
  }
  auto given = [](CLI::App* sub, const char* name) { return sub->count(name) > 0; };
  CLI::App* active = app.get_subcommands().front();
  if (given(active, "--seed")) flags.seed = seed;
  if (given(active, "--samples")) flags.samples = samples;
  if (given(active, "--streams")) flags.streams = streams;
  if (given(active, "--horizon")) flags.horizon = horizon;
  if (given(active, "--out")) flags.out = out_path;
  if (given(active, "--format")) flags.format = format;

  try {
    if (active == simulate) return detail::cmd_simulate(target, flags, out, err);
    if (active == plan) return detail::cmd_plan(target, flags, out, err);
    if (active == check_hr) return detail::cmd_check_hr(target, flags, out, err);
    if (active == ratio) return detail::cmd_ratio(target, flags, out, err);
    ExperimentOptions opt;
    opt.seed = resolve_seed(flags.seed, std::nullopt);
    if (flags.samples) opt.n_samples = *flags.samples;
    if (flags.streams) opt.n_streams = *flags.streams;
    if (flags.horizon) opt.horizon = *flags.horizon;
    const ExperimentReport rep = run_experiment(target, opt);
    return detail::finish(rep, flags, std::nullopt, "csv", out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
}

}  // namespace auction_lab
