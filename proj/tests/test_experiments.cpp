#include <catch_amalgamated.hpp>

#include <cmath>
#include <string>

#include "auction_lab/experiments.hpp"
#include "auction_lab/report.hpp"

using namespace auction_lab;
using Catch::Approx;

namespace {

const ReportRow& row_named(const ExperimentReport& rep, const std::string& name) {
  for (const auto& r : rep.rows)
    if (r.mechanism == name) return r;
  FAIL("no row " << name);
  return rep.rows.front();
}

ExperimentOptions small_options(std::uint64_t seed) {
  ExperimentOptions o;
  o.seed = seed;
  o.n_samples = 20'000;
  o.n_streams = 4;
  o.sweep_markets = 3;
  o.hr_sweep_markets = 2;
  return o;
}

}  // namespace

TEST_CASE("appendix lower bound", "[experiments]") {
  ExperimentOptions o;
  o.seed = 1;
  const ExperimentReport rep = run_experiment("appendix-lb", o);
  REQUIRE(rep.rows.size() == 4);
  CHECK(rep.all_pass());
  CHECK(row_named(rep, "vickrey+2extras|both-F2").mean == Approx(0.125 + std::log(8.0)).margin(1e-3));
  CHECK(row_named(rep, "vickrey+2extras").mean == Approx(0.25 + 0.25 * (0.125 + std::log(8.0)) + 0.75).margin(1e-3));
  // each bidder: ER alone earns 2H/(H+1) posted at H; with coins the seller
  // faces two ER bidders w.p. 1/4, one w.p. 1/2, none w.p. 1/4 (revenue 1)
  const double bench = row_named(rep, "discriminating-benchmark(H=" + format_number(1e6) + ")").mean;
  CHECK(bench > 1.74);
  CHECK(bench <= 1.7501);
  CHECK(row_named(rep, "ratio:benchmark/vickrey+2extras").mean == Approx(bench / 1.5511).epsilon(2e-3));
}

TEST_CASE("duplicated instance", "[experiments]") {
  const ExperimentReport rep = run_experiment("hr09-lb", ExperimentOptions{});
  CHECK(rep.all_pass());
  CHECK(row_named(rep, "vickrey-duplicated").mean == Approx(1.5).margin(1e-3));
  CHECK(row_named(rep, "optimal(H=" + format_number(1e6) + ")").mean == Approx(2e6 / (1e6 + 1)).epsilon(1e-9));
}

TEST_CASE("targeted versus non-targeted", "[experiments]") {
  ExperimentOptions o;
  const ExperimentReport rep = run_experiment("tvsnt", o);
  CHECK(rep.all_pass());
  const double opt = row_named(rep, "optimal").mean;
  CHECK(opt == Approx(100.0 * (1.0 - std::pow(0.99, 10))).epsilon(1e-9));
  // two deterministic extras: second price is 100 once any original is high, else 1
  const double any_high = 1.0 - std::pow(0.99, 10);
  CHECK(row_named(rep, "vickrey+targeted(1,n^2)").mean == Approx(100.0 * any_high + (1.0 - any_high)).epsilon(1e-9));
  // 20 iid bidders: the second price is 100 only with two highs
  const double q = std::pow(0.99, 20), one_high = 20 * 0.01 * std::pow(0.99, 19);
  CHECK(row_named(rep, "vickrey+nontargeted(n)").mean == Approx(100.0 * (1 - q - one_high) + q + one_high).epsilon(1e-9));
  CHECK(row_named(rep, "vickrey+nontargeted(n)").mean < 0.35 * opt);

  o.tvsnt_n = 1;
  CHECK_THROWS_AS(run_experiment("tvsnt", o), Error);
}

TEST_CASE("unknown experiment", "[experiments]") {
  try {
    (void)run_experiment("nope", ExperimentOptions{});
    FAIL("expected UnknownExperiment");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::UnknownExperiment);
  }
}

TEST_CASE("sweep markets stay inside their families", "[experiments]") {
  for (std::size_t j = 0; j < 30; ++j) {
    const MarketModel m = sweep_market(9, j);
    CHECK(m.n() >= 2);
    CHECK(m.n() <= 4);
    CHECK(m.k() >= 1);
    CHECK(m.k() <= 3);
    for (std::size_t t = 0; t < m.k(); ++t) CHECK(regularity_check(m.component(t)));
    const MarketModel h = hr_sweep_market(9, j);
    CHECK(find_hr_dominant(h).dominant);
  }
  CHECK(market_label(sweep_market(9, 0)) == market_label(sweep_market(9, 0)));
}

TEST_CASE("sweeps are reproducible and row-shaped", "[experiments]") {
  for (const std::string name : {"thm1-sweep", "reserve-4k-sweep", "hr-lemma-sweep"}) {
    INFO(name);
    const ExperimentReport a = run_experiment(name, small_options(3));
    const ExperimentReport b = run_experiment(name, small_options(3));
    CHECK(emit_report(a, ReportFormat::Csv) == emit_report(b, ReportFormat::Csv));
    const std::size_t per_market = name == "hr-lemma-sweep" ? 5 : 3;
    const std::size_t markets = name == "hr-lemma-sweep" ? 2 : 3;
    CHECK(a.rows.size() == per_market * markets);
    CHECK(a.notes.size() == markets);
    const ExperimentReport c = run_experiment(name, small_options(4));
    CHECK(emit_report(a, ReportFormat::Csv) != emit_report(c, ReportFormat::Csv));
  }
}

TEST_CASE("sweep bounds hold at small sample sizes", "[experiments]") {
  for (const std::string name : {"thm1-sweep", "reserve-4k-sweep"}) {
    const ExperimentReport rep = run_experiment(name, small_options(11));
    for (const auto& r : rep.rows)
      if (!r.verdict.empty()) CHECK(r.verdict == "pass");
  }
}
