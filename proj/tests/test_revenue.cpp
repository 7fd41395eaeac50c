#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <vector>

#include "auction_lab/revenue.hpp"
#include "support.hpp"

using namespace auction_lab;
using Catch::Approx;
using test_support::gauss_legendre;
using test_support::within_se;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an auction_lab::Error");
  return ErrorCode::InvalidParameter;
}

EstimatorConfig config(std::uint64_t seed, std::uint64_t n) {
  EstimatorConfig c;
  c.seed = seed;
  c.n_samples = n;
  return c;
}

double integrate_2d(const std::function<double(double, double)>& f, double a1, double b1, double a2, double b2,
                    int panels = 400) {
  return gauss_legendre(
      [&](double x) { return gauss_legendre([&](double y) { return f(x, y); }, a2, b2, panels); }, a1, b1, panels);
}

const Distribution er = Distribution::equal_revenue();
const Distribution one = Distribution::point_mass(1);

}  // namespace

TEST_CASE("streams split the sample budget deterministically", "[revenue]") {
  auto sizes = run_streams<std::vector<std::uint64_t>>(
      1, 10, 3, [](Stream&, std::vector<std::uint64_t>& st, std::uint64_t first, std::uint64_t count) {
        st = {first, count};
      });
  REQUIRE(sizes.size() == 3);
  CHECK(sizes[0] == std::vector<std::uint64_t>{0, 4});
  CHECK(sizes[1] == std::vector<std::uint64_t>{4, 3});
  CHECK(sizes[2] == std::vector<std::uint64_t>{7, 3});
}

TEST_CASE("Kahan moments", "[revenue]") {
  Moments a, b, all;
  for (int j = 0; j < 1000; ++j) {
    const double x = std::sin(j) + 1e8;
    (j % 2 ? a : b).add(x);
    all.add(x);
  }
  a.merge(b);
  CHECK(a.count() == 1000);
  CHECK(a.mean() == Approx(all.mean()).epsilon(1e-15));
  CHECK(a.std_err() == Approx(all.std_err()).epsilon(1e-6));
}

TEST_CASE("Monte Carlo revenue examples", "[revenue]") {
  const MarketModel m = build_iid_market({Distribution::uniform(0, 1)}, {1.0}, 2);
  const RevenueEstimate sp = estimate_mc(m, mechanism::SecondPrice{}, {}, config(11, 200'000));
  CHECK(within_se(sp.mean, 1.0 / 3.0, sp.std_err));
  CHECK(sp.n_samples == 200'000);
  CHECK(sp.method == Method::MonteCarlo);

  // oracle: Myerson on two U(0,1) sells at max(0.5, loser) when the winner clears 0.5
  const double myerson_oracle = integrate_2d(
      [](double x, double y) {
        const double hi = std::max(x, y), lo = std::min(x, y);
        return hi < 0.5 ? 0.0 : std::max(0.5, lo);
      },
      0, 1, 0, 1);
  CHECK(myerson_oracle == Approx(5.0 / 12.0).margin(1e-4));
  const RevenueEstimate my = estimate_mc(m, make_myerson_regular({Distribution::uniform(0, 1), Distribution::uniform(0, 1)}),
                                         {}, config(12, 200'000));
  CHECK(within_se(my.mean, 5.0 / 12.0, my.std_err));
}

TEST_CASE("Monte Carlo is reproducible", "[revenue]") {
  const MarketModel m = build_iid_market({Distribution::uniform(0, 1), Distribution::exponential(1)}, {0.3, 0.7}, 3);
  const std::vector<ExtraBidder> extras{ExtraBidder::drawn_from(1), ExtraBidder::fixed(0.2)};
  const EstimatorConfig cfg = config(99, 50'000);
  const RevenueEstimate a = estimate_mc(m, mechanism::SecondPrice{}, extras, cfg);
  const RevenueEstimate b = estimate_mc(m, mechanism::SecondPrice{}, extras, cfg);
  CHECK(a.mean == b.mean);
  CHECK(a.std_err == b.std_err);
  const RevenueEstimate c = estimate_mc(m, mechanism::SecondPrice{}, extras, config(100, 50'000));
  CHECK(a.mean != c.mean);
}

TEST_CASE("Monte Carlo rejects bad inputs", "[revenue]") {
  const MarketModel m = build_iid_market({Distribution::uniform(0, 1)}, {1.0}, 2);
  EstimatorConfig bad = config(1, 0);
  CHECK(code_of([&] { (void)estimate_mc(m, mechanism::SecondPrice{}, {}, bad); }) == ErrorCode::InvalidParameter);
  const std::vector<ExtraBidder> extras{ExtraBidder::drawn_from(4)};
  CHECK(code_of([&] { (void)estimate_mc(m, mechanism::SecondPrice{}, extras, config(1, 10)); }) ==
        ErrorCode::IndexOutOfRange);
  CHECK(code_of([] { (void)ExtraBidder::fixed(-1); }) == ErrorCode::InvalidParameter);
  // Myerson on U(0,1) with an exponential participant: values leave the support
  const MarketModel wide = build_iid_market({Distribution::exponential(0.1)}, {1.0}, 2);
  const MechanismSpec narrow = make_myerson_regular({Distribution::uniform(0, 1), Distribution::uniform(0, 1)});
  try {
    (void)estimate_mc(wide, narrow, {}, config(1, 1000));
    FAIL("expected ValueOutsideSupport");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ValueOutsideSupport);
    CHECK(std::string(e.what()).find("sample ") != std::string::npos);
  }
}

TEST_CASE("revenue equals virtual surplus for truthful mechanisms", "[revenue]") {
  const MarketModel m =
      build_market({Distribution::uniform(0, 1), Distribution::uniform(0, 2), Distribution::exponential(1)},
                   {{0.5, 0.5, 0.0}, {0.2, 0.3, 0.5}, {0.0, 0.0, 1.0}});
  const std::vector<ExtraBidder> extras{ExtraBidder::drawn_from(1)};
  const std::vector<MechanismSpec> specs{mechanism::SecondPrice{}, mechanism::SecondPriceAnonymousReserve{0.6},
                                         mechanism::DiscriminatingMyerson{}};
  for (const auto& spec : specs) {
    INFO(mechanism_name(spec));
    const McResult r = estimate_mc_with_surplus(m, spec, extras, config(3, 200'000));
    CHECK(within_se(r.revenue.mean, r.virtual_surplus.mean, combined_se(r.revenue, r.virtual_surplus)));
    // every floor is 0, so no rent
    CHECK(r.floor_rent.mean == 0.0);
  }
}

TEST_CASE("a bidder who wins at its floor keeps rent", "[revenue]") {
  // v0 ~ U(0,1), v1 ~ U(1/2,1). Second price earns E[min] = 11/24; at v1 = 1/2
  // bidder 1 wins when v0 < 1/2 and keeps 1/2 * 1/2 - E[v0; v0 < 1/2] = 1/8.
  const MarketModel m = build_market({Distribution::uniform(0, 1), Distribution::uniform(0.5, 1)}, {{1, 0}, {0, 1}});
  const McResult r = estimate_mc_with_surplus(m, mechanism::SecondPrice{}, {}, config(8, 400'000));
  CHECK(within_se(r.revenue.mean, 11.0 / 24.0, r.revenue.std_err));
  CHECK(within_se(r.floor_rent.mean, 0.125, r.floor_rent.std_err));
  CHECK_FALSE(within_se(r.revenue.mean, r.virtual_surplus.mean, combined_se(r.revenue, r.virtual_surplus)));
  CHECK(within_se(r.revenue.mean, r.net_surplus.mean, combined_se(r.revenue, r.net_surplus)));
  // revenue draws do not depend on whether surplus is tracked
  CHECK(r.revenue.mean == estimate_mc(m, mechanism::SecondPrice{}, {}, config(8, 400'000)).mean);
}

TEST_CASE("second-price revenue cdf examples", "[revenue]") {
  const std::vector<Distribution> appendix{er, er, er, one};
  for (double z : {1.0, 1.5, 4.0, 30.0})
    CHECK(vickrey_revenue_cdf<Distribution>(appendix, z) ==
          Approx((z * z * z + 3 * z * z) / std::pow(z + 1, 3)).epsilon(1e-12));
  for (double z : {0.1, 0.5, 0.99})
    CHECK(vickrey_revenue_cdf<Distribution>(appendix, z) == Approx(std::pow(z / (z + 1), 3)).epsilon(1e-12));
  const std::vector<Distribution> two_u{Distribution::uniform(0, 1), Distribution::uniform(0, 1)};
  CHECK(vickrey_revenue_cdf<Distribution>(two_u, 0.5) == Approx(0.75));
}

TEST_CASE("exceedance counts match brute-force enumeration", "[revenue]") {
  const std::vector<Distribution> d{Distribution::uniform(0, 2), Distribution::exponential(1), er,
                                    Distribution::two_point(0.5, 3, 0.4)};
  for (double z : {0.2, 0.5, 1.0, 2.5}) {
    std::vector<double> s(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) s[i] = d[i].survival(z);
    double none = 0, exactly_one = 0;
    for (unsigned mask = 0; mask < 16; ++mask) {
      double p = 1;
      for (std::size_t i = 0; i < 4; ++i) p *= (mask >> i & 1u) ? s[i] : 1 - s[i];
      const int bits = __builtin_popcount(mask);
      if (bits == 0) none += p;
      if (bits == 1) exactly_one += p;
    }
    const ExceedanceCounts c = exceedance_counts<Distribution>(d, z);
    CHECK(c.none == Approx(none).epsilon(1e-12));
    CHECK(c.one == Approx(exactly_one).epsilon(1e-12));
    CHECK(c.two_or_more == Approx(1 - none - exactly_one).margin(1e-12));
  }
}

TEST_CASE("quadrature reproduces the appendix values", "[revenue]") {
  // both originals from the equal-revenue component plus one extra per component
  const std::vector<Distribution> both_f2{er, er, one, er};
  CHECK(expected_revenue_quadrature<Distribution>(both_f2, std::nullopt, 1e-6).mean ==
        Approx(0.125 + std::log(8.0)).margin(1e-4));
  const std::vector<Distribution> duplicated{one, er, one, er};
  CHECK(expected_revenue_quadrature<Distribution>(duplicated, std::nullopt, 1e-6).mean == Approx(1.5).margin(1e-4));
  const std::vector<Distribution> both_det{one, one, one, er};
  CHECK(expected_revenue_quadrature<Distribution>(both_det, std::nullopt, 1e-6).mean == Approx(1.0).margin(1e-6));
}

TEST_CASE("quadrature agrees with closed forms and an independent integrator", "[revenue]") {
  for (std::size_t n = 2; n <= 6; ++n) {
    const std::vector<Distribution> u(n, Distribution::uniform(0, 1));
    CHECK(expected_revenue_quadrature<Distribution>(u, std::nullopt).mean ==
          Approx((n - 1.0) / (n + 1.0)).margin(1e-6));
  }
  const std::vector<Distribution> e{Distribution::exponential(2), Distribution::exponential(2)};
  CHECK(expected_revenue_quadrature<Distribution>(e, std::nullopt).mean == Approx(0.25).margin(1e-6));
  const std::vector<Distribution> u2{Distribution::uniform(0, 1), Distribution::uniform(0, 1)};
  CHECK(expected_revenue_quadrature<Distribution>(u2, 0.5).mean == Approx(5.0 / 12.0).margin(1e-6));

  const std::vector<Distribution> mixed{Distribution::uniform(0, 3), Distribution::truncated_normal(1, 1),
                                        Distribution::exponential(0.7)};
  auto two_above = [&](double z) { return exceedance_counts<Distribution>(mixed, z).two_or_more; };
  const double oracle = gauss_legendre(two_above, 0.0, 3.0, 4000) + gauss_legendre(two_above, 3.0, 80.0, 20000);
  CHECK(expected_revenue_quadrature<Distribution>(mixed, std::nullopt, 1e-8).mean == Approx(oracle).margin(1e-6));
}

TEST_CASE("quadrature handles mixture bidders", "[revenue]") {
  const std::vector<Distribution> comps{one, er};
  const BidderMixture f(comps, std::vector<double>{0.5, 0.5});
  const std::vector<BidderMixture> bidders{f, f, BidderMixture(comps, std::vector<double>{1.0, 0.0}),
                                           BidderMixture(comps, std::vector<double>{0.0, 1.0})};
  const double q = expected_revenue_quadrature<BidderMixture>(bidders, std::nullopt, 1e-6).mean;
  CHECK(q == Approx(0.25 + 0.25 * (0.125 + std::log(8.0)) + 0.5 * 1.5).margin(1e-4));

  const MarketModel m = build_iid_market(comps, {0.5, 0.5}, 2);
  const std::vector<ExtraBidder> extras{ExtraBidder::drawn_from(0), ExtraBidder::drawn_from(1)};
  const RevenueEstimate mc = estimate_mc(m, mechanism::SecondPrice{}, extras, config(5, 400'000));
  CHECK(within_se(mc.mean, q, mc.std_err));
}

TEST_CASE("quadrature flags a non-integrable tail", "[revenue]") {
  const std::vector<Distribution> heavy{Distribution::power_law(0.5), Distribution::power_law(0.5)};
  CHECK(code_of([&] { (void)expected_revenue_quadrature<Distribution>(heavy, std::nullopt); }) ==
        ErrorCode::DivergentTail);
  const std::vector<Distribution> single{Distribution::uniform(0, 1)};
  CHECK(code_of([&] { (void)expected_revenue_quadrature<Distribution>(single, std::nullopt); }) ==
        ErrorCode::InvalidParameter);
}

TEST_CASE("exact second price on atomic bidders", "[revenue]") {
  // n two-point bidders {1, H}: revenue H when at least two are high, else 1
  const double H = 100, p = 0.01;
  for (std::size_t n = 2; n <= 12; ++n) {
    const std::vector<Distribution> d(n, Distribution::two_point(1, H, p));
    const double none = std::pow(1 - p, n);
    const double exactly_one = n * p * std::pow(1 - p, n - 1);
    const double oracle = (none + exactly_one) * 1.0 + (1 - none - exactly_one) * H;
    CHECK(exact_second_price_revenue(d).mean == Approx(oracle).epsilon(1e-12));
  }
  const std::vector<Distribution> d{one, one};
  CHECK(exact_second_price_revenue(d, 2.0).mean == 0.0);
  CHECK(exact_second_price_revenue(d, 0.5).mean == 1.0);
}

TEST_CASE("posted sequences", "[revenue]") {
  const std::vector<Distribution> d{Distribution::uniform(0, 1), Distribution::uniform(0, 1)};
  const std::vector<double> prices{0.6, 0.5};
  const std::vector<std::size_t> order{0, 1};
  CHECK(posted_sequence_revenue_exact<Distribution>(d, prices, order) == Approx(0.4 * 0.6 + 0.6 * 0.5 * 0.5));

  // the best single-bidder offer on U(0,1) is the monopoly price
  std::vector<double> grid;
  for (int j = 1; j < 1000; ++j) grid.push_back(j / 1000.0);
  const PostedPolicy single = optimal_posted_sequence<Distribution>(std::span(d).first(1), grid);
  CHECK(single.revenue == Approx(0.25));
  // two bidders: last offer 0.5 earns 0.25, the first price then solves p = (1+0.25)/2
  const PostedPolicy two = optimal_posted_sequence<Distribution>(d, grid);
  CHECK(two.revenue == Approx(0.625 * 0.375 + 0.625 * 0.25).margin(1e-5));

  // appendix profile (F2 bidder, det-1 bidder): price H to the F2 bidder then 1,
  // earning H/(H+1) + H/(H+1)
  const std::vector<Distribution> mixed{er, one};
  const std::vector<double> cands{1.0, 1e6};
  const PostedPolicy p = optimal_posted_sequence<Distribution>(mixed, cands);
  CHECK(p.revenue == Approx(2e6 / (1e6 + 1)).epsilon(1e-12));
  REQUIRE(p.sequence.order.size() == 2);
  CHECK(p.sequence.order[0] == 0u);
  CHECK(p.sequence.prices[0] == 1e6);
}

TEST_CASE("discriminating benchmark", "[revenue]") {
  // k = 1: a single profile, so the benchmark is plain Myerson
  const MarketModel single = build_iid_market({Distribution::uniform(0, 1)}, {1.0}, 2);
  const RevenueEstimate b1 = discriminating_benchmark(single, config(7, 200'000));
  const RevenueEstimate m1 = estimate_mc(
      single, make_myerson_regular({Distribution::uniform(0, 1), Distribution::uniform(0, 1)}), {}, config(8, 200'000));
  CHECK(within_se(b1.mean, m1.mean, combined_se(b1, m1)));

  // two components: sum over the three profile types with an independent oracle per type
  const MarketModel m = build_iid_market({Distribution::uniform(0, 1), Distribution::uniform(0, 2)}, {0.5, 0.5}, 2);
  auto pos = [](double x) { return std::max(0.0, x); };
  const double mixed = integrate_2d(
      [&](double x, double y) { return 0.5 * std::max(pos(2 * x - 1), pos(2 * y - 2)); }, 0, 1, 0, 2);
  const double oracle = 0.25 * (5.0 / 12.0) + 0.25 * (5.0 / 6.0) + 0.5 * mixed;
  const RevenueEstimate b = discriminating_benchmark(m, config(9, 400'000));
  CHECK(b.method == Method::MonteCarlo);
  CHECK(within_se(b.mean, oracle, b.std_err));

  // coin sampling when the profile space exceeds the cap
  EstimatorConfig capped = config(10, 400'000);
  capped.profile_cap = 2;
  const RevenueEstimate s = discriminating_benchmark(m, capped);
  CHECK(within_se(s.mean, oracle, s.std_err));
  CHECK(code_of([&] { (void)discriminating_benchmark(m, capped, {nullptr, false}); }) ==
        ErrorCode::ProfileSpaceTooLarge);

  const MarketModel irregular = build_iid_market({Distribution::two_point(1, 2, 0.5)}, {1.0}, 2);
  CHECK(code_of([&] { (void)discriminating_benchmark(irregular, config(1, 10)); }) ==
        ErrorCode::IrregularComponent);
}

TEST_CASE("approximation ratio", "[revenue]") {
  const Ratio r = approximation_ratio({1.75, 0.0, 0, Method::Exact}, {1.55, 0.0, 0, Method::Exact});
  CHECK(r.value == Approx(1.129).margin(1e-3));
  CHECK(r.value <= 2.0);
  CHECK(approximation_ratio({2.0, 0.1, 10, Method::MonteCarlo}, {2.0, 0.1, 10, Method::MonteCarlo}).value == 1.0);
  const Ratio e = approximation_ratio({2.0, 0.02, 10, Method::MonteCarlo}, {1.0, 0.01, 10, Method::MonteCarlo});
  CHECK(e.std_err == Approx(2.0 * std::sqrt(0.0001 + 0.0001)));
  CHECK(code_of([] { (void)approximation_ratio({1.0, 0.0, 0, Method::Exact}, {0.0, 0.0, 0, Method::Exact}); }) ==
        ErrorCode::ZeroDenominator);
}

TEST_CASE("commensurateness of Vickrey with extras", "[revenue]") {
  const MarketModel m = build_market({Distribution::uniform(0, 1), Distribution::uniform(0, 2)},
                                     {{0.5, 0.5}, {0.8, 0.2}, {0.1, 0.9}});
  const std::vector<ExtraBidder> per_component{ExtraBidder::drawn_from(0), ExtraBidder::drawn_from(1)};
  const CommensuratenessReport rep =
      commensurateness_check(m, mechanism::DiscriminatingMyerson{}, mechanism::SecondPrice{}, per_component,
                             config(21, 200'000));
  CHECK(rep.divergences >= kMinDivergenceSamples);
  CHECK(rep.virtual_condition_holds());
  CHECK(rep.price_condition_holds());
  CHECK(rep.price_pass_rate() == 1.0);

  // one extra from the hazard-rate dominant component
  const std::vector<ExtraBidder> dominant{ExtraBidder::drawn_from(1)};
  const CommensuratenessReport hr = commensurateness_check(m, mechanism::DiscriminatingMyerson{},
                                                           mechanism::SecondPrice{}, dominant, config(22, 200'000));
  CHECK(hr.virtual_condition_holds());
  CHECK(hr.price_condition_holds());

  const CommensuratenessReport same =
      commensurateness_check(m, mechanism::SecondPrice{}, mechanism::SecondPrice{}, {}, config(23, 10'000));
  CHECK(same.no_divergence());
  CHECK(same.virtual_condition_holds());

  CHECK(code_of([&] {
          (void)commensurateness_check(m, mechanism::DiscriminatingMyerson{}, mechanism::SecondPrice{}, per_component,
                                       config(24, 40));
        }) == ErrorCode::InsufficientDivergenceSamples);
}
