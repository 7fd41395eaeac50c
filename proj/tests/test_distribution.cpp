#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "auction_lab/distribution.hpp"
#include "auction_lab/mixture.hpp"
#include "support.hpp"

using namespace auction_lab;
using Catch::Approx;

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

std::vector<Distribution> continuous_families() {
  return {Distribution::uniform(0, 1),       Distribution::uniform(0.5, 2.5),        Distribution::exponential(2),
          Distribution::power_law(3),        Distribution::equal_revenue(),          Distribution::truncated_normal(1, 1),
          Distribution::truncated_normal(-1, 0.7)};
}

}  // namespace

TEST_CASE("cdf examples", "[dist]") {
  CHECK(Distribution::uniform(0, 2).cdf(1.0) == Approx(0.5));
  CHECK(Distribution::equal_revenue().cdf(1.0) == Approx(0.5));
  CHECK(Distribution::two_point(1, 100, 0.01).cdf(1.0) == Approx(0.99));
  CHECK(Distribution::two_point(1, 100, 0.01).cdf_left(1.0) == 0.0);
  CHECK(Distribution::point_mass(3).cdf(2.999) == 0.0);
  CHECK(Distribution::point_mass(3).cdf(3.0) == 1.0);
}

TEST_CASE("cdf is monotone and bounded", "[dist]") {
  for (const auto& d : continuous_families()) {
    double prev = 0.0;
    for (double x = -1.0; x < 60.0; x += 0.01) {
      const double c = d.cdf(x);
      REQUIRE(c >= prev);
      REQUIRE(c <= 1.0);
      prev = c;
    }
  }
}

TEST_CASE("quantile examples", "[dist]") {
  CHECK(Distribution::uniform(0, 1).quantile(0.25) == Approx(0.25));
  CHECK(Distribution::equal_revenue().quantile(0.9) == Approx(9.0));
  CHECK(Distribution::two_point(1, 100, 0.01).quantile(0.5) == 1.0);
  CHECK(Distribution::two_point(1, 100, 0.01).quantile(0.995) == 100.0);
  CHECK(Distribution::uniform(0, 1).quantile(1.0) == 1.0);
  CHECK(code_of([] { (void)Distribution::exponential(1).quantile(1.0); }) == ErrorCode::UnboundedQuantile);
  CHECK(code_of([] { (void)Distribution::equal_revenue().quantile(1.0); }) == ErrorCode::UnboundedQuantile);
}

TEST_CASE("quantile inverts cdf on continuous families", "[dist]") {
  for (const auto& d : continuous_families()) {
    for (double u = 0.001; u < 1.0; u += 0.007) {
      INFO(d.describe() << " u=" << u);
      REQUIRE(d.cdf(d.quantile(u)) == Approx(u).margin(1e-10));
      const double x = d.quantile(u);
      REQUIRE(d.quantile(d.cdf(x)) == Approx(x).epsilon(1e-8).margin(1e-8));
    }
  }
}

TEST_CASE("hazard and virtual value examples", "[dist]") {
  const HazardAndVirtual u = hazard_and_virtual(Distribution::uniform(0, 1), 0.5);
  CHECK(u.hazard == Approx(2.0));
  CHECK(u.virtual_value == Approx(0.0).margin(1e-12));
  for (double x : {0.1, 1.0, 7.5}) {
    const HazardAndVirtual e = hazard_and_virtual(Distribution::exponential(2), x);
    CHECK(e.hazard == Approx(2.0));
    CHECK(e.virtual_value == Approx(x - 0.5));
  }
  const HazardAndVirtual er = hazard_and_virtual(Distribution::equal_revenue(), 3.0);
  CHECK(er.hazard == Approx(0.25));
  CHECK(er.virtual_value == Approx(-1.0));

  CHECK(code_of([] { (void)hazard_and_virtual(Distribution::point_mass(1), 1.0); }) ==
        ErrorCode::AtomicDistribution);
  CHECK(code_of([] { (void)hazard_and_virtual(Distribution::two_point(1, 2, 0.5), 1.5); }) ==
        ErrorCode::AtomicDistribution);
  CHECK(code_of([] { (void)hazard_and_virtual(Distribution::uniform(0, 1), 1.5); }) == ErrorCode::OutsideSupport);
  CHECK(code_of([] { (void)hazard_and_virtual(Distribution::power_law(2), 0.5); }) == ErrorCode::OutsideSupport);
}

TEST_CASE("closed-form virtual values agree with x - S/f", "[dist]") {
  for (const auto& d : continuous_families()) {
    for (double u = 0.01; u < 0.99; u += 0.01) {
      const double x = d.quantile(u);
      const double numeric = x - d.survival(x) / d.pdf(x);
      INFO(d.describe() << " x=" << x);
      REQUIRE(d.virtual_value(x) == Approx(numeric).epsilon(1e-9).margin(1e-9));
    }
  }
  const Distribution d = Distribution::uniform(0.5, 2.5);
  for (double u : quantile_grid(1001)) {
    const double x = d.quantile(u);
    REQUIRE(std::abs(d.virtual_value(x) - (2.0 * x - 2.5)) <= 1e-10);
  }
}

TEST_CASE("invalid parameters are rejected", "[dist]") {
  CHECK(code_of([] { (void)Distribution::uniform(1, 1); }) == ErrorCode::InvalidParameter);
  CHECK(code_of([] { (void)Distribution::exponential(0); }) == ErrorCode::InvalidParameter);
  CHECK(code_of([] { (void)Distribution::power_law(-1); }) == ErrorCode::InvalidParameter);
  CHECK(code_of([] { (void)Distribution::truncated_normal(0, 0); }) == ErrorCode::InvalidParameter);
  CHECK(code_of([] { (void)Distribution::two_point(2, 1, 0.5); }) == ErrorCode::InvalidParameter);
  CHECK(code_of([] { (void)Distribution::two_point(1, 2, 1.0); }) == ErrorCode::InvalidParameter);
}

TEST_CASE("sampling is inverse transform and deterministic", "[dist]") {
  CHECK(Distribution::uniform(0, 1).from_uniform(0.3) == Approx(0.3));
  CHECK(Distribution::two_point(1, 100, 0.01).from_uniform(0.995) == 100.0);
  CHECK(Distribution::two_point(1, 100, 0.01).from_uniform(0.5) == 1.0);

  Stream a(123, 4), b(123, 4), c(123, 5);
  const Distribution d = Distribution::exponential(1.5);
  std::vector<double> xa, xb, xc;
  for (int i = 0; i < 100; ++i) {
    xa.push_back(d.sample(a));
    xb.push_back(d.sample(b));
    xc.push_back(d.sample(c));
  }
  CHECK(xa == xb);
  CHECK(xa != xc);
}

TEST_CASE("empirical cdf of 1e6 samples matches every continuous family", "[dist][slow]") {
  for (const auto& d : continuous_families()) {
    Stream s(2024, 0);
    std::vector<double> xs(1'000'000);
    for (auto& x : xs) {
      x = d.sample(s);
      REQUIRE(d.support().contains(x));
    }
    const double ks = test_support::ks_statistic(
        std::move(xs), [&](double x) { return d.cdf(x); }, [&](double x) { return d.cdf_left(x); });
    INFO(d.describe() << " KS=" << ks);
    CHECK(ks <= 0.003);
  }
}

TEST_CASE("revenue curve examples", "[dist]") {
  CHECK(revenue_curve_point(Distribution::uniform(0, 1), 0.5) == Approx(0.25));
  CHECK(revenue_curve_point(Distribution::equal_revenue(), 0.25) == Approx(0.75));
  CHECK(revenue_curve_point(Distribution::point_mass(1), 0.3) == Approx(0.3));
}

TEST_CASE("monopoly reserve", "[dist]") {
  CHECK(monopoly_reserve(Distribution::uniform(0, 1)) == Approx(0.5).epsilon(1e-7));
  CHECK(monopoly_reserve(Distribution::exponential(1)) == Approx(1.0).epsilon(1e-7));
  CHECK(code_of([] { (void)monopoly_reserve(Distribution::equal_revenue()); }) == ErrorCode::SupremumNotAttained);
  // atoms: 1 * 1 versus 100 * 0.01 ties; the lower atom is kept
  CHECK(monopoly_reserve(Distribution::two_point(1, 100, 0.02)) == 100.0);
  CHECK(monopoly_reserve(Distribution::two_point(1, 100, 0.005)) == 1.0);
  // power law with alpha > 1: revenue r^{1-alpha} peaks at the bottom of the support
  CHECK(monopoly_reserve(Distribution::power_law(3)) == Approx(1.0).epsilon(1e-6));
}

TEST_CASE("monopoly reserve is stationary for interior maximizers", "[dist]") {
  for (const auto& d : {Distribution::uniform(0, 1), Distribution::uniform(0.2, 3), Distribution::exponential(0.7),
                        Distribution::truncated_normal(1, 1), Distribution::truncated_normal(-0.5, 2)}) {
    const double r = monopoly_reserve(d);
    INFO(d.describe() << " r*=" << r);
    CHECK(std::abs(d.virtual_value(r)) <= 1e-6);
  }
}

TEST_CASE("regularity certificate", "[dist]") {
  CHECK(regularity_check(Distribution::uniform(0, 1)));
  CHECK(regularity_check(Distribution::equal_revenue()));
  CHECK(regularity_check(Distribution::power_law(2)));
  // phi(x) = x(1 - 1/alpha) decreases when alpha < 1
  CHECK_FALSE(regularity_check(Distribution::power_law(0.5)));
  CHECK(regularity_check(Distribution::truncated_normal(0, 1)));
  const BidderMixture mix({Distribution::exponential(10), Distribution::exponential(0.1)}, {0.9, 0.1});
  CHECK_FALSE(regularity_check(mix));
  CHECK(code_of([] { (void)regularity_check(Distribution::point_mass(1)); }) == ErrorCode::AtomicDistribution);
  CHECK(code_of([] { (void)regularity_check(Distribution::uniform(0, 1), 50); }) == ErrorCode::InvalidParameter);
}

TEST_CASE("hazard-rate dominance", "[dist]") {
  CHECK(hr_dominates(Distribution::uniform(0, 2), Distribution::uniform(0, 1)));
  CHECK(hr_dominates(Distribution::exponential(1), Distribution::exponential(2)));
  CHECK_FALSE(hr_dominates(Distribution::uniform(0, 1), Distribution::uniform(0, 2)));
  CHECK(hr_dominates(Distribution::exponential(1), Distribution::uniform(0, 1)));

  const HazardComparison c = compare_hazards(Distribution::uniform(0, 1), Distribution::exponential(2));
  CHECK_FALSE(c.dominates);
  REQUIRE(c.crossing.has_value());
  CHECK(*c.crossing == Approx(0.5).margin(1e-3));

  CHECK(code_of([] { (void)hr_dominates(Distribution::uniform(0, 1), Distribution::power_law(2)); }) ==
        ErrorCode::DisjointSupports);
  CHECK(code_of([] { (void)hr_dominates(Distribution::point_mass(1), Distribution::uniform(0, 2)); }) ==
        ErrorCode::AtomicDistribution);
}

TEST_CASE("dominance follows the survival-power relation", "[dist]") {
  // 1 - G_i = (1 - G_j)^theta with theta <= 1 means G_i dominates G_j
  for (double a : {0.5, 1.0, 2.0, 3.5})
    for (double b : {0.5, 1.0, 2.0, 3.5}) {
      INFO("a=" << a << " b=" << b);
      CHECK(hr_dominates(Distribution::exponential(a), Distribution::exponential(b)) == (a <= b));
      CHECK(hr_dominates(Distribution::power_law(a), Distribution::power_law(b)) == (a <= b));
    }
}
