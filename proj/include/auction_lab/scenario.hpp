#pragma once

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "auction_lab/distribution.hpp"
#include "auction_lab/error.hpp"
#include "auction_lab/mechanism.hpp"
#include "auction_lab/mixture.hpp"
#include "auction_lab/revenue.hpp"

namespace auction_lab {

inline constexpr int kScenarioVersion = 1;
inline constexpr const char* kSeedEnvironmentVariable = "AUCTION_LAB_SEED";

/// The mechanism as written in a scenario; turned into a MechanismSpec once the
/// market is known (Myerson needs per-participant laws).
struct MechanismConfig {
  std::string kind = "second_price";
  std::optional<double> reserve;
  std::vector<double> reserves;
  std::vector<double> prices;
  std::vector<std::size_t> order;
  std::vector<std::size_t> components;
  std::size_t subset_size = 0;
};

struct OutputConfig {
  std::optional<std::string> path;
  std::string format = "csv";
};

struct ScenarioConfig {
  std::string id = "scenario";
  MarketModel market;
  MechanismConfig mechanism;
  std::vector<ExtraBidder> extras;
  EstimatorConfig estimator;
  /// Seed from the file; combined with flags and environment by resolve_seed.
  std::optional<std::uint64_t> seed;
  OutputConfig outputs;
};

namespace detail {

using Json = nlohmann::json;

inline const Json& field(const Json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw SchemaError(path, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) throw SchemaError(path + "." + key, "missing");
  return *it;
}

inline double number_at(const Json& j, const std::string& path) {
  if (!j.is_number()) throw SchemaError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(path, "expected a finite number");
  return v;
}

inline double number_field(const Json& obj, const std::string& key, const std::string& path) {
  return number_at(field(obj, key, path), path + "." + key);
}

inline std::uint64_t count_at(const Json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (j.is_number_integer()) {
    if (j.get<std::int64_t>() < 0) throw SchemaError(path, "expected a nonnegative integer");
    return static_cast<std::uint64_t>(j.get<std::int64_t>());
  }
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (v >= 0.0 && v == std::floor(v) && v < 1.8e19) return static_cast<std::uint64_t>(v);
  }
  throw SchemaError(path, "expected a nonnegative integer");
}

inline std::string string_at(const Json& j, const std::string& path) {
  if (!j.is_string()) throw SchemaError(path, "expected a string");
  return j.get<std::string>();
}

inline std::vector<double> numbers_at(const Json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number_at(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline std::vector<std::size_t> indices_at(const Json& j, const std::string& path) {
  if (!j.is_array()) throw SchemaError(path, "expected an array");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < j.size(); ++i)
    out.push_back(static_cast<std::size_t>(count_at(j[i], path + "[" + std::to_string(i) + "]")));
  return out;
}

/// Calls a factory, relabelling its InvalidParameter as a schema error at `path`.
template <class F>
Distribution checked(F&& make, const std::string& path) {
  try {
    return make();
  } catch (const Error& e) {
    throw SchemaError(path, e.what());
  }
}

inline Distribution parse_component(const Json& j, const std::string& path) {
  const std::string family = string_at(field(j, "family", path), path + ".family");
  if (family == "uniform") {
    const double a = number_field(j, "a", path);
    const double b = number_field(j, "b", path);
    return checked([&] { return Distribution::uniform(a, b); }, path);
  }
  if (family == "exponential") {
    const double rate = number_field(j, "rate", path);
    return checked([&] { return Distribution::exponential(rate); }, path);
  }
  if (family == "power_law") {
    const double alpha = number_field(j, "alpha", path);
    return checked([&] { return Distribution::power_law(alpha); }, path);
  }
  if (family == "equal_revenue") return Distribution::equal_revenue();
  if (family == "truncated_normal") {
    const double mu = number_field(j, "mu", path);
    const double sigma = number_field(j, "sigma", path);
    return checked([&] { return Distribution::truncated_normal(mu, sigma); }, path);
  }
  if (family == "point_mass") {
    const double value = number_field(j, "value", path);
    return checked([&] { return Distribution::point_mass(value); }, path);
  }
  if (family == "two_point") {
    const double low = number_field(j, "low", path);
    const double high = number_field(j, "high", path);
    const double p_high = number_field(j, "p_high", path);
    return checked([&] { return Distribution::two_point(low, high, p_high); }, path);
  }
  throw SchemaError(path + ".family", "unknown family '" + family + "'");
}

inline void check_row(const std::vector<double>& row, std::size_t k, const std::string& path) {
  if (row.size() != k)
    throw SchemaError(path, "row length " + std::to_string(row.size()) + " differs from the component count");
  double sum = 0.0;
  for (std::size_t t = 0; t < row.size(); ++t) {
    if (row[t] < 0.0) throw SchemaError(path + "[" + std::to_string(t) + "]", "negative weight");
    sum += row[t];
  }
  if (std::abs(sum - 1.0) > kWeightRowTolerance) throw SchemaError(path, "row sum");
}

inline MarketModel parse_market(const Json& j) {
  const std::string path = "market";
  const Json& comps = field(j, "components", path);
  if (!comps.is_array() || comps.empty()) throw SchemaError("market.components", "expected a nonempty array");
  std::vector<Distribution> components;
  for (std::size_t t = 0; t < comps.size(); ++t)
    components.push_back(parse_component(comps[t], "market.components[" + std::to_string(t) + "]"));

  const bool iid = j.contains("iid") && j["iid"].is_boolean() && j["iid"].get<bool>();
  if (j.contains("iid") && !j["iid"].is_boolean()) throw SchemaError("market.iid", "expected true or false");
  std::vector<std::vector<double>> rows;
  if (iid) {
    if (j.contains("weights")) throw SchemaError("market.weights", "not allowed with \"iid\": true; use \"row\"");
    std::vector<double> row = numbers_at(field(j, "row", path), "market.row");
    check_row(row, components.size(), "market.row");
    const std::uint64_t n = count_at(field(j, "bidders", path), "market.bidders");
    if (n < 1) throw SchemaError("market.bidders", "at least one bidder is required");
    rows.assign(n, row);
  } else {
    const Json& w = field(j, "weights", path);
    if (!w.is_array() || w.empty()) throw SchemaError("market.weights", "expected a nonempty array of rows");
    for (std::size_t i = 0; i < w.size(); ++i) {
      const std::string row_path = "market.weights[" + std::to_string(i) + "]";
      rows.push_back(numbers_at(w[i], row_path));
      check_row(rows.back(), components.size(), row_path);
    }
  }
  try {
    return build_market(std::move(components), std::move(rows));
  } catch (const Error& e) {
    throw SchemaError("market", e.what());
  }
}

inline MechanismConfig parse_mechanism(const Json& j) {
  const std::string path = "mechanism";
  MechanismConfig m;
  m.kind = string_at(field(j, "kind", path), "mechanism.kind");
  if (m.kind == "second_price" || m.kind == "myerson" || m.kind == "discriminating_myerson") {
  } else if (m.kind == "second_price_reserve") {
    m.reserve = number_field(j, "reserve", path);
    if (*m.reserve < 0.0) throw SchemaError("mechanism.reserve", "reserve must be >= 0");
  } else if (m.kind == "second_price_bidder_reserves") {
    m.reserves = numbers_at(field(j, "reserves", path), "mechanism.reserves");
  } else if (m.kind == "posted_sequence") {
    m.prices = numbers_at(field(j, "prices", path), "mechanism.prices");
    m.order = indices_at(field(j, "order", path), "mechanism.order");
    if (m.prices.size() != m.order.size()) throw SchemaError("mechanism.order", "one price per offer");
  } else if (m.kind == "sample_reserve") {
    m.components = indices_at(field(j, "components", path), "mechanism.components");
  } else if (m.kind == "random_subset_reserve") {
    m.subset_size = static_cast<std::size_t>(count_at(field(j, "size", path), "mechanism.size"));
  } else {
    throw SchemaError("mechanism.kind", "unknown mechanism '" + m.kind + "'");
  }
  return m;
}

inline std::vector<ExtraBidder> parse_extras(const Json& j, std::size_t k) {
  if (!j.is_array()) throw SchemaError("extras", "expected an array");
  std::vector<ExtraBidder> out;
  for (std::size_t e = 0; e < j.size(); ++e) {
    const std::string path = "extras[" + std::to_string(e) + "]";
    const Json& x = j[e];
    if (!x.is_object()) throw SchemaError(path, "expected an object");
    if (x.contains("component") == x.contains("value"))
      throw SchemaError(path, "exactly one of 'component' or 'value' is required");
    if (x.contains("component")) {
      const auto t = static_cast<std::size_t>(count_at(x["component"], path + ".component"));
      if (t >= k) throw SchemaError(path + ".component", "no such component");
      out.push_back(ExtraBidder::drawn_from(t));
    } else {
      const double v = number_at(x["value"], path + ".value");
      if (v < 0.0) throw SchemaError(path + ".value", "value must be >= 0");
      out.push_back(ExtraBidder::fixed(v));
    }
  }
  return out;
}

inline void parse_estimator(const Json& j, ScenarioConfig& cfg) {
  if (!j.is_object()) throw SchemaError("estimator", "expected an object");
  if (j.contains("seed")) cfg.seed = count_at(j["seed"], "estimator.seed");
  if (j.contains("n_samples")) {
    cfg.estimator.n_samples = count_at(j["n_samples"], "estimator.n_samples");
    if (cfg.estimator.n_samples < 1) throw SchemaError("estimator.n_samples", "must be at least 1");
  }
  if (j.contains("n_streams")) {
    const std::uint64_t s = count_at(j["n_streams"], "estimator.n_streams");
    if (s < 1 || s > 4096) throw SchemaError("estimator.n_streams", "must lie in [1, 4096]");
    cfg.estimator.n_streams = static_cast<std::uint32_t>(s);
  }
  if (j.contains("profile_cap")) cfg.estimator.profile_cap = count_at(j["profile_cap"], "estimator.profile_cap");
  if (j.contains("tolerance")) {
    cfg.estimator.quadrature_tolerance = number_at(j["tolerance"], "estimator.tolerance");
    if (cfg.estimator.quadrature_tolerance <= 0.0) throw SchemaError("estimator.tolerance", "must be > 0");
  }
}

}  // namespace detail

inline bool is_known_format(const std::string& f) { return f == "csv" || f == "json-lines" || f == "text-table"; }

/// Parses and validates a version-1 scenario document.
inline ScenarioConfig parse_scenario(const std::string& text) {
  detail::Json j;
  try {
    j = detail::Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("$", std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("$", "expected a top-level object");
  const std::uint64_t version = detail::count_at(detail::field(j, "version", "$"), "version");
  if (version != static_cast<std::uint64_t>(kScenarioVersion))
    throw SchemaError("version", "unsupported version " + std::to_string(version));

  ScenarioConfig cfg;
  if (j.contains("id")) cfg.id = detail::string_at(j["id"], "id");
  cfg.market = detail::parse_market(detail::field(j, "market", "$"));
  if (j.contains("mechanism")) cfg.mechanism = detail::parse_mechanism(j["mechanism"]);
  if (j.contains("extras")) cfg.extras = detail::parse_extras(j["extras"], cfg.market.k());
  if (j.contains("estimator")) detail::parse_estimator(j["estimator"], cfg);
  if (j.contains("outputs")) {
    const detail::Json& o = j["outputs"];
    if (!o.is_object()) throw SchemaError("outputs", "expected an object");
    if (o.contains("csv")) cfg.outputs.path = detail::string_at(o["csv"], "outputs.csv");
    if (o.contains("format")) {
      cfg.outputs.format = detail::string_at(o["format"], "outputs.format");
      if (!is_known_format(cfg.outputs.format)) throw SchemaError("outputs.format", "unknown format");
    }
  }
  for (std::size_t t : cfg.mechanism.components)
    if (t >= cfg.market.k()) throw SchemaError("mechanism.components", "no such component");
  return cfg;
}

/// Seed precedence: explicit flag, then the scenario file, then the environment.
/// There is deliberately no clock-based fallback.
inline std::uint64_t resolve_seed(std::optional<std::uint64_t> flag, std::optional<std::uint64_t> from_file) {
  if (flag) return *flag;
  if (from_file) return *from_file;
  if (const char* env = std::getenv(kSeedEnvironmentVariable)) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && *end == '\0') return v;
    throw SchemaError("estimator.seed", std::string(kSeedEnvironmentVariable) + " is not an unsigned integer");
  }
  throw SchemaError("estimator.seed", "missing; pass --seed, set it in the scenario, or export " +
                                          std::string(kSeedEnvironmentVariable));
}

/// Turns the written mechanism into a runnable one for this market and extras.
/// "myerson" uses regular per-participant distributions when every participant
/// has a single component, and ironed mixture curves otherwise.
inline MechanismSpec build_mechanism(const MechanismConfig& mc, const MarketModel& m,
                                     const std::vector<ExtraBidder>& extras) {
  const std::string& kind = mc.kind;
  if (kind == "second_price") return mechanism::SecondPrice{};
  if (kind == "second_price_reserve") return make_anonymous_reserve(*mc.reserve);
  if (kind == "second_price_bidder_reserves") {
    if (mc.reserves.size() != m.n() + extras.size())
      throw SchemaError("mechanism.reserves", "one reserve per participant (bidders plus extras) is required");
    return mechanism::SecondPriceBidderReserves{mc.reserves};
  }
  if (kind == "discriminating_myerson") return mechanism::DiscriminatingMyerson{};
  if (kind == "posted_sequence") return mechanism::PostedSequence{mc.prices, mc.order};
  if (kind == "sample_reserve") return mechanism::SampleReserve{mc.components};
  if (kind == "random_subset_reserve") return mechanism::RandomSubsetReserve{mc.subset_size};
  // myerson
  for (const auto& e : extras)
    if (!e.component) throw SchemaError("extras", "myerson needs drawn extras, not fixed values");
  bool single = true;
  std::vector<std::size_t> law(m.n());
  for (std::size_t i = 0; i < m.n(); ++i) {
    std::size_t positive = 0;
    for (std::size_t t = 0; t < m.k(); ++t)
      if (m.weight(i, t) > 0.0) {
        ++positive;
        law[i] = t;
      }
    single = single && positive == 1;
  }
  if (single) {
    std::vector<Distribution> dists;
    for (std::size_t i = 0; i < m.n(); ++i) dists.push_back(m.component(law[i]));
    for (const auto& e : extras) dists.push_back(m.component(*e.component));
    try {
      return make_myerson_regular(std::move(dists));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::IrregularComponent) throw;
    }
  }
  mechanism::MyersonIroned ironed;
  for (std::size_t i = 0; i < m.n(); ++i) ironed.curves.push_back(iron(m, i));
  for (const auto& e : extras) ironed.curves.push_back(iron_distribution(m.component(*e.component)));
  return ironed;
}

}  // namespace auction_lab
