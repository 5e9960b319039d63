#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "narrative/error.hpp"
#include "narrative/stats.hpp"

using namespace narrative;

namespace {

// Two-sided exact p by enumerating every way to pick |a| ranks out of the pooled sample.
double brute_force_p(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = midranks(pooled);
  const std::size_t n = pooled.size();
  const std::size_t k = a.size();
  double observed = 0.0;
  for (std::size_t i = 0; i < k; ++i) observed += ranks[i];
  const double expected = static_cast<double>(k) * static_cast<double>(n + 1) / 2.0;
  std::size_t hits = 0, total = 0;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcount(mask)) != k) continue;
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (1u << i)) s += ranks[i];
    }
    ++total;
    if (std::abs(s - expected) >= std::abs(observed - expected) - 1e-9) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace

TEST_CASE("basic moments") {
  const std::vector<double> x = {1, 2, 3, 4};
  CHECK(mean(x) == 2.5);
  CHECK(sample_variance(x) == doctest::Approx(5.0 / 3.0));
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 3, 2}) == 2.5);
  CHECK(median({}) == 0.0);
}

TEST_CASE("cohens d") {
  const std::vector<double> a = {2, 4};
  const std::vector<double> b = {0, 2};
  // pooled sd = sqrt(((1)*2 + (1)*2) / 2) = sqrt(2)
  CHECK(cohens_d(a, b) == doctest::Approx(2.0 / std::sqrt(2.0)));
  CHECK(cohens_d(b, a) == doctest::Approx(-2.0 / std::sqrt(2.0)));
  const std::vector<double> same = {1, 2, 3};
  CHECK(cohens_d(same, same) == 0.0);
  const std::vector<double> flat = {1, 1};
  CHECK_THROWS_AS(cohens_d(flat, flat), DataError);
  CHECK_THROWS_AS(cohens_d(std::vector<double>{1}, same), DataError);
  CHECK(effect_size(flat, flat) == 0.0);
  CHECK(std::isinf(effect_size(std::vector<double>{2, 2}, flat)));
  CHECK(effect_size(std::vector<double>{2, 2}, flat) > 0);
}

TEST_CASE("midranks") {
  CHECK(midranks(std::vector<double>{10, 20, 20, 5}) == std::vector<double>{2, 3.5, 3.5, 1});
}

TEST_CASE("u test examples") {
  const std::vector<double> a = {1, 2, 3, 4, 5};
  const auto same = mann_whitney_u(a, a);
  CHECK(same.p_value == doctest::Approx(1.0));
  CHECK(same.u == 12.5);

  std::vector<double> hi, lo;
  for (int i = 0; i < 20; ++i) {
    hi.push_back(100 + i);
    lo.push_back(i);
  }
  const auto r = mann_whitney_u(hi, lo);
  CHECK(r.exact);
  CHECK(r.u == 400.0);
  CHECK(r.p_value < 1e-6);
  CHECK(mann_whitney_u(hi, lo, false).p_value < mann_whitney_u(lo, hi, false).p_value);
  CHECK_THROWS_AS(mann_whitney_u(std::vector<double>{}, a), DataError);
}

TEST_CASE("exact p for (3,3) equals enumeration of all 20 splits") {
  const std::vector<std::vector<double>> as = {{1, 2, 3}, {1, 5, 6}, {2, 4, 6}, {1, 1, 2}, {3, 3, 3}, {0.5, 9, 2}};
  const std::vector<std::vector<double>> bs = {{4, 5, 6}, {2, 3, 4}, {1, 3, 5}, {1, 2, 3}, {3, 4, 3}, {7, 1, 8}};
  for (std::size_t i = 0; i < as.size(); ++i) {
    const auto r = mann_whitney_u(as[i], bs[i]);
    CHECK(r.exact);
    CHECK(r.p_value == doctest::Approx(brute_force_p(as[i], bs[i])).epsilon(1e-12));
  }
  CHECK(mann_whitney_u(as[0], bs[0]).p_value == doctest::Approx(0.1));
}

TEST_CASE("agrees with the reference statistics fixtures") {
  std::ifstream in(std::string(TEST_DATA_DIR) + "/stats_fixtures.json");
  REQUIRE(in);
  const auto fixtures = nlohmann::json::parse(in);
  REQUIRE(fixtures.size() == 50);
  for (const auto& f : fixtures) {
    const auto a = f.at("a").get<std::vector<double>>();
    const auto b = f.at("b").get<std::vector<double>>();
    const auto r = mann_whitney_u(a, b, f.at("two_sided").get<bool>());
    CHECK(r.exact == f.at("exact").get<bool>());
    CHECK(r.u == doctest::Approx(f.at("u").get<double>()).epsilon(1e-9));
    CHECK(std::abs(r.p_value - f.at("p").get<double>()) <= 1e-6);
    CHECK(std::abs(cohens_d(a, b) - f.at("d").get<double>()) <= 1e-6);
  }
}
