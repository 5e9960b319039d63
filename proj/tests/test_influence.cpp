#include <doctest.h>

#include <cmath>
#include <sstream>

#include "narrative/error.hpp"
#include "narrative/influence.hpp"
#include "support/influence_fixture.hpp"

using namespace narrative;

namespace {

const Date kStart = Date::from_ymd(2022, 3, 1);

NarrativeTimeline timeline(const std::vector<std::pair<std::string, int>>& articles) {
  std::vector<ArticleRef> refs;
  for (std::size_t i = 0; i < articles.size(); ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "a%04zu", i);
    refs.push_back({id, articles[i].first, kStart + articles[i].second});
  }
  return make_timeline(1, std::move(refs));
}

InfluenceConfig small_config() {
  InfluenceConfig c;
  c.min_instances = 5;
  c.rng_seed = 7;
  return c;
}

}  // namespace

TEST_CASE("peak day is the busiest day, earliest on ties") {
  CHECK(peak_day({{kStart, 3}, {kStart + 1, 7}, {kStart + 2, 7}}) == kStart + 1);
  CHECK(peak_day({{kStart, 1}, {kStart + 1, 2}, {kStart + 2, 5}, {kStart + 3, 1}}) == kStart + 2);
  CHECK_THROWS_AS(peak_day({}), DataError);
}

TEST_CASE("timelines count distinct articles in date order") {
  auto t = make_timeline(3, {{"b", "x.com", kStart + 1}, {"a", "y.com", kStart}, {"b", "x.com", kStart + 1}});
  REQUIRE(t.total_articles() == 2);
  CHECK(t.articles[0].article_id == "a");
  CHECK(t.first_day() == kStart);
  CHECK(t.domain_first_date.at("x.com") == kStart + 1);
}

TEST_CASE("first-day publishers originate") {
  auto t = timeline({{"a.com", 0}, {"b.com", 0}, {"c.com", 1}, {"c.com", 2}, {"c.com", 2}, {"c.com", 2}});
  const auto r = classify_roles(t);
  CHECK(r.originators == std::set<std::string>{"a.com", "b.com"});
  CHECK(r.peak_day == kStart + 2);
  CHECK(r.first_day == kStart);
}

TEST_CASE("amplifiers sit within the first fifteen percent before the peak") {
  // 100 articles; peak on day 5. Domain i publishes article i.
  std::vector<std::pair<std::string, int>> a;
  a.push_back({"origin.com", 0});
  for (int i = 1; i < 16; ++i) a.push_back({"d" + std::to_string(100 + i) + ".com", 1});
  for (int i = 16; i < 100; ++i) a.push_back({"filler.com", i < 40 ? 3 : 5});
  const auto r = classify_roles(timeline(a), 0.15);
  CHECK(r.total_articles == 100);
  CHECK(r.originators == std::set<std::string>{"origin.com"});
  CHECK(r.amplifiers.count("d114.com") == 1);  // 15th article
  CHECK(r.amplifiers.count("d115.com") == 0);  // 16th article
  CHECK(r.amplifiers.count("filler.com") == 0);
  CHECK(r.amplifiers.size() == 14);
}

TEST_CASE("publishing only after the peak is neither role") {
  auto t = timeline({{"a.com", 0}, {"b.com", 1}, {"b.com", 1}, {"late.com", 2}});
  const auto r = classify_roles(t, 0.9);
  CHECK(r.peak_day == kStart + 1);
  CHECK(r.originators.count("late.com") == 0);
  CHECK(r.amplifiers.count("late.com") == 0);
  CHECK(r.amplifiers.count("b.com") == 0);  // first article on the peak day
}

TEST_CASE("rank weights") {
  CHECK(rank_weight(1'000) == doctest::Approx(1.0 / std::log2(1001.0)).epsilon(1e-12));
  CHECK(rank_weight(1'000) == doctest::Approx(0.10034).epsilon(1e-4));
  CHECK(rank_weight(kUnranked) == rank_weight(kWorstRankBucket));
  const std::uint64_t buckets[] = {1'000, 5'000, 10'000, 50'000, 100'000, 500'000,
                                   1'000'000, 5'000'000, 10'000'000, 50'000'000};
  for (std::size_t i = 1; i < std::size(buckets); ++i) CHECK(rank_weight(buckets[i]) < rank_weight(buckets[i - 1]));
}

TEST_CASE("config validation") {
  InfluenceConfig c;
  c.amplify_cutoff = 1.0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = {};
  c.bootstrap_iterations = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
  c = {};
  c.weight_scale = 0;
  CHECK_THROWS_AS(c.validate(), UsageError);
}

TEST_CASE("planted origination effect is detected") {
  const auto f = synth::influence_fixture(30, 16, 8, 3, 11);
  InfluenceAnalyzer an(f.timelines, f.ranks, small_config());
  const auto rep = an.origination_effect("target.com");
  REQUIRE_FALSE(rep.skipped);
  CHECK(rep.eligible_narratives == f.originated);
  CHECK(rep.comparison_narratives == f.joined);
  CHECK(rep.weighted_external_delta > 0.0);
  CHECK(rep.cohens_d > 0.8);
  CHECK(rep.p_value < 0.01);
  CHECK(rep.peak_delta_days == doctest::Approx(-10.0));
  const auto peak = an.time_to_peak_effect("target.com", Role::kOriginate);
  CHECK(peak.delta_days == doctest::Approx(-10.0));
}

TEST_CASE("groups exclude the domain itself and originators") {
  const auto f = synth::influence_fixture(30, 8, 4, 3, 5);
  InfluenceConfig c = small_config();
  c.min_instances = 2;
  InfluenceAnalyzer an(f.timelines, f.ranks, c);
  const auto g = an.groups("target.com", Role::kOriginate);
  REQUIRE(g.a.size() == 4);
  REQUIRE(g.b.size() == 4);
  // The pool is smaller than the subset size, so every site is drawn each time.
  std::size_t ia = 0, ib = 0;
  for (std::size_t n = 0; n < f.timelines.size(); ++n) {
    const auto& t = f.timelines[n];
    const auto& r = an.roles()[n];
    double expected = 0.0;
    for (const auto& a : t.articles) {
      if (a.date - t.first_day() >= 7 || a.domain == "target.com" || r.originators.count(a.domain)) continue;
      expected += rank_weight(f.ranks.bucket(a.domain));
    }
    const bool in_a = r.originators.count("target.com") > 0;
    CHECK((in_a ? g.a[ia++] : g.b[ib++]) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("equal groups give no effect") {
  const auto f = synth::influence_fixture(30, 16, 8, 1, 11);
  InfluenceConfig c = small_config();
  InfluenceAnalyzer an(f.timelines, f.ranks, c);
  // Same external volume on both sides: any gap comes from rank weights alone.
  const auto rep = an.origination_effect("target.com");
  REQUIRE_FALSE(rep.skipped);
  CHECK(std::abs(rep.cohens_d) < 1.5);

  std::vector<NarrativeTimeline> twins;
  for (ClusterId n = 0; n < 10; ++n) {
    std::vector<ArticleRef> refs{{"x", "ext.com", kStart + 2}};
    if (n % 2 == 0) {
      refs.push_back({"o", "target.com", kStart});
    } else {
      refs.push_back({"o", "other.com", kStart});
      refs.push_back({"j", "target.com", kStart + 1});
    }
    twins.push_back(make_timeline(n, refs));
  }
  InfluenceAnalyzer same(twins, {}, c);
  const auto eq = same.origination_effect("target.com");
  REQUIRE_FALSE(eq.skipped);
  CHECK(eq.weighted_external_delta == 0.0);
  CHECK(eq.cohens_d == 0.0);
  CHECK(eq.p_value == doctest::Approx(1.0));
}

TEST_CASE("too few instances are skipped") {
  const auto f = synth::influence_fixture(30, 48, 24, 3, 3);
  InfluenceConfig c;
  c.min_instances = 25;
  InfluenceAnalyzer an(f.timelines, f.ranks, c);
  const auto rep = an.origination_effect("target.com");
  CHECK(rep.eligible_narratives == 24);
  CHECK(rep.skipped);
  CHECK(rep.skip_reason == "insufficient_instances");
  CHECK_THROWS_AS(an.time_to_peak_effect("target.com", Role::kOriginate), DataError);
  c.min_instances = 24;
  InfluenceAnalyzer enough(f.timelines, f.ranks, c);
  CHECK_FALSE(enough.origination_effect("target.com").skipped);
  CHECK_THROWS_AS(enough.origination_effect("nobody.com"), DataError);
}

TEST_CASE("results do not depend on thread count and reruns are identical") {
  const auto f = synth::influence_fixture(30, 30, 15, 3, 17);
  InfluenceConfig c = small_config();
  c.subset_size = 10;
  c.bootstrap_iterations = 100;
  InfluenceAnalyzer one(f.timelines, f.ranks, c);
  c.threads = 4;
  InfluenceAnalyzer four(f.timelines, f.ranks, c);
  for (const auto role : {Role::kOriginate, Role::kAmplify}) {
    const auto a = one.analyze_all(role);
    const auto b = four.analyze_all(role);
    CHECK(a == b);
    std::ostringstream sa, sb;
    export_effect_reports(a, sa, true);
    export_effect_reports(one.analyze_all(role), sb, true);
    CHECK(sa.str() == sb.str());
  }
}

TEST_CASE("scaling every weight leaves the test statistics unchanged") {
  const auto f = synth::influence_fixture(30, 16, 8, 3, 23);
  InfluenceConfig c = small_config();
  c.subset_size = 12;
  InfluenceAnalyzer base(f.timelines, f.ranks, c);
  c.weight_scale = 7.0;
  InfluenceAnalyzer scaled(f.timelines, f.ranks, c);
  const auto a = base.origination_effect("target.com");
  const auto b = scaled.origination_effect("target.com");
  CHECK(b.weighted_external_delta == doctest::Approx(7.0 * a.weighted_external_delta).epsilon(1e-12));
  CHECK(b.cohens_d == doctest::Approx(a.cohens_d).epsilon(1e-12));
  CHECK(b.p_value == doctest::Approx(a.p_value).epsilon(1e-12));
  CHECK(b.u_statistic == a.u_statistic);
}

TEST_CASE("bonferroni uses the number of tested domains") {
  const auto f = synth::influence_fixture(30, 16, 8, 3, 11);
  InfluenceAnalyzer an(f.timelines, f.ranks, small_config());
  const auto all = an.analyze_all(Role::kOriginate);
  std::size_t tested = 0;
  for (const auto& r : all) tested += r.skipped ? 0 : 1;
  REQUIRE(tested >= 1);
  for (const auto& r : all) {
    CHECK(r.num_comparisons == tested);
    CHECK(r.significant == (!r.skipped && r.p_value < 0.05 / static_cast<double>(tested)));
  }
}

TEST_CASE("lag profile partitions articles around the peak") {
  const auto f = synth::influence_fixture(30, 10, 5, 3, 2);
  InfluenceAnalyzer an(f.timelines, f.ranks, small_config());
  const auto lag = an.lag_profile();
  std::size_t total = 0, sum = 0, before = 0;
  for (const auto& t : f.timelines) total += t.total_articles();
  for (const auto& [offset, n] : lag.histogram) {
    sum += n;
    if (offset < 0) before += n;
  }
  CHECK(lag.total == total);
  CHECK(sum == total);
  CHECK(lag.before_peak == before);
  CHECK(lag.proportion_before == doctest::Approx(double(before) / double(total)));
  std::size_t split = 0;
  for (const std::uint64_t b : {std::uint64_t{1'000}, std::uint64_t{5'000}, std::uint64_t{10'000},
                                std::uint64_t{50'000}, std::uint64_t{100'000}, std::uint64_t{500'000},
                                std::uint64_t{1'000'000}, std::uint64_t{5'000'000}, std::uint64_t{10'000'000},
                                std::uint64_t{50'000'000}, kUnranked}) {
    split += an.lag_profile({b}).total;
  }
  CHECK(split == total);
}

TEST_CASE("effect report export") {
  const auto f = synth::influence_fixture(30, 16, 8, 3, 11);
  InfluenceAnalyzer an(f.timelines, f.ranks, small_config());
  std::ostringstream tsv, jsonl;
  const auto all = an.analyze_all(Role::kOriginate);
  export_effect_reports(all, tsv, false);
  export_effect_reports(all, jsonl, true);
  CHECK(tsv.str().find("target.com") != std::string::npos);
  CHECK(jsonl.str().find("\"target.com\"") != std::string::npos);
}
