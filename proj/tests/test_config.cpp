#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "narrative/config.hpp"
#include "narrative/error.hpp"

using namespace narrative;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& text) {
  const auto p = std::filesystem::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

auto env_of(std::map<std::string, std::string> vars) {
  return [vars = std::move(vars)](const std::string& k) -> std::optional<std::string> {
    const auto it = vars.find(k);
    if (it == vars.end()) return std::nullopt;
    return it->second;
  };
}

auto no_env = env_of({});

}  // namespace

TEST_CASE("defaults") {
  const PipelineConfig c;
  CHECK(c.lambda == 0.60);
  CHECK(c.dimension == 768);
  CHECK(c.min_articles == 25);
  CHECK(c.max_single_site_share == 0.5);
  CHECK(c.epsilon == 0.1);
  CHECK(c.bootstrap_iterations == 250);
  CHECK(c.subset_size == 100);
  CHECK(c.amplify_cutoff == 0.15);
  CHECK(c.match_threshold == 0.60);
  CHECK(c.trending_min_volume == 25);
  CHECK_NOTHROW(c.validate());
  CHECK(c.fit_config().lambda == 0.60);
  CHECK(c.influence_config().rng_seed == c.rng_seed);
  CHECK(c.study_window().start == Date::from_ymd(1970, 1, 1));
  CHECK_FALSE(c.endpoint(c.embedding_url).has_value());
}

TEST_CASE("config text parsing") {
  const auto kv = parse_config_text("# comment\n lambda = 0.7  # trailing\n\nmin_articles=10\n");
  REQUIRE(kv.size() == 2);
  CHECK(kv[0] == std::make_pair(std::string("lambda"), std::string("0.7")));
  CHECK(kv[1].second == "10");
  CHECK_THROWS_AS(parse_config_text("lambda 0.7"), UsageError);
}

TEST_CASE("environment beats --set beats file") {
  const auto file = write_temp("narrative_cfg_test.conf", "lambda = 0.7\nmin_articles = 10\ntop_k_keywords = 3\n");
  const auto c = load_config(file, {{"min_articles", "12"}, {"top_k_keywords", "4"}},
                             env_of({{"NARRATIVE_TOP_K_KEYWORDS", "6"}}));
  CHECK(c.lambda == 0.7);
  CHECK(c.min_articles == 12);
  CHECK(c.top_k_keywords == 6);
  std::filesystem::remove(file);
  CHECK_THROWS_AS(load_config(std::filesystem::path("/nonexistent/narrative.conf"), {}, no_env), UsageError);
}

TEST_CASE("unknown keys and bad values are usage errors") {
  PipelineConfig c;
  CHECK_THROWS_AS(c.set("lamda", "0.6"), UsageError);
  CHECK_THROWS_AS(c.set("lambda", "high"), UsageError);
  CHECK_THROWS_AS(c.set("min_articles", "-1"), UsageError);
  CHECK_THROWS_AS(c.set("light_stemming", "maybe"), UsageError);
  CHECK_THROWS_AS(c.set("study_start", "2022-13-01"), UsageError);
  CHECK_THROWS_AS(load_config(std::nullopt, {{"bogus", "1"}}, no_env), UsageError);
  CHECK_THROWS_AS(load_config(std::nullopt, {}, env_of({{"NARRATIVE_LAMBDA", "x"}})), UsageError);
}

TEST_CASE("validation") {
  auto bad = [](const std::string& k, const std::string& v) {
    PipelineConfig c;
    c.set(k, v);
    return c;
  };
  CHECK_THROWS_AS(bad("lambda", "1.5").validate(), UsageError);
  CHECK_THROWS_AS(bad("max_single_site_share", "0").validate(), UsageError);
  CHECK_THROWS_AS(bad("amplify_cutoff", "1").validate(), UsageError);
  CHECK_THROWS_AS(bad("dimension", "0").validate(), UsageError);
  CHECK_THROWS_AS(bad("max_in_flight", "0").validate(), UsageError);
  CHECK_THROWS_AS(bad("sweep_thresholds", "0.6,1.5").validate(), UsageError);
  PipelineConfig w;
  w.set("study_start", "2022-03-10");
  w.set("study_end", "2022-03-01");
  CHECK_THROWS_AS(w.validate(), UsageError);
  CHECK_THROWS_AS(load_config(std::nullopt, {{"lambda", "2"}}, no_env), UsageError);
}

TEST_CASE("list and date values") {
  PipelineConfig c;
  c.set("sweep_thresholds", "0.6, 0.7,0.9");
  CHECK(c.sweep_thresholds == std::vector<double>{0.6, 0.7, 0.9});
  c.set("study_start", "2022-03-01");
  c.set("study_end", "2022-05-31");
  CHECK(c.study_window().start == Date::from_ymd(2022, 3, 1));
  CHECK(c.study_window().end == Date::from_ymd(2022, 5, 31));
  c.set("study_end", "");
  CHECK_FALSE(c.study_end.has_value());
  c.set("classifier_url", "http://127.0.0.1:9/classify");
  c.set("provider_timeout_ms", "250");
  const auto e = c.endpoint(c.classifier_url);
  REQUIRE(e.has_value());
  CHECK(e->timeout.count() == 250);
}

TEST_CASE("config hash") {
  CHECK(fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cull);
  const PipelineConfig a;
  PipelineConfig b;
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  b.set("data_root", "/elsewhere");
  b.set("threads", "8");
  b.set("embedding_url", "http://127.0.0.1:1/embed");
  CHECK(a.hash() == b.hash());
  b.set("lambda", "0.61");
  CHECK(a.hash() != b.hash());
  PipelineConfig c;
  c.set("rng_seed", "1");
  CHECK(a.hash() != c.hash());
  // Serialization is sorted by key and stable under set order.
  PipelineConfig x, y;
  x.set("lambda", "0.7");
  x.set("min_articles", "9");
  y.set("min_articles", "9");
  y.set("lambda", "0.7");
  CHECK(x.serialize() == y.serialize());
  const auto s = x.serialize();
  CHECK(s.find("lambda=0.7\n") != std::string::npos);
  CHECK(s.find("data_root") == std::string::npos);
  // Serialized values read back to the same configuration.
  PipelineConfig z;
  for (const auto& [k, v] : parse_config_text(x.serialize())) z.set(k, v);
  CHECK(z.hash() == x.hash());
  CHECK(PipelineConfig::keys().size() > 30);
}
