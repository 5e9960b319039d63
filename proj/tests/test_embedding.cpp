#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "narrative/embedding.hpp"
#include "support/synth.hpp"

using namespace narrative;

namespace {

PassageRecord rec(const std::string& id, EmbeddingVector v, const std::string& article = "a") {
  return synth::record(id, article, "x.com", Date::from_ymd(2022, 3, 1), std::move(v));
}

}  // namespace

TEST_CASE("cosine examples") {
  const EmbeddingVector v = synth::unit({0.3, -0.4, 0.5, 0.1});
  EmbeddingVector neg = v;
  for (auto& x : neg) x = -x;
  CHECK(cosine_similarity(v, v) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cosine_similarity(EmbeddingVector{1, 0, 0}, EmbeddingVector{0, 1, 0}) == 0.0);
  CHECK(cosine_similarity(v, neg) == doctest::Approx(-1.0).epsilon(1e-15));
}

TEST_CASE("dot is exactly symmetric and matches naive summation closely") {
  std::mt19937_64 rng(3);
  for (const std::size_t dim : {1u, 7u, 8u, 9u, 64u, 768u, 1000u}) {
    for (int t = 0; t < 50; ++t) {
      const auto a = synth::random_unit(dim, rng);
      const auto b = synth::random_unit(dim, rng);
      CHECK(dot(a, b) == dot(b, a));
      CHECK(dot(a, b) == doctest::Approx(synth::naive_dot(a, b)).epsilon(1e-12));
      CHECK(std::abs(dot(a, b)) <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("validate_and_normalize") {
  EmbeddingVector v(768, 0.0);
  v[0] = 1.0004;
  auto c = validate_and_normalize(v, 768);
  CHECK_FALSE(c.issue);
  CHECK_FALSE(c.out_of_tolerance);
  CHECK(norm(v) == doctest::Approx(1.0).epsilon(1e-15));

  EmbeddingVector zeros(768, 0.0);
  CHECK(validate_and_normalize(zeros, 768).issue == VectorIssue::kZeroVector);

  EmbeddingVector short_v(767, 0.1);
  CHECK(validate_and_normalize(short_v, 768).issue == VectorIssue::kBadDimension);

  EmbeddingVector nan_v(4, 0.5);
  nan_v[2] = std::nan("");
  CHECK(validate_and_normalize(nan_v, 4).issue == VectorIssue::kNonFinite);

  EmbeddingVector far{2.0, 0.0};
  c = validate_and_normalize(far, 2);
  CHECK_FALSE(c.issue);
  CHECK(c.out_of_tolerance);
  CHECK(far[0] == 1.0);
}

TEST_CASE("ingest rejects bad records with reasons") {
  EmbeddingStore store(4);
  std::vector<PassageRecord> batch = {
      rec("p1", {1, 0, 0, 0}),
      rec("p2", {0, 0, 0, 0}),
      rec("p3", {1, 0, 0}),
      rec("p1", {0, 1, 0, 0}),
      rec("", {0, 1, 0, 0}),
  };
  const auto report = store.ingest(batch, 2);
  CHECK(report.accepted == 1);
  CHECK(report.rejected == 4);
  CHECK(report.reasons.at("zero_vector") == 1);
  CHECK(report.reasons.at("bad_dimension") == 1);
  CHECK(report.reasons.at("duplicate_passage_id") == 1);
  CHECK(report.reasons.at("missing_identity") == 1);
  CHECK(store.size() == 1);
  // (article, domain, date, ordinal, vector): {0,1,0,0} sorts before {1,0,0,0}
  CHECK(store.find("p1")->embedding == EmbeddingVector{0, 1, 0, 0});
}

TEST_CASE("ingest result does not depend on arrival order or threads") {
  std::mt19937_64 rng(5);
  std::vector<PassageRecord> batch;
  for (int i = 0; i < 300; ++i) {
    const std::string id = "p" + std::to_string(rng() % 150);
    batch.push_back(rec(id, synth::gaussian(16, rng), "a" + std::to_string(rng() % 5)));
  }
  EmbeddingStore reference(16);
  reference.ingest(batch, 1);
  for (int t = 0; t < 10; ++t) {
    std::shuffle(batch.begin(), batch.end(), rng);
    EmbeddingStore other(16);
    other.ingest(batch, 1 + t % 4);
    CHECK(other.records() == reference.records());
  }
}

TEST_CASE("ingest across batches keeps the smaller duplicate") {
  EmbeddingStore a(2), b(2);
  a.ingest({rec("p", {1, 0})});
  a.ingest({rec("p", {0, 1})});
  b.ingest({rec("p", {0, 1})});
  b.ingest({rec("p", {1, 0})});
  CHECK(a.records() == b.records());
}

TEST_CASE("read_embedding_records counts malformed lines") {
  std::istringstream in(
      R"({"passage_id":"p","article_id":"a","domain":"X.com","published_date":"2022-03-01","ordinal":1,"vector":[1,0],"text":"hi"})"
      "\nnot json\n"
      R"({"passage_id":"q","article_id":"a","domain":"x.com","published_date":"bad","vector":[1,0]})"
      "\n");
  IngestReport report;
  const auto records = read_embedding_records(in, report);
  REQUIRE(records.size() == 1);
  CHECK(records[0].domain == "x.com");
  CHECK(records[0].text == std::optional<std::string>("hi"));
  CHECK(report.reasons.at("malformed") == 2);
}

TEST_CASE("on_day selects one publication day") {
  EmbeddingStore store(2);
  auto r1 = rec("p1", {1, 0});
  auto r2 = rec("p2", {0, 1});
  r2.published_date = Date::from_ymd(2022, 3, 2);
  store.ingest({r1, r2});
  const auto day = store.on_day(Date::from_ymd(2022, 3, 2));
  REQUIRE(day.size() == 1);
  CHECK(day[0].passage_id == "p2");
}
