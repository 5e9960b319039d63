#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "narrative/clusterer.hpp"
#include "narrative/error.hpp"
#include "support/synth.hpp"

using namespace narrative;

namespace {

const Date kDay = Date::from_ymd(2022, 3, 1);

PassageRecord point(const std::string& id, EmbeddingVector v, Date day = kDay, const std::string& article = "") {
  return synth::record(id, article.empty() ? "art-" + id : article, "x.com", day, std::move(v));
}

std::vector<std::size_t> assignments_by_id(const ClusterStore& store) {
  std::vector<std::pair<std::string, std::size_t>> pairs;
  for (const auto& m : store.members()) pairs.emplace_back(m.record.passage_id, m.cluster_id);
  std::sort(pairs.begin(), pairs.end());
  std::vector<std::size_t> out;
  for (const auto& [id, c] : pairs) out.push_back(c);
  return out;
}

}  // namespace

TEST_CASE("assign_batch examples") {
  const std::vector<PassageRecord> one = {point("p", {1, 0})};
  auto r = assign_batch(one, {}, 1);
  REQUIRE(r.worst);
  CHECK(*r.worst == 0);
  CHECK(r.assignments[0].cluster == kUnassigned);

  const EmbeddingVector c1 = {1, 0, 0};
  const EmbeddingVector c2 = {0, 1, 0};
  const std::vector<EmbeddingVector> cents = {c1, c2};
  const std::vector<PassageRecord> pts = {
      point("a", synth::unit({0.9, 0.2, std::sqrt(1 - 0.81 - 0.04)})),
      point("b", synth::unit({0.3, 0.1, std::sqrt(1 - 0.09 - 0.01)})),
  };
  r = assign_batch(pts, cents, 2);
  CHECK(r.assignments[0].cluster == 0);
  CHECK(r.assignments[0].similarity == doctest::Approx(0.9));
  CHECK(r.assignments[1].cluster == 0);
  CHECK(r.assignments[1].similarity == doctest::Approx(0.3));
  CHECK(*r.worst == 1);

  // ties go to the lowest cluster id
  const std::vector<EmbeddingVector> twins = {c1, c1};
  r = assign_batch(std::vector<PassageRecord>{point("t", c1)}, twins);
  CHECK(r.assignments[0].cluster == 0);
}

TEST_CASE("assign_batch is identical across thread counts") {
  std::mt19937_64 rng(17);
  std::vector<PassageRecord> pts;
  for (int i = 0; i < 500; ++i) pts.push_back(point("p" + std::to_string(i), synth::random_unit(32, rng)));
  std::vector<EmbeddingVector> cents;
  for (int k = 0; k < 20; ++k) cents.push_back(synth::random_unit(32, rng));
  const auto base = assign_batch(pts, cents, 1);
  for (const std::size_t t : {2u, 3u, 8u}) {
    const auto other = assign_batch(pts, cents, t);
    CHECK(other.worst == base.worst);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(other.assignments[i].cluster == base.assignments[i].cluster);
      CHECK(other.assignments[i].similarity == base.assignments[i].similarity);
    }
  }
}

TEST_CASE("converged examples") {
  const std::vector<EmbeddingVector> a = {{1, 0}, {0, 1}};
  CHECK(converged(a, a, false, false, 1e-4));
  CHECK_FALSE(converged(a, a, false, true, 1e-4));
  CHECK_FALSE(converged(a, a, true, false, 1e-4));
  const double angle = std::acos(1.0 - 2e-4);
  const std::vector<EmbeddingVector> b = {{std::cos(angle), std::sin(angle)}, {0, 1}};
  CHECK_FALSE(converged(a, b, false, false, 1e-4));
  const double small = std::acos(1.0 - 5e-5);
  const std::vector<EmbeddingVector> c = {{std::cos(small), std::sin(small)}, {0, 1}};
  CHECK(converged(a, c, false, false, 1e-4));
}

TEST_CASE("cold start single point") {
  ClusterStore store(3);
  const auto report = store.partial_fit_day(kDay, {point("p", {0, 1, 0})}, {});
  CHECK(report.clusters_created == 1);
  CHECK(report.points_assigned == 1);
  REQUIRE(store.clusters().size() == 1);
  CHECK(store.clusters()[0].centroid == EmbeddingVector{0, 1, 0});
  CHECK(store.members()[0].seeded);
  CHECK(store.last_day() == kDay);
}

TEST_CASE("orthogonal points split at lambda 0.6") {
  ClusterStore store(2);
  const auto report = store.partial_fit_day(kDay, {point("a", {1, 0}), point("b", {0, 1})}, {});
  CHECK(report.clusters_created == 2);
  CHECK(report.converged);
  CHECK(store.members()[0].cluster_id != store.members()[1].cluster_id);
}

TEST_CASE("empty day commits nothing but the day") {
  ClusterStore store(2);
  const auto report = store.partial_fit_day(kDay, {}, {});
  CHECK(report.points_assigned == 0);
  CHECK(report.clusters_created == 0);
  CHECK(store.clusters().empty());
  CHECK(store.last_day() == kDay);
}

TEST_CASE("three planted directions match planted partition and the reference run") {
  std::mt19937_64 rng(23);
  const auto dirs = synth::orthonormal_directions(3, 16, rng);
  std::vector<PassageRecord> pts;
  std::vector<int> truth;
  for (int i = 0; i < 60; ++i) {
    pts.push_back(point("p" + std::to_string(100 + i), synth::near(dirs[i % 3], 0.4, rng)));
    truth.push_back(i % 3);
  }
  ClusterStore store(16);
  FitConfig cfg;
  cfg.threads = 4;
  const auto report = store.partial_fit_day(kDay, pts, cfg);
  CHECK(report.clusters_created == 3);
  CHECK(report.converged);
  const auto got = assignments_by_id(store);
  std::vector<int> got_int(got.begin(), got.end());
  CHECK(synth::adjusted_rand_index(got_int, truth) == doctest::Approx(1.0));

  synth::ReferenceDpMeans ref(0.60);
  CHECK(ref.fit_day(pts) == got);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t d = 0; d < 16; ++d) CHECK(store.clusters()[k].centroid[d] == doctest::Approx(ref.centroids()[k][d]).epsilon(1e-12));
  }
}

TEST_CASE("multi-day fits equal the reference and are thread independent") {
  const auto corpus = synth::planted_corpus(8, 60, 24, 4, kDay, 99, 30.0 * M_PI / 180.0);
  std::vector<ClusterStore> stores;
  for (const std::size_t threads : {1u, 3u, 8u}) {
    ClusterStore store(24);
    FitConfig cfg;
    cfg.threads = threads;
    for (int d = 0; d < 4; ++d) store.partial_fit_day(kDay + d, synth::on_day(corpus.records, kDay + d), cfg);
    stores.push_back(std::move(store));
  }
  CHECK(stores[0] == stores[1]);
  CHECK(stores[0] == stores[2]);

  synth::ReferenceDpMeans ref(0.60);
  std::vector<std::size_t> ref_all;
  std::vector<std::size_t> got_all;
  std::size_t offset = 0;
  for (int d = 0; d < 4; ++d) {
    const auto a = ref.fit_day(synth::on_day(corpus.records, kDay + d));
    ref_all.insert(ref_all.end(), a.begin(), a.end());
    for (std::size_t i = 0; i < a.size(); ++i) got_all.push_back(stores[0].members()[offset + i].cluster_id);
    offset += a.size();
  }
  CHECK(ref_all == got_all);
}

TEST_CASE("centroid is the normalised resultant of all members") {
  const auto corpus = synth::planted_corpus(5, 40, 12, 3, kDay, 5, 40.0 * M_PI / 180.0);
  ClusterStore store(12);
  for (int d = 0; d < 3; ++d) store.partial_fit_day(kDay + d, synth::on_day(corpus.records, kDay + d), {});
  const auto groups = store.members_by_cluster();
  for (const auto& c : store.clusters()) {
    EmbeddingVector sum(12, 0.0);
    for (const auto i : groups[c.cluster_id]) {
      for (std::size_t d = 0; d < 12; ++d) sum[d] += store.members()[i].record.embedding[d];
    }
    CHECK(c.member_count == groups[c.cluster_id].size());
    const auto u = synth::unit(sum);
    for (std::size_t d = 0; d < 12; ++d) CHECK(c.centroid[d] == doctest::Approx(u[d]).epsilon(1e-12));
    CHECK(norm(c.centroid) == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("history stays frozen") {
  const auto corpus = synth::planted_corpus(4, 30, 10, 3, kDay, 8, 45.0 * M_PI / 180.0);
  ClusterStore store(10);
  store.partial_fit_day(kDay, synth::on_day(corpus.records, kDay), {});
  const auto day1 = store.members();
  store.partial_fit_day(kDay + 1, synth::on_day(corpus.records, kDay + 1), {});
  store.partial_fit_day(kDay + 2, synth::on_day(corpus.records, kDay + 2), {});
  for (std::size_t i = 0; i < day1.size(); ++i) CHECK(store.members()[i] == day1[i]);
}

TEST_CASE("higher lambda never yields fewer clusters on planted data") {
  const auto corpus = synth::planted_corpus(6, 50, 16, 1, kDay, 12, 35.0 * M_PI / 180.0);
  std::size_t previous = 0;
  for (const double lambda : {0.2, 0.4, 0.6, 0.8, 0.9, 0.95}) {
    ClusterStore store(16);
    FitConfig cfg;
    cfg.lambda = lambda;
    cfg.max_iterations = 1000;
    store.partial_fit_day(kDay, corpus.records, cfg);
    CHECK(store.clusters().size() >= previous);
    previous = store.clusters().size();
    for (const auto& m : store.members()) CHECK(m.similarity >= lambda - 1e-9);
  }
}

TEST_CASE("creation cap limits new clusters per day") {
  std::vector<PassageRecord> pts;
  for (int i = 0; i < 5; ++i) {
    EmbeddingVector v(5, 0.0);
    v[static_cast<std::size_t>(i)] = 1.0;
    pts.push_back(point("p" + std::to_string(i), v));
  }
  ClusterStore store(5);
  FitConfig cfg;
  cfg.max_new_clusters_per_day = 2;
  const auto report = store.partial_fit_day(kDay, pts, cfg);
  CHECK(report.clusters_created == 2);
  CHECK(store.members().size() == 5);
}

TEST_CASE("per-day stats count distinct articles") {
  ClusterStore store(2);
  store.partial_fit_day(kDay, {point("a:0", {1, 0}, kDay, "a"), point("a:1", synth::unit({1, 0.01}), kDay, "a"),
                               point("b:0", synth::unit({1, 0.02}), kDay, "b")},
                        {});
  REQUIRE(store.clusters().size() == 1);
  const auto& c = store.clusters()[0];
  CHECK(c.article_count() == 2);
  CHECK(c.per_day_articles.at(kDay) == 2);
  CHECK(c.per_domain_passages.at("x.com") == 3);
}

TEST_CASE("invalid input leaves the store untouched") {
  ClusterStore store(2);
  store.partial_fit_day(kDay, {point("a", {1, 0})}, {});
  const ClusterStore before = store;
  CHECK_THROWS_AS(store.partial_fit_day(kDay, {point("b", {1, 0})}, {}), DataError);
  CHECK_THROWS_AS(store.partial_fit_day(kDay + 1, {point("b", {1, 0, 0}, kDay + 1)}, {}), DataError);
  CHECK_THROWS_AS(store.partial_fit_day(kDay + 1, {point("b", {1, 0}, kDay + 2)}, {}), DataError);
  CHECK_THROWS_AS(store.partial_fit_day(kDay + 1, {point("a", {1, 0}, kDay + 1)}, {}), DataError);
  CHECK_THROWS_AS(store.partial_fit_day(kDay + 1, {point("c", {1, 0}, kDay + 1), point("c", {0, 1}, kDay + 1)}, {}),
                  DataError);
  FitConfig bad;
  bad.lambda = 1.5;
  CHECK_THROWS_AS(store.partial_fit_day(kDay + 1, {}, bad), UsageError);
  CHECK(store == before);
  CHECK_THROWS_AS(store.cluster(7), DataError);
}
