#pragma once

#include <algorithm>
#include <map>
#include <random>
#include <vector>

#include "narrative/watch.hpp"
#include "support/synth.hpp"

namespace synth {

struct MatchFixture {
  narrative::ClusterStore store;
  std::vector<narrative::ClusterId> retained;
  std::vector<narrative::QueryPassage> queries;
};

// A fitted store over a planted corpus plus queries scattered at 0..60 degrees
// from random members.
inline MatchFixture match_fixture(std::size_t clusters, std::size_t per_cluster, std::size_t dim,
                                  std::size_t queries, std::uint64_t seed) {
  MatchFixture f;
  const Date start = Date::from_ymd(2022, 3, 1);
  const auto corpus = planted_corpus(clusters, per_cluster, dim, 3, start, seed, 25.0 * M_PI / 180.0);
  f.store = narrative::ClusterStore(dim);
  narrative::FitConfig cfg;
  for (int d = 0; d < 3; ++d) f.store.partial_fit_day(start + d, on_day(corpus.records, start + d), cfg);
  for (narrative::ClusterId c = 0; c < f.store.clusters().size(); ++c) f.retained.push_back(c);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  std::uniform_real_distribution<double> angle(0.0, 60.0 * M_PI / 180.0);
  const auto& members = f.store.members();
  for (std::size_t q = 0; q < queries; ++q) {
    narrative::QueryPassage p;
    p.passage_id = "q" + std::to_string(q);
    p.embedding = at_angle(members[rng() % members.size()].record.embedding, angle(rng), rng);
    p.text = "query " + std::to_string(q);
    f.queries.push_back(std::move(p));
  }
  return f;
}

// Every retained narrative with a member at or above the threshold, by full scan.
inline std::vector<std::vector<std::pair<narrative::ClusterId, double>>> brute_force_matches(
    const narrative::ClusterStore& store, const std::vector<narrative::ClusterId>& retained,
    const std::vector<narrative::QueryPassage>& queries, double threshold) {
  std::vector<std::vector<std::pair<narrative::ClusterId, double>>> out;
  for (const auto& q : queries) {
    std::map<narrative::ClusterId, double> best;
    for (const auto& m : store.members()) {
      if (!std::binary_search(retained.begin(), retained.end(), m.cluster_id)) continue;
      const double s = naive_dot(q.embedding, m.record.embedding);
      if (s < threshold) continue;
      auto [it, fresh] = best.emplace(m.cluster_id, s);
      if (!fresh) it->second = std::max(it->second, s);
    }
    out.emplace_back(best.begin(), best.end());
  }
  return out;
}

}  // namespace synth
