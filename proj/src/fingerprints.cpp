#include "narrative/fingerprints.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "narrative/error.hpp"
#include "narrative/parallel.hpp"

namespace narrative {

bool is_rank_bucket(std::uint64_t bucket) {
  switch (bucket) {
    case 1'000: case 5'000: case 10'000: case 50'000: case 100'000: case 500'000:
    case 1'000'000: case 5'000'000: case 10'000'000: case 50'000'000:
      return true;
    default:
      return false;
  }
}

void RankTable::set(const std::string& domain, std::uint64_t bucket) {
  if (bucket != kUnranked && !is_rank_bucket(bucket)) {
    throw DataError("rank bucket " + std::to_string(bucket) + " for " + domain + " is not a known bucket");
  }
  buckets_[domain] = bucket;
}

std::uint64_t RankTable::bucket(const std::string& domain) const {
  const auto it = buckets_.find(domain);
  return it == buckets_.end() ? kUnranked : it->second;
}

RankTable RankTable::read(std::istream& in) {
  RankTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string domain, bucket;
    if (!(fields >> domain >> bucket)) throw DataError("rank file line " + std::to_string(lineno) + ": want domain and bucket");
    std::transform(domain.begin(), domain.end(), domain.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (bucket == "unranked") {
      table.set(domain, kUnranked);
      continue;
    }
    try {
      table.set(domain, static_cast<std::uint64_t>(std::stod(bucket)));
    } catch (const std::logic_error&) {
      throw DataError("rank file line " + std::to_string(lineno) + ": bad bucket '" + bucket + "'");
    }
  }
  return table;
}

std::vector<double> narrative_distribution(std::span<const double> counts, double epsilon) {
  if (counts.empty()) throw DataError("empty_narrative_space");
  double total = 0.0;
  for (const double c : counts) total += c + epsilon;
  if (!(total > 0.0)) throw DataError("narrative distribution has no mass");
  std::vector<double> out(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = (counts[i] + epsilon) / total;
  return out;
}

std::vector<SiteProfile> build_site_profiles(const ClusterStore& store,
                                             const std::vector<ClusterId>& retained,
                                             const RankTable& ranks, double epsilon) {
  std::map<std::string, SiteProfile> by_domain;
  for (const auto id : retained) {
    for (const auto& [domain, articles] : store.cluster(id).per_domain_articles) {
      if (articles.empty()) continue;
      auto& p = by_domain[domain];
      p.domain = domain;
      p.narrative_counts[id] = articles.size();
    }
  }
  std::vector<SiteProfile> out;
  for (auto& [domain, p] : by_domain) {
    p.rank_bucket = ranks.bucket(domain);
    std::vector<double> counts(retained.size(), 0.0);
    for (std::size_t i = 0; i < retained.size(); ++i) {
      const auto it = p.narrative_counts.find(retained[i]);
      if (it != p.narrative_counts.end()) counts[i] = static_cast<double>(it->second);
    }
    p.smoothed_distribution = narrative_distribution(counts, epsilon);
    out.push_back(std::move(p));
  }
  return out;
}

double js_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DataError("js_divergence: length mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = (p[i] + q[i]) * 0.5;
    double term_p = 0.0;
    double term_q = 0.0;
    if (p[i] > 0.0) term_p = p[i] * std::log2(p[i] / m);
    if (q[i] > 0.0) term_q = q[i] * std::log2(q[i] / m);
    sum += term_p + term_q;  // commutative, so swapping p and q is bit-identical
  }
  return std::clamp(0.5 * sum, 0.0, 1.0);
}

SiteGraph build_site_graph(const std::vector<SiteProfile>& profiles, double prune_below,
                           std::size_t threads) {
  SiteGraph g;
  for (const auto& p : profiles) g.nodes.push_back(p.domain);
  const std::size_t n = profiles.size();
  std::vector<std::vector<SiteEdge>> rows(n);
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t a = begin; a < end; ++a) {
      for (std::size_t b = a + 1; b < n; ++b) {
        const double w = 1.0 - js_divergence(profiles[a].smoothed_distribution,
                                             profiles[b].smoothed_distribution);
        if (w >= prune_below) rows[a].push_back({a, b, w});
      }
    }
  });
  for (auto& r : rows) g.edges.insert(g.edges.end(), r.begin(), r.end());
  return g;
}

CommunityPartition louvain_communities(const SiteGraph& graph, double resolution, std::uint64_t seed) {
  CommunityPartition out;
  if (graph.nodes.empty()) return out;
  WeightedGraph wg(graph.nodes.size());
  for (const auto& e : graph.edges) wg.add_edge(e.a, e.b, e.weight);
  const auto result = louvain(wg, resolution, seed);
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) out.community[graph.nodes[i]] = result.community[i];
  out.modularity = result.modularity;
  out.sweep_modularity = result.sweep_modularity;
  return out;
}

std::vector<double> aggregate_distribution(const std::vector<SiteProfile>& profiles,
                                           const std::vector<ClusterId>& retained, double epsilon) {
  std::vector<double> counts(retained.size(), 0.0);
  for (const auto& p : profiles) {
    for (std::size_t i = 0; i < retained.size(); ++i) {
      const auto it = p.narrative_counts.find(retained[i]);
      if (it != p.narrative_counts.end()) counts[i] += static_cast<double>(it->second);
    }
  }
  return narrative_distribution(counts, epsilon);
}

double corpus_similarity(std::span<const double> external, std::span<const double> aggregate) {
  return js_divergence(external, aggregate);
}

void export_edge_list(const SiteGraph& graph, std::ostream& out) {
  out << "domain_a\tdomain_b\tweight\n";
  for (const auto& e : graph.edges) {
    out << graph.nodes[e.a] << '\t' << graph.nodes[e.b] << '\t' << std::setprecision(17) << e.weight << '\n';
  }
}

void export_partition(const CommunityPartition& partition, std::ostream& out) {
  out << "domain\tcommunity_id\n";
  for (const auto& [domain, c] : partition.community) out << domain << '\t' << c << '\n';
}

}  // namespace narrative
