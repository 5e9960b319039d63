#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "narrative/clusterer.hpp"
#include "narrative/louvain.hpp"

namespace narrative {

// Popularity rank buckets; kUnranked marks domains absent from the rank list.
inline constexpr std::uint64_t kUnranked = 0;
inline constexpr std::uint64_t kWorstRankBucket = 50'000'000;
bool is_rank_bucket(std::uint64_t bucket);

class RankTable {
 public:
  void set(const std::string& domain, std::uint64_t bucket);
  std::uint64_t bucket(const std::string& domain) const;  // kUnranked when missing
  std::size_t size() const { return buckets_.size(); }
  const std::map<std::string, std::uint64_t>& entries() const { return buckets_; }

  // "domain<TAB>bucket" lines; bucket is a number from the bucket set or "unranked".
  static RankTable read(std::istream& in);

 private:
  std::map<std::string, std::uint64_t> buckets_;
};

struct SiteProfile {
  std::string domain;
  std::uint64_t rank_bucket = kUnranked;
  std::map<ClusterId, std::size_t> narrative_counts;  // distinct articles per retained narrative
  std::vector<double> smoothed_distribution;          // indexed like the retained list
};

// counts[i] + epsilon, normalised. Throws DataError on an empty narrative space.
std::vector<double> narrative_distribution(std::span<const double> counts, double epsilon = 0.1);

// Profiles for every domain with at least one article in a retained narrative,
// sorted by domain.
std::vector<SiteProfile> build_site_profiles(const ClusterStore& store,
                                             const std::vector<ClusterId>& retained,
                                             const RankTable& ranks, double epsilon = 0.1);

// Jensen-Shannon divergence in bits, so the value lies in [0, 1]. Exactly symmetric.
double js_divergence(std::span<const double> p, std::span<const double> q);

struct SiteEdge {
  std::size_t a = 0;
  std::size_t b = 0;
  double weight = 0.0;  // 1 - JSD
};

struct SiteGraph {
  std::vector<std::string> nodes;
  std::vector<SiteEdge> edges;
};

// Complete graph over the profiles (a < b), dropping edges below prune_below.
SiteGraph build_site_graph(const std::vector<SiteProfile>& profiles, double prune_below = 0.0,
                           std::size_t threads = 1);

struct CommunityPartition {
  std::map<std::string, std::size_t> community;
  double modularity = 0.0;
  std::vector<double> sweep_modularity;
};

CommunityPartition louvain_communities(const SiteGraph& graph, double resolution = 1.0,
                                       std::uint64_t seed = 0);

// Pooled counts over all sites, smoothed like a single site.
std::vector<double> aggregate_distribution(const std::vector<SiteProfile>& profiles,
                                           const std::vector<ClusterId>& retained,
                                           double epsilon = 0.1);

double corpus_similarity(std::span<const double> external, std::span<const double> aggregate);

void export_edge_list(const SiteGraph& graph, std::ostream& out);
void export_partition(const CommunityPartition& partition, std::ostream& out);

}  // namespace narrative
