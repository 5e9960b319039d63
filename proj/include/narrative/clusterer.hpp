#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "narrative/date.hpp"
#include "narrative/embedding.hpp"

namespace narrative {

using ClusterId = std::uint32_t;
inline constexpr std::int64_t kUnassigned = -1;

struct ClusterState {
  ClusterId cluster_id = 0;
  EmbeddingVector resultant;  // sum of member embeddings
  EmbeddingVector centroid;   // resultant / |resultant|
  std::size_t member_count = 0;
  std::map<std::string, std::set<std::string>> per_domain_articles;
  std::map<std::string, std::size_t> per_domain_passages;
  std::map<Date, std::size_t> per_day_articles;  // distinct articles first assigned that day
  Date created_on;

  std::size_t article_count() const;
  bool operator==(const ClusterState&) const = default;
};

// A committed passage. Assignments are frozen once committed.
struct Membership {
  PassageRecord record;
  ClusterId cluster_id = 0;
  double similarity = 0.0;  // to the assigned centroid at commit time
  bool seeded = false;      // this point seeded its cluster

  bool operator==(const Membership&) const = default;
};

struct FitConfig {
  double lambda = 0.60;  // minimum cosine similarity before a new cluster is spawned
  std::size_t max_iterations = 50;
  double centroid_shift_tol = 1e-4;
  std::size_t max_new_clusters_per_day = 0;  // 0 = unlimited
  std::size_t threads = 1;

  void validate() const;
};

struct FitReport {
  Date day;
  std::size_t points_assigned = 0;
  std::size_t clusters_created = 0;
  std::size_t iterations_run = 0;
  double mean_assignment_similarity = 0.0;
  bool converged = false;
  std::size_t empty_clusters_dropped = 0;

  bool operator==(const FitReport&) const = default;
};

struct PointAssignment {
  std::int64_t cluster = kUnassigned;
  double similarity = -std::numeric_limits<double>::infinity();
};

struct AssignResult {
  std::vector<PointAssignment> assignments;  // aligned with input points
  std::optional<std::size_t> worst;          // lowest best-similarity, lowest index on ties
};

// Maps every point to its most similar centroid (ties: lowest cluster id).
// Data-parallel over points; the result is identical for any thread count.
AssignResult assign_batch(std::span<const PassageRecord> points,
                          std::span<const EmbeddingVector> centroids, std::size_t threads = 1);

// True iff nothing was created, no assignment changed, and no centroid moved
// by more than tol in (1 - cosine). Extra trailing entries in next (new
// clusters) are ignored.
bool converged(std::span<const EmbeddingVector> prev, std::span<const EmbeddingVector> next,
               bool assignments_changed, bool created, double tol);

class ClusterStore {
 public:
  explicit ClusterStore(std::size_t dimension = kDefaultDimension) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  double lambda() const { return lambda_; }
  std::optional<Date> last_day() const { return last_day_; }
  const std::vector<ClusterState>& clusters() const { return clusters_; }
  const std::vector<Membership>& members() const { return members_; }
  const ClusterState& cluster(ClusterId id) const;
  bool has_cluster(ClusterId id) const { return id < clusters_.size(); }
  bool has_passage(const std::string& passage_id) const { return passage_ids_.count(passage_id) > 0; }

  // Member indices grouped by cluster, in commit order.
  std::vector<std::vector<std::size_t>> members_by_cluster() const;
  std::vector<EmbeddingVector> centroids() const;

  // Delayed-creation DP-Means over the day's points against the committed
  // clusters. Historical assignments are never revisited. On any error the
  // store is left untouched.
  FitReport partial_fit_day(Date day, std::vector<PassageRecord> points, const FitConfig& config);

  bool operator==(const ClusterStore&) const = default;

 private:
  friend class SnapshotCodec;

  std::size_t dimension_;
  double lambda_ = 0.60;
  std::optional<Date> last_day_;
  std::vector<ClusterState> clusters_;
  std::vector<Membership> members_;
  std::set<std::string> passage_ids_;
};

}  // namespace narrative
