#include "narrative/clusterer.hpp"

#include <algorithm>
#include <cmath>

#include "narrative/error.hpp"
#include "narrative/parallel.hpp"

namespace narrative {

namespace {

EmbeddingVector normalized(const EmbeddingVector& v) {
  const double n = norm(v);
  EmbeddingVector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] / n;
  return out;
}

}  // namespace

std::size_t ClusterState::article_count() const {
  std::set<std::string> articles;
  for (const auto& [domain, ids] : per_domain_articles) articles.insert(ids.begin(), ids.end());
  return articles.size();
}

void FitConfig::validate() const {
  if (!(lambda > 0.0 && lambda < 1.0)) throw UsageError("lambda must lie in (0, 1)");
  if (max_iterations == 0) throw UsageError("max_iterations must be positive");
  if (!(centroid_shift_tol >= 0.0)) throw UsageError("centroid_shift_tol must be non-negative");
}

AssignResult assign_batch(std::span<const PassageRecord> points,
                          std::span<const EmbeddingVector> centroids, std::size_t threads) {
  AssignResult result;
  result.assignments.resize(points.size());
  if (points.empty()) return result;
  parallel_for(points.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto& a = result.assignments[i];
      for (std::size_t k = 0; k < centroids.size(); ++k) {
        const double s = cosine_similarity(points[i].embedding, centroids[k]);
        if (s > a.similarity || a.cluster == kUnassigned) {
          a.similarity = s;
          a.cluster = static_cast<std::int64_t>(k);
        }
      }
    }
  });
  std::size_t worst = 0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    if (result.assignments[i].similarity < result.assignments[worst].similarity) worst = i;
  }
  result.worst = worst;
  return result;
}

bool converged(std::span<const EmbeddingVector> prev, std::span<const EmbeddingVector> next,
               bool assignments_changed, bool created, double tol) {
  if (created || assignments_changed) return false;
  const std::size_t n = std::min(prev.size(), next.size());
  for (std::size_t k = 0; k < n; ++k) {
    if (1.0 - cosine_similarity(prev[k], next[k]) > tol) return false;
  }
  return true;
}

const ClusterState& ClusterStore::cluster(ClusterId id) const {
  if (id >= clusters_.size()) throw DataError("unknown cluster id " + std::to_string(id));
  return clusters_[id];
}

std::vector<std::vector<std::size_t>> ClusterStore::members_by_cluster() const {
  std::vector<std::vector<std::size_t>> out(clusters_.size());
  for (std::size_t i = 0; i < members_.size(); ++i) out[members_[i].cluster_id].push_back(i);
  return out;
}

std::vector<EmbeddingVector> ClusterStore::centroids() const {
  std::vector<EmbeddingVector> out;
  out.reserve(clusters_.size());
  for (const auto& c : clusters_) out.push_back(c.centroid);
  return out;
}

FitReport ClusterStore::partial_fit_day(Date day, std::vector<PassageRecord> points,
                                        const FitConfig& config) {
  config.validate();
  if (last_day_ && day <= *last_day_) {
    throw DataError("day " + day.to_string() + " is not after last committed day " +
                    last_day_->to_string());
  }
  std::sort(points.begin(), points.end(),
            [](const PassageRecord& a, const PassageRecord& b) { return a.passage_id < b.passage_id; });
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    if (p.embedding.size() != dimension_) {
      throw DataError("passage " + p.passage_id + ": dimension " + std::to_string(p.embedding.size()) +
                      " does not match store dimension " + std::to_string(dimension_));
    }
    if (p.published_date != day) {
      throw DataError("passage " + p.passage_id + " is dated " + p.published_date.to_string() +
                      ", fitting " + day.to_string());
    }
    if (passage_ids_.count(p.passage_id) || (i > 0 && points[i - 1].passage_id == p.passage_id)) {
      throw DataError("passage " + p.passage_id + " already committed");
    }
  }

  const std::size_t n = points.size();
  const std::size_t existing = clusters_.size();
  std::vector<EmbeddingVector> centroids = this->centroids();
  std::vector<std::int64_t> assignment(n, kUnassigned);
  std::vector<bool> seeded(n, false);
  std::size_t created_today = 0;

  FitReport report;
  report.day = day;

  auto cluster_resultant = [&](std::size_t k, const std::vector<std::size_t>& idx) {
    EmbeddingVector r = k < existing ? clusters_[k].resultant : EmbeddingVector(dimension_, 0.0);
    for (const auto i : idx) {
      const auto& e = points[i].embedding;
      for (std::size_t d = 0; d < dimension_; ++d) r[d] += e[d];
    }
    return r;
  };

  auto recompute = [&](std::vector<EmbeddingVector>& target) {
    std::vector<std::vector<std::size_t>> by_cluster(target.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (assignment[i] != kUnassigned) by_cluster[static_cast<std::size_t>(assignment[i])].push_back(i);
    }
    parallel_for(target.size(), config.threads, [&](std::size_t begin, std::size_t end) {
      for (std::size_t k = begin; k < end; ++k) {
        if (by_cluster[k].empty()) {
          if (k < existing) target[k] = clusters_[k].centroid;
          continue;  // new cluster that lost every point keeps its last centroid
        }
        const auto r = cluster_resultant(k, by_cluster[k]);
        if (norm(r) > 0.0) target[k] = normalized(r);
      }
    });
  };

  for (std::size_t iter = 1; iter <= config.max_iterations && n > 0; ++iter) {
    report.iterations_run = iter;
    const auto batch = assign_batch(points, centroids, config.threads);
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (batch.assignments[i].cluster != assignment[i]) changed = true;
      assignment[i] = batch.assignments[i].cluster;
    }
    bool created = false;
    const bool may_create =
        config.max_new_clusters_per_day == 0 || created_today < config.max_new_clusters_per_day;
    if (batch.worst && may_create && batch.assignments[*batch.worst].similarity < config.lambda) {
      const std::size_t w = *batch.worst;
      assignment[w] = static_cast<std::int64_t>(centroids.size());
      seeded[w] = true;
      centroids.push_back(points[w].embedding);
      ++created_today;
      created = true;
    }
    const auto prev = centroids;
    recompute(centroids);
    if (converged(prev, centroids, changed, created, config.centroid_shift_tol)) {
      report.converged = true;
      break;
    }
  }
  if (n == 0) report.converged = true;

  // Only reachable when the iteration budget ran out before every point had a cluster.
  if (std::find(assignment.begin(), assignment.end(), kUnassigned) != assignment.end()) {
    const auto batch = assign_batch(points, centroids, config.threads);
    for (std::size_t i = 0; i < n; ++i) {
      if (assignment[i] == kUnassigned) assignment[i] = batch.assignments[i].cluster;
    }
    recompute(centroids);
  }

  // Compact new clusters, dropping any that ended the day empty.
  std::vector<std::size_t> counts(centroids.size(), 0);
  for (const auto a : assignment) ++counts[static_cast<std::size_t>(a)];
  std::vector<std::int64_t> remap(centroids.size(), kUnassigned);
  for (std::size_t k = 0; k < existing; ++k) remap[k] = static_cast<std::int64_t>(k);
  std::size_t next_id = existing;
  for (std::size_t k = existing; k < centroids.size(); ++k) {
    if (counts[k] == 0) {
      ++report.empty_clusters_dropped;
      continue;
    }
    remap[k] = static_cast<std::int64_t>(next_id++);
  }

  // Commit. Nothing above mutated the store.
  lambda_ = config.lambda;
  last_day_ = day;
  clusters_.resize(next_id);
  for (std::size_t k = existing; k < centroids.size(); ++k) {
    if (remap[k] == kUnassigned) continue;
    auto& c = clusters_[static_cast<std::size_t>(remap[k])];
    c.cluster_id = static_cast<ClusterId>(remap[k]);
    c.resultant.assign(dimension_, 0.0);
    c.created_on = day;
  }
  std::vector<std::vector<std::size_t>> by_cluster(next_id);
  for (std::size_t i = 0; i < n; ++i) {
    by_cluster[static_cast<std::size_t>(remap[static_cast<std::size_t>(assignment[i])])].push_back(i);
  }
  for (std::size_t k = 0; k < next_id; ++k) {
    if (by_cluster[k].empty()) continue;
    auto& c = clusters_[k];
    for (const auto i : by_cluster[k]) {
      const auto& e = points[i].embedding;
      for (std::size_t d = 0; d < dimension_; ++d) c.resultant[d] += e[d];
    }
    c.centroid = normalized(c.resultant);
    c.member_count += by_cluster[k].size();
    std::size_t new_articles = 0;
    for (const auto i : by_cluster[k]) {
      const auto& p = points[i];
      if (c.per_domain_articles[p.domain].insert(p.article_id).second) ++new_articles;
      ++c.per_domain_passages[p.domain];
    }
    if (new_articles > 0) c.per_day_articles[day] += new_articles;
  }
  double sim_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Membership m;
    m.cluster_id = static_cast<ClusterId>(remap[static_cast<std::size_t>(assignment[i])]);
    m.similarity = cosine_similarity(points[i].embedding, clusters_[m.cluster_id].centroid);
    m.seeded = seeded[i];
    sim_sum += m.similarity;
    passage_ids_.insert(points[i].passage_id);
    m.record = std::move(points[i]);
    members_.push_back(std::move(m));
  }
  report.points_assigned = n;
  report.clusters_created = next_id - existing;
  report.mean_assignment_similarity = n > 0 ? sim_sum / static_cast<double>(n) : 0.0;
  return report;
}

}  // namespace narrative
