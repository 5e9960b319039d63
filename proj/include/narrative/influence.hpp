#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "narrative/fingerprints.hpp"
#include "narrative/timeline.hpp"

namespace narrative {

enum class Role { kOriginate, kAmplify };
const char* to_string(Role role);

struct RoleAssignment {
  ClusterId cluster_id = 0;
  std::set<std::string> originators;
  std::set<std::string> amplifiers;
  Date first_day;
  Date peak_day;
  std::size_t total_articles = 0;
};

// Originators publish on the first day. Amplifiers did not originate, and
// their first article predates the peak and sits within the first
// ceil(cutoff * total) articles in (date, article_id) order.
RoleAssignment classify_roles(const NarrativeTimeline& timeline, double amplify_cutoff = 0.15);

// 1 / log2(bucket + 1); unranked domains take the worst bucket.
double rank_weight(std::uint64_t rank_bucket);

struct InfluenceConfig {
  std::size_t bootstrap_iterations = 250;
  std::size_t subset_size = 100;  // clamped to the external pool when larger
  int window_days = 7;            // articles dated in [anchor, anchor + window_days)
  double amplify_cutoff = 0.15;
  std::size_t min_instances = 25;
  double alpha = 0.05;
  std::size_t num_comparisons = 0;  // 0: number of domains tested
  double weight_scale = 1.0;        // multiplies every rank weight
  std::uint64_t rng_seed = 0;
  std::size_t threads = 1;

  void validate() const;
};

struct EffectReport {
  std::string domain;
  Role role = Role::kOriginate;
  bool skipped = false;
  std::string skip_reason;
  std::size_t eligible_narratives = 0;  // group A size
  std::size_t comparison_narratives = 0;  // group B size
  double weighted_external_delta = 0.0;
  double cohens_d = 0.0;
  double u_statistic = 0.0;
  double p_value = 1.0;
  bool significant = false;
  double peak_delta_days = 0.0;
  double peak_cohens_d = 0.0;
  double peak_p_value = 1.0;
  std::size_t num_comparisons = 1;
  std::uint64_t seed = 0;

  bool operator==(const EffectReport&) const = default;
};

struct PeakEffect {
  double delta_days = 0.0;
  double cohens_d = 0.0;
  double p_value = 1.0;
};

struct LagProfile {
  std::map<int, std::size_t> histogram;  // article date - peak day -> articles
  std::size_t total = 0;
  std::size_t before_peak = 0;
  double proportion_before = 0.0;
};

class InfluenceAnalyzer {
 public:
  InfluenceAnalyzer(std::vector<NarrativeTimeline> timelines, RankTable ranks, InfluenceConfig config);

  const std::vector<RoleAssignment>& roles() const { return roles_; }
  const std::vector<std::string>& domains() const { return domains_; }

  EffectReport origination_effect(const std::string& domain) const;
  EffectReport amplification_effect(const std::string& domain) const;
  PeakEffect time_to_peak_effect(const std::string& domain, Role role) const;

  // Every domain, in parallel. Bonferroni uses the number of domains not
  // skipped unless num_comparisons is set.
  std::vector<EffectReport> analyze_all(Role role) const;

  // Empty filter: every bucket. kUnranked selects unranked domains.
  LagProfile lag_profile(const std::set<std::uint64_t>& bucket_filter = {}) const;

  // Per-narrative group values, exposed for inspection.
  struct Groups {
    std::vector<double> a, b;
    std::vector<double> peak_a, peak_b;
  };
  Groups groups(const std::string& domain, Role role) const;

 private:
  EffectReport effect(const std::string& domain, Role role) const;
  std::vector<double> inclusion_weights(const std::string& domain, Role role) const;
  double weight(const std::string& domain) const;

  std::vector<NarrativeTimeline> timelines_;
  std::vector<RoleAssignment> roles_;
  std::vector<std::string> domains_;
  RankTable ranks_;
  InfluenceConfig config_;
};

void export_effect_reports(const std::vector<EffectReport>& reports, std::ostream& out, bool jsonl);

}  // namespace narrative
