#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "narrative/clusterer.hpp"
#include "narrative/corpus.hpp"
#include "narrative/curation.hpp"
#include "narrative/influence.hpp"
#include "narrative/provider.hpp"

namespace narrative {

// Every tunable of the pipeline. Loaded from a flat "key = value" file,
// then --set overrides, then NARRATIVE_<KEY> environment variables.
struct PipelineConfig {
  std::filesystem::path data_root = "narrative-data";
  std::size_t dimension = kDefaultDimension;

  // clustering
  double lambda = 0.60;
  std::size_t max_iterations = 50;
  double centroid_shift_tol = 1e-4;
  std::size_t max_new_clusters_per_day = 0;

  // corpus
  std::optional<Date> study_start;
  std::optional<Date> study_end;
  std::size_t max_tokens = kDefaultMaxTokens;
  bool include_title = false;

  // curation
  std::size_t min_articles = 25;
  double max_single_site_share = 0.5;
  double pmi_alpha = 1.0;
  std::size_t top_k_keywords = 5;
  std::size_t representatives = 5;
  bool light_stemming = false;

  // site fingerprints
  double epsilon = 0.1;
  double edge_prune_below = 0.0;
  double louvain_resolution = 1.0;
  std::string ranks_path;

  // influence
  std::size_t bootstrap_iterations = 250;
  std::size_t subset_size = 100;
  int window_days = 7;
  double amplify_cutoff = 0.15;
  std::size_t min_instances = 25;
  double alpha = 0.05;
  std::size_t num_comparisons = 0;

  // watch
  double match_threshold = 0.60;
  double prefilter_margin = 0.1;
  std::vector<double> sweep_thresholds{0.60, 0.65, 0.70, 0.75, 0.80};
  std::size_t trending_min_volume = 25;
  std::size_t max_in_flight = 4;

  // services
  std::string embedding_url;
  std::string summarizer_url;
  std::string classifier_url;
  std::int64_t provider_timeout_ms = 10000;
  int provider_retries = 2;

  std::uint64_t rng_seed = 20220301;
  std::size_t threads = 1;

  // Throws UsageError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  // Throws UsageError when a value leaves its valid range.
  void validate() const;

  // Sorted "key=value" lines of every key that can change results.
  std::string serialize() const;
  // 16 hex digits, FNV-1a over serialize().
  std::string hash() const;

  FitConfig fit_config() const;
  CurationConfig curation_config() const;
  InfluenceConfig influence_config() const;
  StudyWindow study_window() const;
  std::optional<Endpoint> endpoint(const std::string& url) const;

  static const std::vector<std::string>& keys();
};

// Parses "key = value" lines; '#' starts a comment.
std::vector<std::pair<std::string, std::string>> parse_config_text(const std::string& text);

// file (optional) < overrides < environment. `env` defaults to getenv.
PipelineConfig load_config(const std::optional<std::filesystem::path>& file,
                           const std::vector<std::pair<std::string, std::string>>& overrides,
                           const std::function<std::optional<std::string>(const std::string&)>& env = {});

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace narrative
