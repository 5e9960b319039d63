#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "narrative/clusterer.hpp"
#include "narrative/provider.hpp"

namespace narrative {

struct CurationConfig {
  std::size_t min_articles = 25;
  double max_single_site_share = 0.5;  // dropped when the top site holds this share or more
  double pmi_alpha = 1.0;
  std::size_t top_k_keywords = 5;
  std::size_t representatives = 5;
  bool light_stemming = false;
  std::optional<std::set<std::string>> stopwords;  // overrides the built-in list
  std::size_t threads = 1;

  void validate() const;
};

struct NarrativeLabel {
  ClusterId cluster_id = 0;
  std::vector<std::string> keywords;
  std::optional<std::string> summary;
  bool summary_fallback = false;
  std::vector<std::string> representative_passage_ids;
};

// Survivors sorted by distinct article count descending, then id.
std::vector<ClusterId> filter_clusters(const ClusterStore& store, const CurationConfig& config);

const std::set<std::string>& builtin_stopwords();

// Lowercase, split on non-alphanumerics, drop stopwords, optionally stem.
std::vector<std::string> keyword_tokens(std::string_view text, const CurationConfig& config);

std::string light_stem(std::string word);

// Joint (word, cluster) count table over a set of clusters, with every cell
// smoothed by alpha. Built once and shared read-only.
class VocabularyStats {
 public:
  VocabularyStats(const ClusterStore& store, const std::vector<ClusterId>& clusters,
                  const CurationConfig& config);

  std::size_t vocabulary_size() const { return words_.size(); }
  const std::vector<std::string>& words() const { return words_; }
  std::size_t raw_count(std::size_t word, ClusterId cluster) const;
  // log2 of P(w, c) / (P(w) P(c)) over the smoothed table.
  double pmi(std::size_t word, ClusterId cluster) const;
  std::optional<std::size_t> word_index(const std::string& word) const;
  bool has_cluster(ClusterId cluster) const { return column_.count(cluster) > 0; }

 private:
  double alpha_;
  std::vector<std::string> words_;
  std::map<ClusterId, std::size_t> column_;
  std::vector<std::map<std::size_t, std::size_t>> counts_;  // per column: word -> count
  std::vector<double> cluster_mass_;                        // raw tokens per column
  std::vector<double> word_mass_;                           // raw tokens per word
  double total_ = 0.0;
};

// Top-k words present in the cluster by PMI descending, then raw in-cluster
// count descending, then lexicographically.
std::vector<std::string> pmi_keywords(ClusterId cluster, const VocabularyStats& stats,
                                      const CurationConfig& config);

// min(n, members) passage ids by cosine to the current centroid, ties by id.
std::vector<std::string> representative_passages(const ClusterStore& store, ClusterId cluster,
                                                 std::size_t n = 5);

class Summarizer {
 public:
  virtual ~Summarizer() = default;
  virtual std::string summarize(const std::vector<std::string>& passages) = 0;
};

// {"passages": [...]} -> {"summary": "..."}
class HttpSummarizer : public Summarizer {
 public:
  explicit HttpSummarizer(Endpoint endpoint) : client_(std::move(endpoint)) {}
  std::string summarize(const std::vector<std::string>& passages) override;

 private:
  JsonHttpClient client_;
};

std::string first_sentence(std::string_view text);

struct SummaryResult {
  std::string summary;
  bool fallback = false;
};

// Sends the representatives in order; when the summarizer fails or returns
// nothing, joins the first sentence of each representative instead.
SummaryResult summarize_cluster(const ClusterStore& store,
                                const std::vector<std::string>& representative_ids,
                                Summarizer* summarizer);

std::vector<NarrativeLabel> curate(const ClusterStore& store, const CurationConfig& config,
                                   Summarizer* summarizer = nullptr);

void export_labels_jsonl(const std::vector<NarrativeLabel>& labels, std::ostream& out);

}  // namespace narrative
