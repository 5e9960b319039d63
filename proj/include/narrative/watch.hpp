#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "narrative/clusterer.hpp"
#include "narrative/provider.hpp"
#include "narrative/timeline.hpp"

namespace narrative {

struct TrendEntry {
  ClusterId cluster_id = 0;
  std::size_t current_week_count = 0;
  std::size_t previous_week_count = 0;
  double pct_increase = 0.0;  // current / previous - 1; +inf when previous is zero
  bool is_new = false;
};

// current: articles dated in (as_of - 7, as_of]; previous: the seven days
// before that. Entries below min_weekly_volume are dropped. Order: new
// entries first, then pct_increase, current count, cluster id.
std::vector<TrendEntry> trending(const std::vector<NarrativeTimeline>& timelines, Date as_of,
                                 std::size_t min_weekly_volume = 25);

enum class MatchMode { kSingleBest, kAllMatches };

inline constexpr double kPrefilterMargin = 0.1;

struct QueryPassage {
  std::string passage_id;
  EmbeddingVector embedding;
  std::optional<std::string> text;
};

struct PassageHit {
  std::size_t member_index = 0;  // index into ClusterStore::members()
  double similarity = 0.0;
};

struct NarrativeHit {
  ClusterId cluster_id = 0;
  double similarity = 0.0;       // centroid similarity (single-best) or best passage similarity
  std::vector<PassageHit> hits;  // all-matches mode only, by member index

  bool operator==(const NarrativeHit&) const = default;
};

// Matches external passages against the retained narratives of a committed store.
class NarrativeMatcher {
 public:
  NarrativeMatcher(const ClusterStore& store, std::vector<ClusterId> retained, std::size_t threads = 1);

  // single-best: the argmax centroid if its similarity reaches the threshold.
  // all-matches: every narrative holding a member passage at or above the
  // threshold, scanning only narratives whose centroid is within
  // threshold - margin, or whose angular radius leaves a member within
  // reach of the threshold. Output aligned with queries; hits sorted by cluster id.
  std::vector<std::vector<NarrativeHit>> match(std::span<const QueryPassage> queries, MatchMode mode,
                                               double threshold = 0.60,
                                               double margin = kPrefilterMargin) const;

  const ClusterStore& store() const { return store_; }
  const std::vector<ClusterId>& retained() const { return retained_; }

 private:
  const ClusterStore& store_;
  std::vector<ClusterId> retained_;
  std::vector<std::vector<std::size_t>> members_;  // aligned with retained_
  std::vector<double> radius_;                     // max member angle from the centroid
  std::size_t threads_;
};

// {passage_id -> set of cluster ids}
std::map<std::string, std::set<ClusterId>> match_corpus(const NarrativeMatcher& matcher,
                                                        std::span<const QueryPassage> passages,
                                                        MatchMode mode, double threshold = 0.60);

struct FactCheckRecord {
  std::string factcheck_id;
  std::string org;
  Date published_date;
  std::vector<QueryPassage> passages;
};

// {factcheck_id, org, published_date, passages: [{text, vector}]} per line.
// Vectors are validated against `dimension` and normalised.
std::vector<FactCheckRecord> read_factchecks(std::istream& in, std::size_t dimension);
void write_factchecks(const std::vector<FactCheckRecord>& records, std::ostream& out);

enum class Verdict { kSupports, kRefutes, kNotEnoughInfo, kPending };
const char* to_string(Verdict v);
Verdict parse_verdict(std::string_view s);

struct ClassifierOutput {
  Verdict verdict = Verdict::kNotEnoughInfo;
  double score = 0.0;
};

// Must be callable from several threads at once.
class RefutationClassifier {
 public:
  virtual ~RefutationClassifier() = default;
  virtual ClassifierOutput classify(const std::string& claim, const std::string& query) = 0;
};

// {"claim", "query"} -> {"verdict": "supports"|"refutes"|"not_enough_info", "score"}
class HttpRefutationClassifier : public RefutationClassifier {
 public:
  explicit HttpRefutationClassifier(Endpoint endpoint) : client_(std::move(endpoint)) {}
  ClassifierOutput classify(const std::string& claim, const std::string& query) override;

 private:
  JsonHttpClient client_;
};

// Remembers verdicts per (claim, query) pair; failures are not cached.
class CachingClassifier : public RefutationClassifier {
 public:
  explicit CachingClassifier(RefutationClassifier& inner) : inner_(inner) {}
  ClassifierOutput classify(const std::string& claim, const std::string& query) override;
  std::size_t calls() const;  // inner calls made, failed ones included

 private:
  RefutationClassifier& inner_;
  mutable std::mutex mu_;
  std::map<std::pair<std::string, std::string>, ClassifierOutput> cache_;
  std::size_t calls_ = 0;
};

struct PairVerdict {
  std::string article_passage_id;
  std::string factcheck_passage_id;
  double similarity = 0.0;
  Verdict verdict = Verdict::kPending;
  double score = 0.0;
};

struct FactCheckMatch {
  std::string factcheck_id;
  std::string org;
  Date published_date;
  ClusterId cluster_id = 0;
  std::vector<PairVerdict> pairs;  // every pair has similarity >= the match threshold
  Verdict verdict = Verdict::kPending;
  double verdict_score = 0.0;
};

// All-matches mode, one FactCheckMatch per (fact-check, narrative), verdicts pending.
std::vector<FactCheckMatch> match_factchecks(const NarrativeMatcher& matcher,
                                             const std::vector<FactCheckRecord>& factchecks,
                                             double threshold = 0.60);

struct ClassificationStats {
  std::size_t pairs_classified = 0;
  std::size_t pairs_pending = 0;
  std::size_t matches_refuted = 0;
  std::size_t matches_pending = 0;
};

// Sends every (article passage, fact-check passage) pair to the classifier
// with at most max_in_flight concurrent calls. A match refutes iff any pair
// refutes; pairs whose call failed stay pending.
ClassificationStats classify_refutations(std::vector<FactCheckMatch>& matches, const ClusterStore& store,
                                         const std::vector<FactCheckRecord>& factchecks,
                                         RefutationClassifier& classifier, std::size_t max_in_flight = 4);

// Recomputes the aggregate verdict of a match from its pairs.
void aggregate_verdict(FactCheckMatch& match);

struct EfficacyReport {
  std::string org;
  std::size_t narratives_factchecked = 0;
  double median_articles_prior = 0.0;
  double median_days_to_factcheck = 0.0;
  double median_days_from_peak = 0.0;
  std::size_t zero_day_factchecks = 0;
  std::size_t pending_matches = 0;  // excluded from every median
};

EfficacyReport factcheck_efficacy(const std::string& org, const std::vector<FactCheckMatch>& matches,
                                  const std::vector<NarrativeTimeline>& timelines);

struct SweepRow {
  double threshold = 0.0;
  std::map<std::string, std::size_t> narratives_matched;  // per org
  std::map<std::string, EfficacyReport> efficacy;        // per org, when a classifier was given
};

// Match counts are non-increasing in the threshold. Verdicts are cached
// across thresholds so each pair is classified at most once.
std::vector<SweepRow> threshold_sweep(const NarrativeMatcher& matcher,
                                      const std::vector<FactCheckRecord>& factchecks,
                                      const std::vector<double>& thresholds,
                                      const std::vector<NarrativeTimeline>& timelines,
                                      RefutationClassifier* classifier = nullptr,
                                      std::size_t max_in_flight = 4);

void write_matches_jsonl(const std::vector<FactCheckMatch>& matches, std::ostream& out);
std::vector<FactCheckMatch> read_matches_jsonl(std::istream& in);

void export_trending(const std::vector<TrendEntry>& entries, std::ostream& out, bool jsonl);
void export_efficacy(const std::vector<EfficacyReport>& reports, std::ostream& out, bool jsonl);

}  // namespace narrative
