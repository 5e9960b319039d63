#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "narrative/config.hpp"
#include "narrative/curation.hpp"
#include "narrative/fingerprints.hpp"
#include "narrative/influence.hpp"
#include "narrative/snapshot.hpp"
#include "narrative/timeline.hpp"
#include "narrative/watch.hpp"

namespace narrative {

const char* code_version();

struct Provenance {
  std::string config_hash;
  std::string snapshot_id;
  std::string code_version;
};

// "# key=value ..." for tables, {"provenance": {...}} for JSONL.
void write_provenance(const Provenance& p, std::ostream& out, bool jsonl);

struct LedgerEntry {
  FitReport report;
  std::string snapshot_id;  // <date>-<crc32 of the snapshot file>
  std::string config_hash;

  bool operator==(const LedgerEntry&) const = default;
};

class RunLedger {
 public:
  const std::vector<LedgerEntry>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::optional<Date> last_date() const;
  const LedgerEntry* find(Date day) const;
  // Throws DataError unless day follows the last entry.
  void append(LedgerEntry entry);

  static RunLedger read(std::istream& in);
  void write(std::ostream& out) const;

 private:
  std::vector<LedgerEntry> entries_;
};

void export_ledger(const RunLedger& ledger, std::ostream& out, bool jsonl);

struct ArticleIngestReport {
  std::size_t read = 0;
  std::size_t admitted = 0;
  std::map<std::string, std::size_t> rejected;  // reason -> articles
  std::size_t passages = 0;
  std::size_t embedded = 0;
  IngestReport staged;
};

struct CommunityReport {
  std::vector<SiteProfile> profiles;
  SiteGraph graph;
  CommunityPartition partition;
};

// Data root layout:
//   ledger.jsonl              committed days
//   snapshots/<date>.snap     store after each committed day
//   staging/<date>.jsonl      embedded passages waiting for their day's fit
//   passages/<date>.jsonl     segmented passages before embedding
//   labels/<date>.jsonl       curation output of each committed day
//   factchecks.jsonl          loaded fact-check corpus
//   matches.jsonl             fact-check matches and verdicts
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  const PipelineConfig& config() const { return config_; }
  std::filesystem::path root() const { return config_.data_root; }
  std::filesystem::path ledger_path() const;
  std::filesystem::path snapshot_path(Date day) const;
  std::filesystem::path staging_path(Date day) const;
  std::filesystem::path passages_path(Date day) const;
  std::filesystem::path labels_path(Date day) const;
  std::filesystem::path factchecks_path() const;
  std::filesystem::path matches_path() const;

  RunLedger ledger() const;

  // Admits and segments articles; with a provider the passages are embedded
  // and staged, otherwise only the plain passages are written.
  ArticleIngestReport ingest_articles(std::istream& in, EmbeddingProvider* provider);
  // Stages validated embedding records under their publication day.
  IngestReport ingest_embeddings(std::istream& in);

  // Fits one day and commits it. Nothing is committed when any stage fails.
  LedgerEntry run_daily(Date day, Summarizer* summarizer = nullptr);
  std::vector<LedgerEntry> run_range(Date from, Date to, Summarizer* summarizer = nullptr);

  // Store after the last committed day; empty on a cold start.
  ClusterStore load_latest() const;
  ClusterStore load_snapshot(Date day) const;
  Provenance provenance() const;

  std::vector<ClusterId> retained(const ClusterStore& store) const;
  std::vector<NarrativeTimeline> timelines(const ClusterStore& store) const;
  RankTable ranks() const;
  CommunityReport communities(const ClusterStore& store) const;
  InfluenceAnalyzer influence(const ClusterStore& store) const;

  void load_factchecks(std::istream& in);
  std::vector<FactCheckRecord> factchecks() const;
  void save_matches(const std::vector<FactCheckMatch>& matches) const;
  std::vector<FactCheckMatch> matches() const;

  // Writes the named report into out_dir and returns the files written.
  // Reports: ledger, labels, communities, influence, trending, efficacy, snapshot.
  std::vector<std::filesystem::path> export_report(const std::string& report,
                                                   const std::filesystem::path& out_dir, bool jsonl,
                                                   std::optional<Date> as_of = std::nullopt) const;
  static const std::vector<std::string>& report_names();

 private:
  std::vector<PassageRecord> read_staging(Date day) const;

  PipelineConfig config_;
};

// Replaces path with contents via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);
std::string read_file(const std::filesystem::path& path);

void write_embedding_records(const std::vector<PassageRecord>& records, std::ostream& out);

}  // namespace narrative
