#include "narrative/pipeline.hpp"

#include <sys/file.h>
#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "narrative/error.hpp"

namespace narrative {

namespace fs = std::filesystem;

namespace {

// Exclusive advisory lock on the data root; one fit at a time.
class RootLock {
 public:
  explicit RootLock(const fs::path& path) {
    fs::create_directories(path.parent_path());
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw DataError("cannot open lock file " + path.string());
    if (::flock(fd_, LOCK_EX) != 0) {
      ::close(fd_);
      throw DataError("cannot lock " + path.string());
    }
  }
  ~RootLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  RootLock(const RootLock&) = delete;
  RootLock& operator=(const RootLock&) = delete;

 private:
  int fd_ = -1;
};

std::string hex32(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

nlohmann::json ledger_json(const LedgerEntry& e) {
  const auto& r = e.report;
  return {{"date", r.day.to_string()},
          {"points_assigned", r.points_assigned},
          {"clusters_created", r.clusters_created},
          {"iterations_run", r.iterations_run},
          {"mean_assignment_similarity", r.mean_assignment_similarity},
          {"converged", r.converged},
          {"empty_clusters_dropped", r.empty_clusters_dropped},
          {"snapshot_id", e.snapshot_id},
          {"config_hash", e.config_hash}};
}

std::vector<NarrativeLabel> read_labels(std::istream& in) {
  std::vector<NarrativeLabel> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    NarrativeLabel l;
    l.cluster_id = j.at("cluster_id").get<ClusterId>();
    l.keywords = j.at("keywords").get<std::vector<std::string>>();
    if (!j.at("summary").is_null()) l.summary = j["summary"].get<std::string>();
    l.summary_fallback = j.value("summary_fallback", false);
    l.representative_passage_ids = j.at("representative_passage_ids").get<std::vector<std::string>>();
    out.push_back(std::move(l));
  }
  return out;
}

std::string join(const std::vector<std::string>& xs, char sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += sep;
    out += xs[i];
  }
  return out;
}

std::string one_line(std::string s) {
  std::replace_if(s.begin(), s.end(), [](char c) { return c == '\t' || c == '\n' || c == '\r'; }, ' ');
  return s;
}

}  // namespace

const char* code_version() { return NARRATIVE_VERSION; }

void write_provenance(const Provenance& p, std::ostream& out, bool jsonl) {
  if (jsonl) {
    nlohmann::json j = {{"provenance",
                         {{"config_hash", p.config_hash},
                          {"snapshot_id", p.snapshot_id},
                          {"code_version", p.code_version}}}};
    out << j.dump() << '\n';
  } else {
    out << "# config_hash=" << p.config_hash << " snapshot_id=" << p.snapshot_id
        << " code_version=" << p.code_version << '\n';
  }
}

std::optional<Date> RunLedger::last_date() const {
  if (entries_.empty()) return std::nullopt;
  return entries_.back().report.day;
}

const LedgerEntry* RunLedger::find(Date day) const {
  for (const auto& e : entries_) {
    if (e.report.day == day) return &e;
  }
  return nullptr;
}

void RunLedger::append(LedgerEntry entry) {
  const Date day = entry.report.day;
  if (find(day)) throw DataError("already_committed: " + day.to_string());
  if (const auto last = last_date()) {
    if (day < *last) throw DataError("out_of_order: " + day.to_string() + " precedes " + last->to_string());
    if (day != *last + 1) throw DataError("gap: next day to commit is " + (*last + 1).to_string());
  }
  entries_.push_back(std::move(entry));
}

RunLedger RunLedger::read(std::istream& in) {
  RunLedger ledger;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LedgerEntry e;
      e.report.day = Date::parse(j.at("date").get<std::string>());
      e.report.points_assigned = j.at("points_assigned").get<std::size_t>();
      e.report.clusters_created = j.at("clusters_created").get<std::size_t>();
      e.report.iterations_run = j.at("iterations_run").get<std::size_t>();
      e.report.mean_assignment_similarity = j.at("mean_assignment_similarity").get<double>();
      e.report.converged = j.at("converged").get<bool>();
      e.report.empty_clusters_dropped = j.at("empty_clusters_dropped").get<std::size_t>();
      e.snapshot_id = j.at("snapshot_id").get<std::string>();
      e.config_hash = j.at("config_hash").get<std::string>();
      ledger.append(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw DataError("ledger line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return ledger;
}

void RunLedger::write(std::ostream& out) const {
  for (const auto& e : entries_) out << ledger_json(e).dump() << '\n';
}

void export_ledger(const RunLedger& ledger, std::ostream& out, bool jsonl) {
  if (jsonl) {
    ledger.write(out);
    return;
  }
  out << "date\tpoints_assigned\tclusters_created\titerations_run\tmean_similarity\tconverged"
         "\tempty_dropped\tsnapshot_id\tconfig_hash\n";
  for (const auto& e : ledger.entries()) {
    const auto& r = e.report;
    out << r.day.to_string() << '\t' << r.points_assigned << '\t' << r.clusters_created << '\t'
        << r.iterations_run << '\t' << std::fixed << std::setprecision(6) << r.mean_assignment_similarity
        << std::defaultfloat << '\t' << (r.converged ? "yes" : "no") << '\t' << r.empty_clusters_dropped << '\t'
        << e.snapshot_id << '\t' << e.config_hash << '\n';
  }
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_embedding_records(const std::vector<PassageRecord>& records, std::ostream& out) {
  for (const auto& r : records) {
    nlohmann::json j = {{"passage_id", r.passage_id},
                        {"article_id", r.article_id},
                        {"domain", r.domain},
                        {"published_date", r.published_date.to_string()},
                        {"ordinal", r.ordinal},
                        {"vector", r.embedding}};
    if (r.text) j["text"] = *r.text;
    out << j.dump() << '\n';
  }
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) { config_.validate(); }

fs::path Pipeline::ledger_path() const { return root() / "ledger.jsonl"; }
fs::path Pipeline::snapshot_path(Date day) const { return root() / "snapshots" / (day.to_string() + ".snap"); }
fs::path Pipeline::staging_path(Date day) const { return root() / "staging" / (day.to_string() + ".jsonl"); }
fs::path Pipeline::passages_path(Date day) const { return root() / "passages" / (day.to_string() + ".jsonl"); }
fs::path Pipeline::labels_path(Date day) const { return root() / "labels" / (day.to_string() + ".jsonl"); }
fs::path Pipeline::factchecks_path() const { return root() / "factchecks.jsonl"; }
fs::path Pipeline::matches_path() const { return root() / "matches.jsonl"; }

RunLedger Pipeline::ledger() const {
  if (!fs::exists(ledger_path())) return {};
  std::ifstream in(ledger_path());
  return RunLedger::read(in);
}

std::vector<PassageRecord> Pipeline::read_staging(Date day) const {
  const auto path = staging_path(day);
  if (!fs::exists(path)) return {};
  std::ifstream in(path);
  IngestReport report;
  auto records = read_embedding_records(in, report);
  if (report.rejected) throw DataError("staging file " + path.string() + " has malformed lines");
  return records;
}

IngestReport Pipeline::ingest_embeddings(std::istream& in) {
  IngestReport report;
  auto records = read_embedding_records(in, report);
  const auto last = ledger().last_date();
  const auto window = config_.study_window();
  std::vector<PassageRecord> kept;
  for (auto& r : records) {
    if (last && r.published_date <= *last) {
      report.reject("day_committed");
    } else if (!window.contains(r.published_date)) {
      report.reject("out_of_window");
    } else {
      kept.push_back(std::move(r));
    }
  }
  std::map<Date, std::vector<PassageRecord>> by_day;
  for (auto& r : kept) by_day[r.published_date].push_back(std::move(r));
  RootLock lock(root() / ".lock");
  for (auto& [day, batch] : by_day) {
    EmbeddingStore staged(config_.dimension);
    staged.ingest(read_staging(day), config_.threads);
    const auto before = staged.size();
    const auto r = staged.ingest(std::move(batch), config_.threads);
    report.accepted += staged.size() - before;
    report.renormalized_warnings += r.renormalized_warnings;
    for (const auto& [reason, n] : r.reasons) {
      report.rejected += n;
      report.reasons[reason] += n;
    }
    std::vector<PassageRecord> all;
    for (const auto& [id, rec] : staged.records()) all.push_back(rec);
    std::ostringstream out;
    write_embedding_records(all, out);
    write_file_atomic(staging_path(day), out.str());
  }
  return report;
}

ArticleIngestReport Pipeline::ingest_articles(std::istream& in, EmbeddingProvider* provider) {
  ArticleIngestReport report;
  const auto articles = read_articles(in);
  report.read = articles.size();
  const auto window = config_.study_window();
  std::map<Date, std::vector<std::pair<const ArticleDoc*, PassagePlain>>> by_day;
  for (const auto& a : articles) {
    if (const auto reason = admit_article(a, window)) {
      ++report.rejected[std::string(to_string(*reason))];
      continue;
    }
    ++report.admitted;
    for (auto& p : segment_article(a, config_.max_tokens, config_.include_title)) {
      by_day[a.published_date].emplace_back(&a, std::move(p));
      ++report.passages;
    }
  }
  std::vector<PassageRecord> embedded;
  for (const auto& [day, passages] : by_day) {
    std::ostringstream out;
    for (const auto& [a, p] : passages) {
      nlohmann::json j = {{"passage_id", p.passage_id}, {"article_id", p.article_id},
                          {"domain", a->domain},       {"published_date", day.to_string()},
                          {"ordinal", p.ordinal},      {"token_count", p.token_count},
                          {"text", p.text}};
      out << j.dump() << '\n';
    }
    write_file_atomic(passages_path(day), out.str());
    if (!provider) continue;
    constexpr std::size_t kBatch = 64;
    for (std::size_t i = 0; i < passages.size(); i += kBatch) {
      const std::size_t end = std::min(passages.size(), i + kBatch);
      std::vector<std::string> texts;
      for (std::size_t k = i; k < end; ++k) texts.push_back(passages[k].second.text);
      auto vectors = embed_remote(texts, *provider, config_.dimension);
      for (std::size_t k = i; k < end; ++k) {
        const auto& [a, p] = passages[k];
        embedded.push_back({p.passage_id, p.article_id, a->domain, day, p.ordinal, std::move(vectors[k - i]), p.text});
      }
    }
  }
  report.embedded = embedded.size();
  if (!embedded.empty()) {
    std::ostringstream buf;
    write_embedding_records(embedded, buf);
    std::istringstream staged(buf.str());
    report.staged = ingest_embeddings(staged);
  }
  return report;
}

ClusterStore Pipeline::load_snapshot(Date day) const {
  const auto l = ledger();
  const auto* entry = l.find(day);
  if (!entry) throw DataError("no committed snapshot for " + day.to_string());
  const auto blob = read_file(snapshot_path(day));
  const auto id = day.to_string() + "-" + hex32(crc32_of(blob));
  if (id != entry->snapshot_id) {
    throw SnapshotError(SnapshotError::Kind::kChecksum,
                        "snapshot " + snapshot_path(day).string() + " does not match ledger id " + entry->snapshot_id);
  }
  return snapshot_load(blob);
}

ClusterStore Pipeline::load_latest() const {
  const auto last = ledger().last_date();
  if (!last) return ClusterStore(config_.dimension);
  auto store = load_snapshot(*last);
  if (store.dimension() != config_.dimension) {
    throw DataError("snapshot dimension " + std::to_string(store.dimension()) + " differs from configured " +
                    std::to_string(config_.dimension));
  }
  return store;
}

LedgerEntry Pipeline::run_daily(Date day, Summarizer* summarizer) {
  RootLock lock(root() / ".lock");
  auto l = ledger();
  if (l.find(day)) throw DataError("already_committed: " + day.to_string());
  if (const auto last = l.last_date()) {
    if (day < *last) throw DataError("out_of_order: " + day.to_string() + " precedes " + last->to_string());
    if (day != *last + 1) throw DataError("gap: next day to commit is " + (*last + 1).to_string());
  }
  auto store = load_latest();
  auto points = read_staging(day);
  LedgerEntry entry;
  entry.report = store.partial_fit_day(day, std::move(points), config_.fit_config());
  const auto labels = curate(store, config_.curation_config(), summarizer);
  const auto blob = snapshot_save(store);
  entry.snapshot_id = day.to_string() + "-" + hex32(crc32_of(blob));
  entry.config_hash = config_.hash();
  l.append(entry);

  std::ostringstream label_text;
  export_labels_jsonl(labels, label_text);
  std::ostringstream ledger_text;
  l.write(ledger_text);
  write_file_atomic(labels_path(day), label_text.str());
  write_file_atomic(snapshot_path(day), blob);
  // The ledger rename is the commit point.
  write_file_atomic(ledger_path(), ledger_text.str());
  return entry;
}

std::vector<LedgerEntry> Pipeline::run_range(Date from, Date to, Summarizer* summarizer) {
  if (to < from) throw UsageError("--to precedes --from");
  std::vector<LedgerEntry> out;
  for (Date d = from; d <= to; d = d + 1) out.push_back(run_daily(d, summarizer));
  return out;
}

Provenance Pipeline::provenance() const {
  const auto l = ledger();
  return {config_.hash(), l.empty() ? std::string("none") : l.entries().back().snapshot_id, code_version()};
}

std::vector<ClusterId> Pipeline::retained(const ClusterStore& store) const {
  return filter_clusters(store, config_.curation_config());
}

std::vector<NarrativeTimeline> Pipeline::timelines(const ClusterStore& store) const {
  return build_timelines(store, retained(store));
}

RankTable Pipeline::ranks() const {
  if (config_.ranks_path.empty()) return {};
  std::ifstream in(config_.ranks_path);
  if (!in) throw DataError("cannot read rank table " + config_.ranks_path);
  return RankTable::read(in);
}

CommunityReport Pipeline::communities(const ClusterStore& store) const {
  CommunityReport out;
  out.profiles = build_site_profiles(store, retained(store), ranks(), config_.epsilon);
  out.graph = build_site_graph(out.profiles, config_.edge_prune_below, config_.threads);
  out.partition = louvain_communities(out.graph, config_.louvain_resolution, config_.rng_seed);
  return out;
}

InfluenceAnalyzer Pipeline::influence(const ClusterStore& store) const {
  return InfluenceAnalyzer(timelines(store), ranks(), config_.influence_config());
}

void Pipeline::load_factchecks(std::istream& in) {
  const auto records = read_factchecks(in, config_.dimension);
  std::ostringstream out;
  write_factchecks(records, out);
  write_file_atomic(factchecks_path(), out.str());
}

std::vector<FactCheckRecord> Pipeline::factchecks() const {
  std::ifstream in(factchecks_path());
  if (!in) throw DataError("no fact-checks loaded; run 'factcheck load' first");
  return read_factchecks(in, config_.dimension);
}

void Pipeline::save_matches(const std::vector<FactCheckMatch>& matches) const {
  std::ostringstream out;
  write_matches_jsonl(matches, out);
  write_file_atomic(matches_path(), out.str());
}

std::vector<FactCheckMatch> Pipeline::matches() const {
  std::ifstream in(matches_path());
  if (!in) throw DataError("no matches; run 'factcheck match' first");
  return read_matches_jsonl(in);
}

const std::vector<std::string>& Pipeline::report_names() {
  static const std::vector<std::string> names = {"ledger",   "labels",   "communities", "influence",
                                                 "trending", "efficacy", "snapshot"};
  return names;
}

std::vector<fs::path> Pipeline::export_report(const std::string& report, const fs::path& out_dir, bool jsonl,
                                              std::optional<Date> as_of) const {
  if (std::find(report_names().begin(), report_names().end(), report) == report_names().end()) {
    throw UsageError("unknown report '" + report + "'; expected one of " + join(report_names(), ','));
  }
  const auto prov = provenance();
  const std::string ext = jsonl ? ".jsonl" : ".tsv";
  std::vector<fs::path> written;
  auto emit = [&](const std::string& name, const auto& body) {
    std::ostringstream out;
    write_provenance(prov, out, jsonl);
    body(out);
    const auto path = out_dir / (name + ext);
    write_file_atomic(path, out.str());
    written.push_back(path);
  };

  const auto l = ledger();
  if (report == "ledger") {
    emit("ledger", [&](std::ostream& out) { export_ledger(l, out, jsonl); });
    return written;
  }
  if (l.empty()) throw DataError("nothing committed yet");
  const auto store = load_latest();

  if (report == "labels") {
    std::ifstream in(labels_path(*l.last_date()));
    if (!in) throw DataError("missing labels for " + l.last_date()->to_string());
    const auto labels = read_labels(in);
    emit("labels", [&](std::ostream& out) {
      if (jsonl) {
        export_labels_jsonl(labels, out);
        return;
      }
      out << "cluster_id\tarticles\tkeywords\tsummary\n";
      for (const auto& lb : labels) {
        out << lb.cluster_id << '\t' << store.cluster(lb.cluster_id).article_count() << '\t'
            << join(lb.keywords, ',') << '\t' << one_line(lb.summary.value_or("")) << '\n';
      }
    });
  } else if (report == "communities") {
    const auto c = communities(store);
    emit("communities_edges", [&](std::ostream& out) {
      if (!jsonl) {
        export_edge_list(c.graph, out);
        return;
      }
      for (const auto& e : c.graph.edges) {
        out << nlohmann::json{{"a", c.graph.nodes[e.a]}, {"b", c.graph.nodes[e.b]}, {"weight", e.weight}}.dump()
            << '\n';
      }
    });
    emit("communities_partition", [&](std::ostream& out) {
      if (!jsonl) {
        export_partition(c.partition, out);
        return;
      }
      for (const auto& [domain, community] : c.partition.community) {
        out << nlohmann::json{{"domain", domain}, {"community", community}}.dump() << '\n';
      }
    });
  } else if (report == "influence") {
    const auto analyzer = influence(store);
    auto reports = analyzer.analyze_all(Role::kOriginate);
    auto amplify = analyzer.analyze_all(Role::kAmplify);
    reports.insert(reports.end(), amplify.begin(), amplify.end());
    emit("influence", [&](std::ostream& out) { export_effect_reports(reports, out, jsonl); });
  } else if (report == "trending") {
    const auto entries = trending(timelines(store), as_of.value_or(*l.last_date()), config_.trending_min_volume);
    emit("trending", [&](std::ostream& out) { export_trending(entries, out, jsonl); });
  } else if (report == "efficacy") {
    const auto m = matches();
    std::set<std::string> orgs;
    for (const auto& x : m) orgs.insert(x.org);
    const auto tl = timelines(store);
    std::vector<EfficacyReport> reports;
    for (const auto& org : orgs) reports.push_back(factcheck_efficacy(org, m, tl));
    emit("efficacy", [&](std::ostream& out) { export_efficacy(reports, out, jsonl); });
  } else if (report == "snapshot") {
    std::ostringstream out;
    write_provenance(prov, out, true);
    snapshot_export_jsonl(store, out);
    const auto path = out_dir / "snapshot.jsonl";
    write_file_atomic(path, out.str());
    written.push_back(path);
  }
  return written;
}

}  // namespace narrative
