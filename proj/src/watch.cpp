#include "narrative/watch.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <unordered_map>

#include <json.hpp>

#include "narrative/error.hpp"
#include "narrative/parallel.hpp"
#include "narrative/stats.hpp"

namespace narrative {

std::vector<TrendEntry> trending(const std::vector<NarrativeTimeline>& timelines, Date as_of,
                                 std::size_t min_weekly_volume) {
  std::vector<TrendEntry> out;
  for (const auto& t : timelines) {
    TrendEntry e;
    e.cluster_id = t.cluster_id;
    for (const auto& [day, n] : t.daily_counts) {
      const int age = as_of - day;
      if (age >= 0 && age < 7) e.current_week_count += n;
      if (age >= 7 && age < 14) e.previous_week_count += n;
    }
    if (e.current_week_count < min_weekly_volume) continue;
    if (e.previous_week_count == 0) {
      e.is_new = true;
      e.pct_increase = std::numeric_limits<double>::infinity();
    } else {
      e.pct_increase = static_cast<double>(e.current_week_count) / static_cast<double>(e.previous_week_count) - 1.0;
    }
    out.push_back(e);
  }
  std::sort(out.begin(), out.end(), [](const TrendEntry& a, const TrendEntry& b) {
    if (a.is_new != b.is_new) return a.is_new;
    if (!a.is_new && a.pct_increase != b.pct_increase) return a.pct_increase > b.pct_increase;
    if (a.current_week_count != b.current_week_count) return a.current_week_count > b.current_week_count;
    return a.cluster_id < b.cluster_id;
  });
  return out;
}

NarrativeMatcher::NarrativeMatcher(const ClusterStore& store, std::vector<ClusterId> retained,
                                   std::size_t threads)
    : store_(store), retained_(std::move(retained)), threads_(threads) {
  std::sort(retained_.begin(), retained_.end());
  retained_.erase(std::unique(retained_.begin(), retained_.end()), retained_.end());
  const auto by_cluster = store_.members_by_cluster();
  for (const auto id : retained_) {
    const auto& centroid = store_.cluster(id).centroid;
    double min_cos = 1.0;
    for (const auto i : by_cluster[id]) {
      min_cos = std::min(min_cos, cosine_similarity(centroid, store_.members()[i].record.embedding));
    }
    radius_.push_back(std::acos(std::clamp(min_cos, -1.0, 1.0)));
    members_.push_back(by_cluster[id]);
  }
}

std::vector<std::vector<NarrativeHit>> NarrativeMatcher::match(std::span<const QueryPassage> queries,
                                                               MatchMode mode, double threshold,
                                                               double margin) const {
  std::vector<std::vector<NarrativeHit>> out(queries.size());
  parallel_for(queries.size(), threads_, [&](std::size_t begin, std::size_t end) {
    for (std::size_t q = begin; q < end; ++q) {
      const auto& v = queries[q].embedding;
      if (v.size() != store_.dimension()) {
        throw DataError("query " + queries[q].passage_id + ": dimension mismatch");
      }
      if (mode == MatchMode::kSingleBest) {
        std::optional<NarrativeHit> best;
        for (const auto id : retained_) {
          const double s = cosine_similarity(v, store_.cluster(id).centroid);
          if (!best || s > best->similarity) best = NarrativeHit{id, s, {}};
        }
        if (best && best->similarity >= threshold) out[q].push_back(*best);
        continue;
      }
      for (std::size_t k = 0; k < retained_.size(); ++k) {
        const auto id = retained_[k];
        const double sc = cosine_similarity(v, store_.cluster(id).centroid);
        // Angles obey the triangle inequality, so no member is closer than
        // angle(query, centroid) - radius.
        const double bound = std::cos(std::max(0.0, std::acos(std::clamp(sc, -1.0, 1.0)) - radius_[k] - 1e-9));
        if (sc < threshold - margin && bound < threshold) continue;
        NarrativeHit hit{id, -1.0, {}};
        for (const auto i : members_[k]) {
          const double s = cosine_similarity(v, store_.members()[i].record.embedding);
          if (s >= threshold) {
            hit.hits.push_back({i, s});
            hit.similarity = std::max(hit.similarity, s);
          }
        }
        if (!hit.hits.empty()) out[q].push_back(std::move(hit));
      }
    }
  });
  return out;
}

std::map<std::string, std::set<ClusterId>> match_corpus(const NarrativeMatcher& matcher,
                                                        std::span<const QueryPassage> passages,
                                                        MatchMode mode, double threshold) {
  const auto hits = matcher.match(passages, mode, threshold);
  std::map<std::string, std::set<ClusterId>> out;
  for (std::size_t q = 0; q < passages.size(); ++q) {
    auto& s = out[passages[q].passage_id];
    for (const auto& h : hits[q]) s.insert(h.cluster_id);
  }
  return out;
}

std::vector<FactCheckRecord> read_factchecks(std::istream& in, std::size_t dimension) {
  std::vector<FactCheckRecord> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      FactCheckRecord r;
      r.factcheck_id = j.at("factcheck_id").get<std::string>();
      r.org = j.at("org").get<std::string>();
      r.published_date = Date::parse(j.at("published_date").get<std::string>());
      if (!ids.insert(r.factcheck_id).second) throw DataError("duplicate factcheck_id " + r.factcheck_id);
      std::size_t idx = 0;
      for (const auto& p : j.at("passages")) {
        QueryPassage q;
        q.passage_id = p.contains("passage_id") ? p["passage_id"].get<std::string>()
                                                : r.factcheck_id + ":" + std::to_string(idx);
        q.embedding = p.at("vector").get<EmbeddingVector>();
        if (p.contains("text") && p["text"].is_string()) q.text = p["text"].get<std::string>();
        const auto check = validate_and_normalize(q.embedding, dimension);
        if (check.issue) throw DataError("passage " + q.passage_id + ": " + to_string(*check.issue));
        r.passages.push_back(std::move(q));
        ++idx;
      }
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("fact-check line " + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("fact-check line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_factchecks(const std::vector<FactCheckRecord>& records, std::ostream& out) {
  for (const auto& r : records) {
    nlohmann::json passages = nlohmann::json::array();
    for (const auto& p : r.passages) {
      nlohmann::json pj = {{"passage_id", p.passage_id}, {"vector", p.embedding}};
      if (p.text) pj["text"] = *p.text;
      passages.push_back(std::move(pj));
    }
    nlohmann::json j = {{"factcheck_id", r.factcheck_id},
                        {"org", r.org},
                        {"published_date", r.published_date.to_string()},
                        {"passages", passages}};
    out << j.dump() << '\n';
  }
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::kSupports: return "supports";
    case Verdict::kRefutes: return "refutes";
    case Verdict::kNotEnoughInfo: return "not_enough_info";
    case Verdict::kPending: return "pending";
  }
  return "pending";
}

Verdict parse_verdict(std::string_view s) {
  if (s == "supports") return Verdict::kSupports;
  if (s == "refutes") return Verdict::kRefutes;
  if (s == "not_enough_info") return Verdict::kNotEnoughInfo;
  if (s == "pending") return Verdict::kPending;
  throw DataError("unknown verdict '" + std::string(s) + "'");
}

ClassifierOutput HttpRefutationClassifier::classify(const std::string& claim, const std::string& query) {
  const auto reply = client_.post_with_retry({{"claim", claim}, {"query", query}});
  try {
    ClassifierOutput out;
    out.verdict = parse_verdict(reply.at("verdict").get<std::string>());
    if (out.verdict == Verdict::kPending) throw DataError("pending is not a classifier verdict");
    out.score = reply.value("score", 0.0);
    return out;
  } catch (const std::exception& e) {
    throw ProviderError(ProviderError::Kind::kMalformedResponse, std::string("malformed_response: ") + e.what());
  }
}

ClassifierOutput CachingClassifier::classify(const std::string& claim, const std::string& query) {
  const auto key = std::make_pair(claim, query);
  {
    std::lock_guard lock(mu_);
    const auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    ++calls_;
  }
  const auto out = inner_.classify(claim, query);
  std::lock_guard lock(mu_);
  cache_.emplace(key, out);
  return out;
}

std::size_t CachingClassifier::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::vector<FactCheckMatch> match_factchecks(const NarrativeMatcher& matcher,
                                             const std::vector<FactCheckRecord>& factchecks,
                                             double threshold) {
  std::vector<FactCheckMatch> out;
  const auto& members = matcher.store().members();
  for (const auto& fc : factchecks) {
    const auto hits = matcher.match(fc.passages, MatchMode::kAllMatches, threshold);
    std::map<ClusterId, FactCheckMatch> by_cluster;
    for (std::size_t p = 0; p < fc.passages.size(); ++p) {
      for (const auto& h : hits[p]) {
        auto& m = by_cluster[h.cluster_id];
        m.factcheck_id = fc.factcheck_id;
        m.org = fc.org;
        m.published_date = fc.published_date;
        m.cluster_id = h.cluster_id;
        for (const auto& ph : h.hits) {
          m.pairs.push_back({members[ph.member_index].record.passage_id, fc.passages[p].passage_id,
                             ph.similarity, Verdict::kPending, 0.0});
        }
      }
    }
    for (auto& [id, m] : by_cluster) out.push_back(std::move(m));
  }
  return out;
}

void aggregate_verdict(FactCheckMatch& match) {
  bool refutes = false, pending = false, supports = false;
  double refute_score = 0.0, support_score = 0.0, other_score = 0.0;
  for (const auto& p : match.pairs) {
    switch (p.verdict) {
      case Verdict::kRefutes:
        refutes = true;
        refute_score = std::max(refute_score, p.score);
        break;
      case Verdict::kPending:
        pending = true;
        break;
      case Verdict::kSupports:
        supports = true;
        support_score = std::max(support_score, p.score);
        break;
      case Verdict::kNotEnoughInfo:
        other_score = std::max(other_score, p.score);
        break;
    }
  }
  if (refutes) {
    match.verdict = Verdict::kRefutes;
    match.verdict_score = refute_score;
  } else if (pending) {
    match.verdict = Verdict::kPending;
    match.verdict_score = 0.0;
  } else if (supports) {
    match.verdict = Verdict::kSupports;
    match.verdict_score = support_score;
  } else {
    match.verdict = Verdict::kNotEnoughInfo;
    match.verdict_score = other_score;
  }
}

ClassificationStats classify_refutations(std::vector<FactCheckMatch>& matches, const ClusterStore& store,
                                         const std::vector<FactCheckRecord>& factchecks,
                                         RefutationClassifier& classifier, std::size_t max_in_flight) {
  std::unordered_map<std::string, const std::string*> article_text;
  static const std::string kEmpty;
  for (const auto& m : store.members()) {
    article_text.emplace(m.record.passage_id, m.record.text ? &*m.record.text : &kEmpty);
  }
  std::unordered_map<std::string, const std::string*> query_text;
  for (const auto& fc : factchecks) {
    for (const auto& p : fc.passages) query_text.emplace(p.passage_id, p.text ? &*p.text : &kEmpty);
  }
  std::vector<PairVerdict*> tasks;
  for (auto& m : matches) {
    for (auto& p : m.pairs) {
      if (p.verdict == Verdict::kPending) tasks.push_back(&p);
    }
  }
  auto lookup = [](const auto& map, const std::string& id) -> const std::string& {
    const auto it = map.find(id);
    if (it == map.end()) throw DataError("no text for passage " + id);
    return *it->second;
  };
  parallel_for(tasks.size(), std::max<std::size_t>(1, max_in_flight), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto& p = *tasks[i];
      try {
        const auto out = classifier.classify(lookup(article_text, p.article_passage_id),
                                             lookup(query_text, p.factcheck_passage_id));
        p.verdict = out.verdict;
        p.score = out.score;
      } catch (const ServiceError&) {
        p.verdict = Verdict::kPending;
      }
    }
  });
  ClassificationStats stats;
  for (const auto* p : tasks) (p->verdict == Verdict::kPending ? stats.pairs_pending : stats.pairs_classified)++;
  for (auto& m : matches) {
    aggregate_verdict(m);
    if (m.verdict == Verdict::kRefutes) ++stats.matches_refuted;
    if (m.verdict == Verdict::kPending) ++stats.matches_pending;
  }
  return stats;
}

EfficacyReport factcheck_efficacy(const std::string& org, const std::vector<FactCheckMatch>& matches,
                                  const std::vector<NarrativeTimeline>& timelines) {
  EfficacyReport rep;
  rep.org = org;
  std::map<ClusterId, const NarrativeTimeline*> by_id;
  for (const auto& t : timelines) by_id.emplace(t.cluster_id, &t);
  std::map<ClusterId, Date> earliest;
  for (const auto& m : matches) {
    if (m.org != org) continue;
    if (m.verdict == Verdict::kPending) {
      ++rep.pending_matches;
      continue;
    }
    if (m.verdict != Verdict::kRefutes || !by_id.count(m.cluster_id)) continue;
    const auto [it, inserted] = earliest.emplace(m.cluster_id, m.published_date);
    if (!inserted) it->second = std::min(it->second, m.published_date);
  }
  std::vector<double> prior, to_fc, from_peak;
  for (const auto& [id, fc_date] : earliest) {
    const auto& t = *by_id.at(id);
    std::size_t before = 0;
    for (const auto& a : t.articles) before += a.date < fc_date ? 1 : 0;
    const int days = fc_date - t.first_day();
    prior.push_back(static_cast<double>(before));
    to_fc.push_back(days);
    from_peak.push_back(fc_date - t.peak_day());
    if (days == 0) ++rep.zero_day_factchecks;
  }
  rep.narratives_factchecked = earliest.size();
  rep.median_articles_prior = median(prior);
  rep.median_days_to_factcheck = median(to_fc);
  rep.median_days_from_peak = median(from_peak);
  return rep;
}

std::vector<SweepRow> threshold_sweep(const NarrativeMatcher& matcher,
                                      const std::vector<FactCheckRecord>& factchecks,
                                      const std::vector<double>& thresholds,
                                      const std::vector<NarrativeTimeline>& timelines,
                                      RefutationClassifier* classifier, std::size_t max_in_flight) {
  std::optional<CachingClassifier> cache;
  if (classifier) cache.emplace(*classifier);
  std::set<std::string> orgs;
  for (const auto& fc : factchecks) orgs.insert(fc.org);
  std::vector<SweepRow> rows;
  for (const double t : thresholds) {
    SweepRow row;
    row.threshold = t;
    auto matches = match_factchecks(matcher, factchecks, t);
    std::map<std::string, std::set<ClusterId>> narratives;
    for (const auto& org : orgs) narratives[org];
    for (const auto& m : matches) narratives[m.org].insert(m.cluster_id);
    for (const auto& [org, ids] : narratives) row.narratives_matched[org] = ids.size();
    if (cache) {
      classify_refutations(matches, matcher.store(), factchecks, *cache, max_in_flight);
      for (const auto& org : orgs) row.efficacy[org] = factcheck_efficacy(org, matches, timelines);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_matches_jsonl(const std::vector<FactCheckMatch>& matches, std::ostream& out) {
  for (const auto& m : matches) {
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : m.pairs) {
      pairs.push_back({{"article_passage_id", p.article_passage_id},
                       {"factcheck_passage_id", p.factcheck_passage_id},
                       {"similarity", p.similarity},
                       {"verdict", to_string(p.verdict)},
                       {"score", p.score}});
    }
    nlohmann::json j = {{"factcheck_id", m.factcheck_id},
                        {"org", m.org},
                        {"published_date", m.published_date.to_string()},
                        {"cluster_id", m.cluster_id},
                        {"verdict", to_string(m.verdict)},
                        {"verdict_score", m.verdict_score},
                        {"pairs", pairs}};
    out << j.dump() << '\n';
  }
}

std::vector<FactCheckMatch> read_matches_jsonl(std::istream& in) {
  std::vector<FactCheckMatch> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      FactCheckMatch m;
      m.factcheck_id = j.at("factcheck_id").get<std::string>();
      m.org = j.at("org").get<std::string>();
      m.published_date = Date::parse(j.at("published_date").get<std::string>());
      m.cluster_id = j.at("cluster_id").get<ClusterId>();
      m.verdict = parse_verdict(j.at("verdict").get<std::string>());
      m.verdict_score = j.value("verdict_score", 0.0);
      for (const auto& p : j.at("pairs")) {
        m.pairs.push_back({p.at("article_passage_id").get<std::string>(),
                           p.at("factcheck_passage_id").get<std::string>(), p.at("similarity").get<double>(),
                           parse_verdict(p.at("verdict").get<std::string>()), p.value("score", 0.0)});
      }
      out.push_back(std::move(m));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("match file: ") + e.what());
    }
  }
  return out;
}

void export_trending(const std::vector<TrendEntry>& entries, std::ostream& out, bool jsonl) {
  if (jsonl) {
    for (const auto& e : entries) {
      nlohmann::json j = {{"cluster_id", e.cluster_id},
                          {"current_week_count", e.current_week_count},
                          {"previous_week_count", e.previous_week_count},
                          {"is_new", e.is_new},
                          {"pct_increase", e.is_new ? nlohmann::json(nullptr) : nlohmann::json(100.0 * e.pct_increase)}};
      out << j.dump() << '\n';
    }
    return;
  }
  out << "cluster_id\tcurrent_week\tprevious_week\tpct_increase\n";
  for (const auto& e : entries) {
    out << e.cluster_id << '\t' << e.current_week_count << '\t' << e.previous_week_count << '\t';
    if (e.is_new) {
      out << "new";
    } else {
      out << std::fixed << std::setprecision(1) << 100.0 * e.pct_increase << '%' << std::defaultfloat;
    }
    out << '\n';
  }
}

void export_efficacy(const std::vector<EfficacyReport>& reports, std::ostream& out, bool jsonl) {
  if (jsonl) {
    for (const auto& r : reports) {
      nlohmann::json j = {{"org", r.org},
                          {"narratives_factchecked", r.narratives_factchecked},
                          {"median_articles_prior", r.median_articles_prior},
                          {"median_days_to_factcheck", r.median_days_to_factcheck},
                          {"median_days_from_peak", r.median_days_from_peak},
                          {"zero_day_factchecks", r.zero_day_factchecks},
                          {"pending_matches", r.pending_matches}};
      out << j.dump() << '\n';
    }
    return;
  }
  out << "org\tnarratives_factchecked\tmed_articles_prior\tmed_days_to_factcheck\tmed_days_from_peak"
         "\tzero_day_factchecks\tpending_matches\n";
  for (const auto& r : reports) {
    out << r.org << '\t' << r.narratives_factchecked << '\t' << r.median_articles_prior << '\t'
        << std::fixed << std::setprecision(1) << r.median_days_to_factcheck << '\t' << r.median_days_from_peak
        << std::defaultfloat << '\t' << r.zero_day_factchecks << '\t' << r.pending_matches << '\n';
  }
}

}  // namespace narrative
