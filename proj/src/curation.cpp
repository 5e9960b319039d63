#include "narrative/curation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <unordered_map>

#include <json.hpp>

#include "narrative/parallel.hpp"

namespace narrative {

void CurationConfig::validate() const {
  if (!(max_single_site_share > 0.0 && max_single_site_share <= 1.0)) {
    throw UsageError("max_single_site_share must lie in (0, 1]");
  }
  if (!(pmi_alpha >= 0.0)) throw UsageError("pmi_alpha must be non-negative");
}

std::vector<ClusterId> filter_clusters(const ClusterStore& store, const CurationConfig& config) {
  config.validate();
  std::vector<std::pair<std::size_t, ClusterId>> kept;
  for (const auto& c : store.clusters()) {
    const std::size_t articles = c.article_count();
    if (articles < config.min_articles) continue;
    std::size_t top = 0;
    std::size_t total = 0;
    for (const auto& [domain, n] : c.per_domain_passages) {
      top = std::max(top, n);
      total += n;
    }
    if (total == 0) continue;
    const double share = static_cast<double>(top) / static_cast<double>(total);
    if (share >= config.max_single_site_share) continue;
    kept.emplace_back(articles, c.cluster_id);
  }
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<ClusterId> out;
  out.reserve(kept.size());
  for (const auto& [n, id] : kept) out.push_back(id);
  return out;
}

const std::set<std::string>& builtin_stopwords() {
  static const std::set<std::string> words = {
      "a", "about", "above", "after", "again", "against", "all", "also", "am", "an", "and", "any",
      "are", "aren", "as", "at", "be", "because", "been", "before", "being", "below", "between",
      "both", "but", "by", "can", "could", "couldn", "did", "didn", "do", "does", "doesn", "doing",
      "don", "down", "during", "each", "even", "few", "for", "from", "further", "had", "hadn",
      "has", "hasn", "have", "haven", "having", "he", "her", "here", "hers", "herself", "him",
      "himself", "his", "how", "i", "if", "in", "into", "is", "isn", "it", "its", "itself", "just",
      "ll", "m", "me", "more", "most", "mr", "ms", "much", "must", "my", "myself", "no", "nor",
      "not", "now", "o", "of", "off", "on", "once", "one", "only", "or", "other", "our", "ours",
      "ourselves", "out", "over", "own", "re", "s", "said", "same", "says", "she", "should",
      "shouldn", "so", "some", "such", "t", "than", "that", "the", "their", "theirs", "them",
      "themselves", "then", "there", "these", "they", "this", "those", "through", "to", "too",
      "under", "until", "up", "us", "ve", "very", "was", "wasn", "we", "were", "weren", "what",
      "when", "where", "which", "while", "who", "whom", "why", "will", "with", "won", "would",
      "wouldn", "y", "you", "your", "yours", "yourself", "yourselves"};
  return words;
}

std::string light_stem(std::string w) {
  auto strip = [&](std::string_view suffix, std::size_t min_stem) {
    if (w.size() >= suffix.size() + min_stem && w.compare(w.size() - suffix.size(), suffix.size(), suffix) == 0) {
      w.resize(w.size() - suffix.size());
      return true;
    }
    return false;
  };
  if (strip("ies", 2)) {
    w += 'y';
    return w;
  }
  for (const auto* suffix : {"ism", "ist", "ing", "ed", "ly"}) {
    if (strip(suffix, 3)) return w;
  }
  for (const auto* suffix : {"sses", "shes", "ches", "xes", "zes"}) {
    if (w.size() >= 5 && w.ends_with(suffix)) {
      w.resize(w.size() - 2);
      return w;
    }
  }
  if (w.size() > 3 && w.back() == 's' && w[w.size() - 2] != 's') w.pop_back();
  return w;
}

std::vector<std::string> keyword_tokens(std::string_view text, const CurationConfig& config) {
  const auto& stop = config.stopwords ? *config.stopwords : builtin_stopwords();
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (cur.empty()) return;
    if (!stop.count(cur)) out.push_back(config.light_stemming ? light_stem(cur) : cur);
    cur.clear();
  };
  for (const char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

VocabularyStats::VocabularyStats(const ClusterStore& store, const std::vector<ClusterId>& clusters,
                                 const CurationConfig& config)
    : alpha_(config.pmi_alpha) {
  for (const auto id : clusters) column_.emplace(id, 0);
  std::size_t col = 0;
  for (auto& [id, c] : column_) c = col++;

  std::map<std::string, std::vector<std::size_t>> raw;  // word -> per-column counts
  for (const auto& m : store.members()) {
    const auto it = column_.find(m.cluster_id);
    if (it == column_.end() || !m.record.text) continue;
    for (auto& tok : keyword_tokens(*m.record.text, config)) {
      auto& row = raw[tok];
      if (row.empty()) row.assign(column_.size(), 0);
      ++row[it->second];
    }
  }
  counts_.resize(column_.size());
  cluster_mass_.assign(column_.size(), 0.0);
  for (auto& [word, row] : raw) {
    const std::size_t w = words_.size();
    words_.push_back(word);
    double mass = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (row[c] == 0) continue;
      counts_[c][w] = row[c];
      cluster_mass_[c] += static_cast<double>(row[c]);
      mass += static_cast<double>(row[c]);
    }
    word_mass_.push_back(mass);
    total_ += mass;
  }
}

std::optional<std::size_t> VocabularyStats::word_index(const std::string& word) const {
  const auto it = std::lower_bound(words_.begin(), words_.end(), word);
  if (it == words_.end() || *it != word) return std::nullopt;
  return static_cast<std::size_t>(it - words_.begin());
}

std::size_t VocabularyStats::raw_count(std::size_t word, ClusterId cluster) const {
  const auto& col = counts_.at(column_.at(cluster));
  const auto it = col.find(word);
  return it == col.end() ? 0 : it->second;
}

double VocabularyStats::pmi(std::size_t word, ClusterId cluster) const {
  const std::size_t c = column_.at(cluster);
  const double v = static_cast<double>(words_.size());
  const double k = static_cast<double>(column_.size());
  const double joint = static_cast<double>(raw_count(word, cluster)) + alpha_;
  const double word_total = word_mass_[word] + alpha_ * k;
  const double cluster_total = cluster_mass_[c] + alpha_ * v;
  const double n = total_ + alpha_ * v * k;
  return std::log2((joint / n) / ((word_total / n) * (cluster_total / n)));
}

std::vector<std::string> pmi_keywords(ClusterId cluster, const VocabularyStats& stats,
                                      const CurationConfig& config) {
  if (!stats.has_cluster(cluster) || stats.vocabulary_size() == 0) return {};
  struct Scored {
    double pmi;
    std::size_t count;
    std::size_t word;
  };
  std::vector<Scored> scored;
  for (std::size_t w = 0; w < stats.vocabulary_size(); ++w) {
    const auto count = stats.raw_count(w, cluster);
    if (count == 0) continue;
    scored.push_back({stats.pmi(w, cluster), count, w});
  }
  // words_ is sorted, so a lower word index is lexicographically smaller.
  std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
    if (a.pmi != b.pmi) return a.pmi > b.pmi;
    if (a.count != b.count) return a.count > b.count;
    return a.word < b.word;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && i < config.top_k_keywords; ++i) {
    out.push_back(stats.words()[scored[i].word]);
  }
  return out;
}

std::vector<std::string> representative_passages(const ClusterStore& store, ClusterId cluster,
                                                 std::size_t n) {
  const auto& centroid = store.cluster(cluster).centroid;
  std::vector<std::pair<double, const std::string*>> scored;
  for (const auto& m : store.members()) {
    if (m.cluster_id != cluster) continue;
    scored.emplace_back(cosine_similarity(m.record.embedding, centroid), &m.record.passage_id);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : *a.second < *b.second;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < scored.size() && i < n; ++i) out.push_back(*scored[i].second);
  return out;
}

std::string HttpSummarizer::summarize(const std::vector<std::string>& passages) {
  const auto reply = client_.post_with_retry({{"passages", passages}});
  try {
    return reply.at("summary").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(ProviderError::Kind::kMalformedResponse,
                        std::string("malformed_response: ") + e.what());
  }
}

std::string first_sentence(std::string_view text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if ((c == '.' || c == '!' || c == '?') &&
        (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1])))) {
      return std::string(text.substr(0, i + 1));
    }
  }
  return std::string(text);
}

SummaryResult summarize_cluster(const ClusterStore& store,
                                const std::vector<std::string>& representative_ids,
                                Summarizer* summarizer) {
  std::unordered_map<std::string, const PassageRecord*> by_id;
  for (const auto& m : store.members()) by_id.emplace(m.record.passage_id, &m.record);
  std::vector<std::string> texts;
  for (const auto& id : representative_ids) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("unknown passage " + id);
    texts.push_back(it->second->text.value_or(""));
  }
  if (summarizer) {
    try {
      auto summary = summarizer->summarize(texts);
      if (!summary.empty()) return {std::move(summary), false};
    } catch (const ServiceError&) {
    }
  }
  SummaryResult result{"", true};
  for (const auto& t : texts) {
    const auto s = first_sentence(t);
    if (s.empty()) continue;
    if (!result.summary.empty()) result.summary.push_back(' ');
    result.summary += s;
  }
  return result;
}

std::vector<NarrativeLabel> curate(const ClusterStore& store, const CurationConfig& config,
                                   Summarizer* summarizer) {
  const auto retained = filter_clusters(store, config);
  const VocabularyStats stats(store, retained, config);
  std::vector<NarrativeLabel> labels(retained.size());
  parallel_for(retained.size(), config.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      labels[i].cluster_id = retained[i];
      labels[i].keywords = pmi_keywords(retained[i], stats, config);
      labels[i].representative_passage_ids =
          representative_passages(store, retained[i], config.representatives);
    }
  });
  // Summarizer calls stay on one thread.
  for (auto& label : labels) {
    auto s = summarize_cluster(store, label.representative_passage_ids, summarizer);
    label.summary = std::move(s.summary);
    label.summary_fallback = s.fallback;
  }
  return labels;
}

void export_labels_jsonl(const std::vector<NarrativeLabel>& labels, std::ostream& out) {
  for (const auto& l : labels) {
    nlohmann::json j = {{"cluster_id", l.cluster_id},
                        {"keywords", l.keywords},
                        {"summary", l.summary ? nlohmann::json(*l.summary) : nlohmann::json(nullptr)},
                        {"summary_fallback", l.summary_fallback},
                        {"representative_passage_ids", l.representative_passage_ids}};
    out << j.dump() << '\n';
  }
}

}  // namespace narrative
