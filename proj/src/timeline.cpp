#include "narrative/timeline.hpp"

#include <algorithm>
#include <set>

#include "narrative/error.hpp"

namespace narrative {

Date peak_day(const std::map<Date, std::size_t>& daily_counts) {
  if (daily_counts.empty()) throw DataError("peak_day: narrative has no articles");
  auto best = daily_counts.begin();
  for (auto it = daily_counts.begin(); it != daily_counts.end(); ++it) {
    if (it->second > best->second) best = it;
  }
  return best->first;
}

Date NarrativeTimeline::peak_day() const { return narrative::peak_day(daily_counts); }

NarrativeTimeline make_timeline(ClusterId cluster, std::vector<ArticleRef> articles) {
  std::sort(articles.begin(), articles.end(), [](const ArticleRef& a, const ArticleRef& b) {
    return a.date != b.date ? a.date < b.date : a.article_id < b.article_id;
  });
  articles.erase(std::unique(articles.begin(), articles.end(),
                             [](const ArticleRef& a, const ArticleRef& b) { return a.article_id == b.article_id; }),
                 articles.end());
  NarrativeTimeline t;
  t.cluster_id = cluster;
  for (const auto& a : articles) {
    ++t.daily_counts[a.date];
    t.domain_first_date.try_emplace(a.domain, a.date);
  }
  t.articles = std::move(articles);
  return t;
}

std::vector<NarrativeTimeline> build_timelines(const ClusterStore& store,
                                               const std::vector<ClusterId>& clusters) {
  std::map<ClusterId, std::vector<ArticleRef>> refs;
  std::map<ClusterId, std::set<std::string>> seen;
  for (const auto id : clusters) {
    store.cluster(id);
    refs[id];
  }
  for (const auto& m : store.members()) {
    const auto it = refs.find(m.cluster_id);
    if (it == refs.end()) continue;
    if (!seen[m.cluster_id].insert(m.record.article_id).second) continue;
    it->second.push_back({m.record.article_id, m.record.domain, m.record.published_date});
  }
  std::vector<NarrativeTimeline> out;
  for (const auto id : clusters) {
    auto& a = refs[id];
    if (a.empty()) continue;
    out.push_back(make_timeline(id, std::move(a)));
  }
  return out;
}

}  // namespace narrative
