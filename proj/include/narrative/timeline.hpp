#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "narrative/clusterer.hpp"

namespace narrative {

struct ArticleRef {
  std::string article_id;
  std::string domain;
  Date date;
};

// Distinct articles of one narrative in (date, article_id) order.
struct NarrativeTimeline {
  ClusterId cluster_id = 0;
  std::vector<ArticleRef> articles;
  std::map<Date, std::size_t> daily_counts;
  std::map<std::string, Date> domain_first_date;

  Date first_day() const { return articles.front().date; }
  Date peak_day() const;
  std::size_t total_articles() const { return articles.size(); }
};

// Day with the most distinct articles; earliest on ties.
Date peak_day(const std::map<Date, std::size_t>& daily_counts);

NarrativeTimeline make_timeline(ClusterId cluster, std::vector<ArticleRef> articles);

// One timeline per listed cluster that has at least one article, in the
// order given.
std::vector<NarrativeTimeline> build_timelines(const ClusterStore& store,
                                               const std::vector<ClusterId>& clusters);

}  // namespace narrative
