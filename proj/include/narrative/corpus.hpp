#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "narrative/date.hpp"

namespace narrative {

struct ArticleDoc {
  std::string article_id;
  std::string domain;  // lowercase registrable domain
  Date published_date;
  std::string language_tag;
  std::string title;
  std::string body;
};

struct PassagePlain {
  std::string passage_id;
  std::string article_id;
  std::size_t ordinal = 0;
  std::size_t token_count = 0;
  std::string text;
};

struct StudyWindow {
  Date start;
  Date end;

  bool contains(Date d) const { return start <= d && d <= end; }
};

enum class RejectReason { kNonEnglish, kEmptyBody, kOutOfWindow };

std::string_view to_string(RejectReason reason);

// std::nullopt means the article is admitted.
using Admission = std::optional<RejectReason>;

inline constexpr std::size_t kDefaultMaxTokens = 100;

// Strips URLs, emoji, and markup tags; collapses whitespace runs to one
// space, or to a single '\n' / '\t' when the run crosses a line or tab.
// Idempotent.
std::string normalize_text(std::string_view raw);

// Splits on Unicode whitespace.
std::vector<std::string_view> split_words(std::string_view text);

// Paragraphs are separated by '\n' or '\t'; each paragraph is chunked
// greedily into passages of at most max_tokens words. When include_title is
// set the title is segmented as a leading paragraph.
std::vector<PassagePlain> segment_article(const ArticleDoc& article,
                                          std::size_t max_tokens = kDefaultMaxTokens,
                                          bool include_title = false);

Admission admit_article(const ArticleDoc& article, const StudyWindow& window);

bool is_english_tag(std::string_view language_tag);

// One JSON object per line: {article_id, domain, published_date, language_tag,
// title, body}. Throws DataError naming the offending line.
std::vector<ArticleDoc> read_articles(std::istream& in);

}  // namespace narrative
