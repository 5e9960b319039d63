#include "narrative/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <set>

#include <json.hpp>

#include "narrative/error.hpp"

namespace narrative {

namespace {

struct Codepoint {
  char32_t value;
  std::size_t length;  // bytes consumed; invalid sequences report value 0xFFFD
};

Codepoint decode_utf8(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return {b0, 1};
  std::size_t len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    return {0xFFFD, 1};
  }
  if (i + len > s.size()) return {0xFFFD, 1};
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return {0xFFFD, 1};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {cp, len};
}

bool is_emoji(char32_t cp) {
  return (cp >= 0x1F000 && cp <= 0x1FAFF) ||  // pictographs, emoticons, flags
         (cp >= 0x2600 && cp <= 0x27BF) ||    // misc symbols, dingbats
         (cp >= 0x2B00 && cp <= 0x2BFF) ||    // stars, arrows
         (cp >= 0x2300 && cp <= 0x23FF) ||    // watch, hourglass, etc.
         cp == 0xFE0F || cp == 0xFE0E || cp == 0x200D || cp == 0x20E3 ||
         (cp >= 0xE0020 && cp <= 0xE007F);    // tag sequences
}

bool is_space_cp(char32_t cp) {
  switch (cp) {
    case ' ': case '\n': case '\t': case '\r': case '\v': case '\f':
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_invalid(char32_t cp) { return cp == 0xFFFD; }

std::string strip_tags(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '<' && i + 1 < s.size()) {
      std::size_t j = i + 1;
      if (s[j] == '/' || s[j] == '!') ++j;
      if (j < s.size() && std::isalpha(static_cast<unsigned char>(s[j]))) {
        const auto close = s.find('>', j);
        const auto newline = s.find('\n', j);
        if (close != std::string_view::npos && (newline == std::string_view::npos || close < newline)) {
          out.push_back(' ');
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(s[i]);
    ++i;
  }
  return out;
}

bool starts_url(std::string_view s, std::size_t i) {
  auto at = [&](std::string_view prefix) {
    if (s.size() - i < prefix.size()) return false;
    for (std::size_t k = 0; k < prefix.size(); ++k) {
      if (std::tolower(static_cast<unsigned char>(s[i + k])) != prefix[k]) return false;
    }
    return true;
  };
  return at("http://") || at("https://") || at("www.");
}

std::string strip_urls(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const bool word_start = i == 0 || std::isspace(static_cast<unsigned char>(s[i - 1])) ||
                            s[i - 1] == '(' || s[i - 1] == '"' || s[i - 1] == '\'';
    if (word_start && starts_url(s, i)) {
      while (i < s.size()) {
        const auto cp = decode_utf8(s, i);
        if (is_space_cp(cp.value)) break;
        i += cp.length;
      }
      continue;
    }
    out.push_back(s[i]);
    ++i;
  }
  return out;
}

// Drops emoji and invalid bytes, canonicalises whitespace runs.
std::string clean_codepoints(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = false;
  char pending = ' ';
  std::size_t i = 0;
  while (i < s.size()) {
    const auto cp = decode_utf8(s, i);
    const auto bytes = s.substr(i, cp.length);
    i += cp.length;
    if (is_emoji(cp.value) || is_invalid(cp.value)) continue;
    if (is_space_cp(cp.value)) {
      if (!in_space) pending = ' ';
      in_space = true;
      if (cp.value == '\n' || cp.value == '\r' || cp.value == 0x2028 || cp.value == 0x2029) {
        pending = '\n';
      } else if (cp.value == '\t' && pending != '\n') {
        pending = '\t';
      }
      continue;
    }
    if (in_space && !out.empty()) out.push_back(pending);
    in_space = false;
    out.append(bytes);
  }
  return out;
}

std::string normalize_once(std::string_view raw) {
  return clean_codepoints(strip_urls(strip_tags(raw)));
}

}  // namespace

std::string_view to_string(RejectReason reason) {
  switch (reason) {
    case RejectReason::kNonEnglish: return "non_english";
    case RejectReason::kEmptyBody: return "empty_body";
    case RejectReason::kOutOfWindow: return "out_of_window";
  }
  return "unknown";
}

std::string normalize_text(std::string_view raw) {
  // Removing one construct can expose another ("<<b>p>"), so run to a fixpoint.
  std::string current = normalize_once(raw);
  for (int pass = 0; pass < 16; ++pass) {
    std::string next = normalize_once(current);
    if (next == current) break;
    current = std::move(next);
  }
  return current;
}

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  std::size_t start = std::string_view::npos;
  while (i < text.size()) {
    const auto cp = decode_utf8(text, i);
    if (is_space_cp(cp.value)) {
      if (start != std::string_view::npos) {
        words.push_back(text.substr(start, i - start));
        start = std::string_view::npos;
      }
    } else if (start == std::string_view::npos) {
      start = i;
    }
    i += cp.length;
  }
  if (start != std::string_view::npos) words.push_back(text.substr(start));
  return words;
}

std::vector<PassagePlain> segment_article(const ArticleDoc& article, std::size_t max_tokens,
                                          bool include_title) {
  if (max_tokens == 0) throw UsageError("max_tokens must be positive");
  std::vector<PassagePlain> passages;
  auto segment_text = [&](std::string_view text) {
    std::size_t begin = 0;
    while (begin <= text.size()) {
      auto end = text.find_first_of("\n\t", begin);
      if (end == std::string_view::npos) end = text.size();
      const auto words = split_words(text.substr(begin, end - begin));
      for (std::size_t w = 0; w < words.size(); w += max_tokens) {
        const std::size_t stop = std::min(words.size(), w + max_tokens);
        PassagePlain p;
        p.article_id = article.article_id;
        p.ordinal = passages.size();
        p.passage_id = article.article_id + ":" + std::to_string(p.ordinal);
        p.token_count = stop - w;
        for (std::size_t k = w; k < stop; ++k) {
          if (k > w) p.text.push_back(' ');
          p.text.append(words[k]);
        }
        passages.push_back(std::move(p));
      }
      begin = end + 1;
    }
  };
  if (include_title && !article.title.empty()) segment_text(article.title);
  segment_text(article.body);
  return passages;
}

bool is_english_tag(std::string_view tag) {
  if (tag.size() < 2) return false;
  const auto c0 = std::tolower(static_cast<unsigned char>(tag[0]));
  const auto c1 = std::tolower(static_cast<unsigned char>(tag[1]));
  if (c0 != 'e' || c1 != 'n') return false;
  return tag.size() == 2 || tag[2] == '-' || tag[2] == '_';
}

Admission admit_article(const ArticleDoc& article, const StudyWindow& window) {
  if (!is_english_tag(article.language_tag)) return RejectReason::kNonEnglish;
  if (split_words(normalize_text(article.body)).empty()) return RejectReason::kEmptyBody;
  if (!window.contains(article.published_date)) return RejectReason::kOutOfWindow;
  return std::nullopt;
}

std::vector<ArticleDoc> read_articles(std::istream& in) {
  std::vector<ArticleDoc> docs;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      ArticleDoc doc;
      doc.article_id = j.at("article_id").get<std::string>();
      doc.domain = j.at("domain").get<std::string>();
      std::transform(doc.domain.begin(), doc.domain.end(), doc.domain.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      doc.published_date = Date::parse(j.at("published_date").get<std::string>());
      doc.language_tag = j.value("language_tag", "");
      doc.title = j.value("title", "");
      doc.body = j.value("body", "");
      if (doc.article_id.empty()) throw DataError("empty article_id");
      if (doc.domain.empty()) throw DataError("empty domain");
      if (!seen.insert(doc.article_id).second) throw DataError("duplicate article_id " + doc.article_id);
      docs.push_back(std::move(doc));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("articles line " + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("articles line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return docs;
}

}  // namespace narrative
