#include <doctest.h>

#include <random>
#include <sstream>

#include "narrative/corpus.hpp"
#include "narrative/error.hpp"

using namespace narrative;

namespace {

ArticleDoc article(std::string body, std::string lang = "en", Date day = Date::from_ymd(2022, 3, 1)) {
  ArticleDoc a;
  a.article_id = "a1";
  a.domain = "example.com";
  a.published_date = day;
  a.language_tag = std::move(lang);
  a.title = "Title here";
  a.body = std::move(body);
  return a;
}

std::string words(std::size_t n, const std::string& stem = "w") {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += stem + std::to_string(i);
  }
  return out;
}

const StudyWindow kWindow{Date::from_ymd(2022, 1, 1), Date::from_ymd(2022, 12, 31)};

}  // namespace

TEST_CASE("normalize strips urls, emoji, and tags") {
  CHECK(normalize_text("see https://x.y/z now") == "see now");
  CHECK(normalize_text("a\xF0\x9F\x98\x80" "b") == "ab");
  CHECK(normalize_text("<p>hello</p>") == "hello");
  CHECK(normalize_text("visit www.example.com today") == "visit today");
  CHECK(normalize_text("  spaced\t\tout  ") == "spaced\tout");
  CHECK(normalize_text("one\n\n\ntwo") == "one\ntwo");
  CHECK(normalize_text("a < b and c > d") == "a < b and c > d");
}

TEST_CASE("normalize is idempotent on random noisy text") {
  const std::vector<std::string> pieces = {"word", " ", "\n", "\t", "<b>", "</b>", "http://a.b/c", "www.x.org",
                                           "\xF0\x9F\x98\x80", "\xE2\x9C\x85", "<", ">", "caf\xC3\xA9", "\xFF",
                                           "\xE2\x80\x83", "(https://q.r)", "x", ".", "<br/>"};
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  for (int trial = 0; trial < 2000; ++trial) {
    std::string s;
    const int len = static_cast<int>(rng() % 30);
    for (int i = 0; i < len; ++i) s += pieces[pick(rng)];
    const auto once = normalize_text(s);
    CHECK(normalize_text(once) == once);
  }
}

TEST_CASE("split_words handles unicode whitespace") {
  const auto w = split_words("a\xE2\x80\x83" "b\xC2\xA0" "c  d");
  REQUIRE(w.size() == 4);
  CHECK(w[0] == "a");
  CHECK(w[3] == "d");
}

TEST_CASE("segmentation chunks greedily within paragraphs") {
  const auto p = segment_article(article(words(250)));
  REQUIRE(p.size() == 3);
  CHECK(p[0].token_count == 100);
  CHECK(p[1].token_count == 100);
  CHECK(p[2].token_count == 50);
  CHECK(p[0].passage_id == "a1:0");
  CHECK(p[2].passage_id == "a1:2");

  const auto two = segment_article(article(words(30, "x") + "\n" + words(30, "y")));
  REQUIRE(two.size() == 2);
  CHECK(two[0].token_count == 30);
  CHECK(two[1].token_count == 30);

  CHECK(segment_article(article("")).empty());
}

TEST_CASE("segmentation partitions every paragraph's words") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::string body;
    std::vector<std::string> expected;
    const int paragraphs = 1 + static_cast<int>(rng() % 4);
    for (int p = 0; p < paragraphs; ++p) {
      if (p) body += (rng() % 2) ? "\n" : "\t";
      const std::size_t n = 1 + rng() % 260;
      for (std::size_t i = 0; i < n; ++i) {
        const std::string w = "t" + std::to_string(p) + "_" + std::to_string(i);
        body += (i ? " " : "") + w;
        expected.push_back(w);
      }
    }
    const std::size_t max_tokens = 1 + rng() % 120;
    std::vector<std::string> got;
    for (const auto& passage : segment_article(article(body), max_tokens)) {
      CHECK(passage.token_count <= max_tokens);
      CHECK(passage.token_count >= 1);
      const auto ws = split_words(passage.text);
      CHECK(ws.size() == passage.token_count);
      for (const auto w : ws) got.emplace_back(w);
    }
    CHECK(got == expected);
  }
}

TEST_CASE("title is segmented only on request") {
  const auto with = segment_article(article("body text"), 100, true);
  REQUIRE(with.size() == 2);
  CHECK(with[0].text == "Title here");
  CHECK(segment_article(article("body text"), 100, false).size() == 1);
}

TEST_CASE("admission rules") {
  CHECK_FALSE(admit_article(article("text"), kWindow).has_value());
  CHECK(admit_article(article("text", "en-US"), kWindow) == std::nullopt);
  CHECK(admit_article(article("text", "ru"), kWindow) == RejectReason::kNonEnglish);
  CHECK(admit_article(article("   "), kWindow) == RejectReason::kEmptyBody);
  CHECK(admit_article(article("text", "en", Date::from_ymd(2021, 12, 31)), kWindow) == RejectReason::kOutOfWindow);
  CHECK(admit_article(article("text", "en", Date::from_ymd(2022, 12, 31)), kWindow) == std::nullopt);
  CHECK(to_string(RejectReason::kNonEnglish) == "non_english");
}

TEST_CASE("read_articles parses JSONL and rejects duplicates") {
  std::istringstream ok(
      R"({"article_id":"a","domain":"Example.COM","published_date":"2022-03-01","language_tag":"en","title":"t","body":"b"})"
      "\n\n"
      R"({"article_id":"b","domain":"x.org","published_date":"2022-03-02","language_tag":"en","title":"t","body":"b"})"
      "\n");
  const auto a = read_articles(ok);
  REQUIRE(a.size() == 2);
  CHECK(a[0].domain == "example.com");
  CHECK(a[1].published_date == Date::from_ymd(2022, 3, 2));

  std::istringstream dup(
      R"({"article_id":"a","domain":"x","published_date":"2022-03-01","language_tag":"en","title":"","body":"b"})"
      "\n"
      R"({"article_id":"a","domain":"x","published_date":"2022-03-01","language_tag":"en","title":"","body":"b"})");
  CHECK_THROWS_AS(read_articles(dup), DataError);

  std::istringstream bad("{not json}\n");
  CHECK_THROWS_AS(read_articles(bad), DataError);
}

TEST_CASE("dates") {
  const auto d = Date::parse("2022-03-01");
  CHECK(d.to_string() == "2022-03-01");
  CHECK((d + 1).to_string() == "2022-03-02");
  CHECK(Date::parse("2020-02-29") - Date::parse("2020-02-28") == 1);
  CHECK(Date::parse("1970-01-01").days() == 0);
  CHECK_THROWS_AS(Date::parse("2022-02-30"), DataError);
  CHECK_THROWS_AS(Date::parse("2022-3-01"), DataError);
}
