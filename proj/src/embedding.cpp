#include "narrative/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <tuple>

#include <json.hpp>

#include "narrative/error.hpp"
#include "narrative/parallel.hpp"

namespace narrative {

namespace {

constexpr std::size_t kLeafSize = 8;

double pairwise_dot(const double* a, const double* b, std::size_t n) {
  if (n <= kLeafSize) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_dot(a, b, half) + pairwise_dot(a + half, b + half, n - half);
}

}  // namespace

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("dot: dimension mismatch");
  return pairwise_dot(a.data(), b.data(), a.size());
}

double norm(std::span<const double> v) { return std::sqrt(dot(v, v)); }

const char* to_string(VectorIssue issue) {
  switch (issue) {
    case VectorIssue::kBadDimension: return "bad_dimension";
    case VectorIssue::kNonFinite: return "non_finite";
    case VectorIssue::kZeroVector: return "zero_vector";
  }
  return "unknown";
}

VectorCheck validate_and_normalize(EmbeddingVector& v, std::size_t dimension) {
  VectorCheck check;
  if (v.size() != dimension) {
    check.issue = VectorIssue::kBadDimension;
    return check;
  }
  if (!std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) {
    check.issue = VectorIssue::kNonFinite;
    return check;
  }
  const double n = norm(v);
  if (n == 0.0) {
    check.issue = VectorIssue::kZeroVector;
    return check;
  }
  if (!std::isfinite(n)) {
    check.issue = VectorIssue::kNonFinite;
    return check;
  }
  check.out_of_tolerance = std::abs(n - 1.0) > kRenormalizeTolerance;
  for (auto& x : v) x /= n;
  return check;
}

const PassageRecord* EmbeddingStore::find(const std::string& passage_id) const {
  const auto it = records_.find(passage_id);
  return it == records_.end() ? nullptr : &it->second;
}

IngestReport EmbeddingStore::ingest(std::vector<PassageRecord> records, std::size_t threads) {
  IngestReport report;
  std::vector<VectorCheck> checks(records.size());
  parallel_for(records.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      checks[i] = validate_and_normalize(records[i].embedding, dimension_);
    }
  });

  auto key = [](const PassageRecord& r) {
    return std::tie(r.article_id, r.domain, r.published_date, r.ordinal, r.embedding, r.text);
  };
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& rec = records[i];
    if (checks[i].issue) {
      report.reject(to_string(*checks[i].issue));
      continue;
    }
    if (rec.passage_id.empty() || rec.domain.empty()) {
      report.reject("missing_identity");
      continue;
    }
    if (checks[i].out_of_tolerance) ++report.renormalized_warnings;
    auto [it, inserted] = records_.try_emplace(rec.passage_id, rec);
    if (inserted) {
      ++report.accepted;
      continue;
    }
    report.reject("duplicate_passage_id");
    if (key(rec) < key(it->second)) it->second = std::move(rec);
  }
  return report;
}

std::vector<PassageRecord> EmbeddingStore::on_day(Date day) const {
  std::vector<PassageRecord> out;
  for (const auto& [id, rec] : records_) {
    if (rec.published_date == day) out.push_back(rec);
  }
  return out;
}

std::vector<PassageRecord> read_embedding_records(std::istream& in, IngestReport& report) {
  std::vector<PassageRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      PassageRecord r;
      r.passage_id = j.at("passage_id").get<std::string>();
      r.article_id = j.at("article_id").get<std::string>();
      r.domain = j.at("domain").get<std::string>();
      std::transform(r.domain.begin(), r.domain.end(), r.domain.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      r.published_date = Date::parse(j.at("published_date").get<std::string>());
      r.ordinal = j.value("ordinal", std::size_t{0});
      r.embedding = j.at("vector").get<std::vector<double>>();
      if (j.contains("text") && j["text"].is_string()) r.text = j["text"].get<std::string>();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception&) {
      report.reject("malformed");
    } catch (const DataError&) {
      report.reject("malformed");
    }
  }
  return out;
}

}  // namespace narrative
