#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "narrative/date.hpp"

namespace narrative {

inline constexpr std::size_t kDefaultDimension = 768;
inline constexpr double kRenormalizeTolerance = 1e-3;

using EmbeddingVector = std::vector<double>;

struct PassageRecord {
  std::string passage_id;
  std::string article_id;
  std::string domain;
  Date published_date;
  std::size_t ordinal = 0;
  EmbeddingVector embedding;
  std::optional<std::string> text;

  bool operator==(const PassageRecord&) const = default;
};

// Dot product with a fixed pairwise-tree summation. The reduction shape
// depends only on the length, so dot(a, b) == dot(b, a) bit for bit.
double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);

// Unit vectors in, cosine out.
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  return dot(a, b);
}

enum class VectorIssue { kBadDimension, kNonFinite, kZeroVector };
const char* to_string(VectorIssue issue);

struct VectorCheck {
  std::optional<VectorIssue> issue;
  bool out_of_tolerance = false;  // norm outside [1 - tol, 1 + tol], renormalized anyway
};

// Validates and renormalizes in place.
VectorCheck validate_and_normalize(EmbeddingVector& v, std::size_t dimension);

struct IngestReport {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
  std::size_t renormalized_warnings = 0;
  std::map<std::string, std::size_t> reasons;

  void reject(const std::string& reason) {
    ++rejected;
    ++reasons[reason];
  }
};

// Keyed by passage_id. Duplicate ids are rejected; of two records sharing an
// id the smaller one (by article, domain, date, ordinal, vector, text) is kept, so the final
// contents do not depend on arrival order.
class EmbeddingStore {
 public:
  explicit EmbeddingStore(std::size_t dimension = kDefaultDimension) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return records_.size(); }
  bool contains(const std::string& passage_id) const { return records_.count(passage_id) > 0; }
  const PassageRecord* find(const std::string& passage_id) const;
  const std::map<std::string, PassageRecord>& records() const { return records_; }

  // Validation runs on `threads` workers; commits are applied by the caller's thread.
  IngestReport ingest(std::vector<PassageRecord> records, std::size_t threads = 1);

  std::vector<PassageRecord> on_day(Date day) const;

 private:
  std::size_t dimension_;
  std::map<std::string, PassageRecord> records_;
};

// Line-delimited {passage_id, article_id, domain, published_date, ordinal,
// vector, text?}. Lines that fail to parse are counted in `report` as
// "malformed" and skipped.
std::vector<PassageRecord> read_embedding_records(std::istream& in, IngestReport& report);

}  // namespace narrative
