#include "narrative/snapshot.hpp"

#include <bit>
#include <cstring>
#include <type_traits>

#include <json.hpp>
#include <zlib.h>

namespace narrative {

static_assert(std::endian::native == std::endian::little, "snapshot codec assumes little-endian hosts");

namespace {

constexpr char kMagic[8] = {'N', 'A', 'R', 'R', 'S', 'N', 'A', 'P'};

class Writer {
 public:
  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void put(const T& v) {
    buf_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put_string(std::string_view s) {
    put<std::uint64_t>(s.size());
    buf_.append(s);
  }
  void put_vector(const EmbeddingVector& v) {
    put<std::uint64_t>(v.size());
    buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  std::string& str() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data) : data_(data) {}

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto len = get<std::uint64_t>();
    need(len);
    std::string s(data_.substr(pos_, len));
    pos_ += len;
    return s;
  }
  EmbeddingVector get_vector() {
    const auto len = get<std::uint64_t>();
    if (len > (data_.size() - pos_) / sizeof(double)) truncated();
    EmbeddingVector v(len);
    std::memcpy(v.data(), data_.data() + pos_, len * sizeof(double));
    pos_ += len * sizeof(double);
    return v;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) truncated();
  }
  [[noreturn]] static void truncated() {
    throw SnapshotError(SnapshotError::Kind::kTruncated, "snapshot truncated");
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

void put_record(Writer& w, const PassageRecord& r) {
  w.put_string(r.passage_id);
  w.put_string(r.article_id);
  w.put_string(r.domain);
  w.put<std::int32_t>(r.published_date.days());
  w.put<std::uint64_t>(r.ordinal);
  w.put_vector(r.embedding);
  w.put<std::uint8_t>(r.text ? 1 : 0);
  if (r.text) w.put_string(*r.text);
}

PassageRecord get_record(Reader& rd) {
  PassageRecord r;
  r.passage_id = rd.get_string();
  r.article_id = rd.get_string();
  r.domain = rd.get_string();
  r.published_date = Date(rd.get<std::int32_t>());
  r.ordinal = rd.get<std::uint64_t>();
  r.embedding = rd.get_vector();
  if (rd.get<std::uint8_t>()) r.text = rd.get_string();
  return r;
}

std::string header_bytes(const SnapshotHeader& h) {
  Writer w;
  w.put(h.format_version);
  w.put(h.dimension);
  w.put(h.lambda);
  w.put(h.cluster_count);
  w.put(h.member_count);
  return std::move(w.str());
}

constexpr std::size_t kHeaderSize = sizeof(kMagic) + 4 + 4 + 8 + 8 + 8 + 4;

}  // namespace

std::uint32_t crc32_of(std::string_view bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

class SnapshotCodec {
 public:
  static std::string save(const ClusterStore& s) {
    Writer payload;
    payload.put<std::uint8_t>(s.last_day_ ? 1 : 0);
    payload.put<std::int32_t>(s.last_day_ ? s.last_day_->days() : 0);
    for (const auto& c : s.clusters_) {
      payload.put<std::uint32_t>(c.cluster_id);
      payload.put_vector(c.resultant);
      payload.put_vector(c.centroid);
      payload.put<std::uint64_t>(c.member_count);
      payload.put<std::int32_t>(c.created_on.days());
      payload.put<std::uint64_t>(c.per_domain_articles.size());
      for (const auto& [domain, ids] : c.per_domain_articles) {
        payload.put_string(domain);
        payload.put<std::uint64_t>(ids.size());
        for (const auto& id : ids) payload.put_string(id);
      }
      payload.put<std::uint64_t>(c.per_domain_passages.size());
      for (const auto& [domain, count] : c.per_domain_passages) {
        payload.put_string(domain);
        payload.put<std::uint64_t>(count);
      }
      payload.put<std::uint64_t>(c.per_day_articles.size());
      for (const auto& [day, count] : c.per_day_articles) {
        payload.put<std::int32_t>(day.days());
        payload.put<std::uint64_t>(count);
      }
    }
    for (const auto& m : s.members_) {
      put_record(payload, m.record);
      payload.put<std::uint32_t>(m.cluster_id);
      payload.put(m.similarity);
      payload.put<std::uint8_t>(m.seeded ? 1 : 0);
    }

    SnapshotHeader h;
    h.dimension = static_cast<std::uint32_t>(s.dimension_);
    h.lambda = s.lambda_;
    h.cluster_count = s.clusters_.size();
    h.member_count = s.members_.size();
    const auto hb = header_bytes(h);
    h.checksum = crc32_of(hb + payload.str());

    std::string blob(kMagic, sizeof(kMagic));
    blob += hb;
    Writer tail;
    tail.put(h.checksum);
    blob += tail.str();
    blob += payload.str();
    return blob;
  }

  static ClusterStore load(std::string_view blob) {
    const auto h = snapshot_peek(blob);
    const auto covered = std::string(blob.substr(sizeof(kMagic), kHeaderSize - sizeof(kMagic) - 4));
    const auto payload_view = blob.substr(kHeaderSize);
    if (crc32_of(covered + std::string(payload_view)) != h.checksum) {
      throw SnapshotError(SnapshotError::Kind::kChecksum, "snapshot checksum mismatch");
    }
    Reader rd(payload_view);
    ClusterStore s(h.dimension);
    s.lambda_ = h.lambda;
    const bool has_day = rd.get<std::uint8_t>() != 0;
    const auto day = rd.get<std::int32_t>();
    if (has_day) s.last_day_ = Date(day);
    s.clusters_.resize(h.cluster_count);
    for (auto& c : s.clusters_) {
      c.cluster_id = rd.get<std::uint32_t>();
      c.resultant = rd.get_vector();
      c.centroid = rd.get_vector();
      c.member_count = rd.get<std::uint64_t>();
      c.created_on = Date(rd.get<std::int32_t>());
      for (auto n = rd.get<std::uint64_t>(); n > 0; --n) {
        auto domain = rd.get_string();
        auto& ids = c.per_domain_articles[domain];
        for (auto k = rd.get<std::uint64_t>(); k > 0; --k) ids.insert(rd.get_string());
      }
      for (auto n = rd.get<std::uint64_t>(); n > 0; --n) {
        auto domain = rd.get_string();
        c.per_domain_passages[domain] = rd.get<std::uint64_t>();
      }
      for (auto n = rd.get<std::uint64_t>(); n > 0; --n) {
        const Date d(rd.get<std::int32_t>());
        c.per_day_articles[d] = rd.get<std::uint64_t>();
      }
    }
    s.members_.resize(h.member_count);
    for (auto& m : s.members_) {
      m.record = get_record(rd);
      m.cluster_id = rd.get<std::uint32_t>();
      m.similarity = rd.get<double>();
      m.seeded = rd.get<std::uint8_t>() != 0;
      s.passage_ids_.insert(m.record.passage_id);
    }
    if (!rd.done()) {
      throw SnapshotError(SnapshotError::Kind::kTruncated, "trailing bytes after snapshot payload");
    }
    return s;
  }
};

std::string snapshot_save(const ClusterStore& store) { return SnapshotCodec::save(store); }

ClusterStore snapshot_load(std::string_view blob) { return SnapshotCodec::load(blob); }

SnapshotHeader snapshot_peek(std::string_view blob) {
  if (blob.size() < kHeaderSize) {
    throw SnapshotError(SnapshotError::Kind::kTruncated, "snapshot shorter than its header");
  }
  if (std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0) {
    throw SnapshotError(SnapshotError::Kind::kBadMagic, "not a narrative snapshot");
  }
  Reader rd(blob.substr(sizeof(kMagic), kHeaderSize - sizeof(kMagic)));
  SnapshotHeader h;
  h.format_version = rd.get<std::uint32_t>();
  if (h.format_version != kSnapshotFormatVersion) {
    throw SnapshotError(SnapshotError::Kind::kVersionMismatch,
                        "snapshot format version " + std::to_string(h.format_version) +
                            ", expected " + std::to_string(kSnapshotFormatVersion));
  }
  h.dimension = rd.get<std::uint32_t>();
  h.lambda = rd.get<double>();
  h.cluster_count = rd.get<std::uint64_t>();
  h.member_count = rd.get<std::uint64_t>();
  h.checksum = rd.get<std::uint32_t>();
  return h;
}

void snapshot_export_jsonl(const ClusterStore& store, std::ostream& out) {
  nlohmann::json head = {{"format_version", kSnapshotFormatVersion},
                         {"dimension", store.dimension()},
                         {"lambda", store.lambda()},
                         {"cluster_count", store.clusters().size()},
                         {"member_count", store.members().size()},
                         {"last_day", store.last_day() ? store.last_day()->to_string() : ""}};
  out << head.dump() << '\n';
  const auto by_cluster = store.members_by_cluster();
  for (const auto& c : store.clusters()) {
    nlohmann::json j;
    j["cluster_id"] = c.cluster_id;
    j["created_on"] = c.created_on.to_string();
    j["member_count"] = c.member_count;
    j["article_count"] = c.article_count();
    j["centroid"] = c.centroid;
    nlohmann::json days = nlohmann::json::object();
    for (const auto& [d, n] : c.per_day_articles) days[d.to_string()] = n;
    j["per_day_articles"] = days;
    nlohmann::json domains = nlohmann::json::object();
    for (const auto& [d, ids] : c.per_domain_articles) domains[d] = ids.size();
    j["per_domain_articles"] = domains;
    nlohmann::json members = nlohmann::json::array();
    for (const auto i : by_cluster[c.cluster_id]) members.push_back(store.members()[i].record.passage_id);
    j["members"] = members;
    out << j.dump() << '\n';
  }
}

}  // namespace narrative
