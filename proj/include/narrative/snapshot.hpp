#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>

#include "narrative/clusterer.hpp"
#include "narrative/error.hpp"

namespace narrative {

inline constexpr std::uint32_t kSnapshotFormatVersion = 1;

class SnapshotError : public DataError {
 public:
  enum class Kind { kBadMagic, kVersionMismatch, kChecksum, kTruncated };
  SnapshotError(Kind kind, const std::string& what) : DataError(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct SnapshotHeader {
  std::uint32_t format_version = kSnapshotFormatVersion;
  std::uint32_t dimension = 0;
  double lambda = 0.0;
  std::uint64_t cluster_count = 0;
  std::uint64_t member_count = 0;
  std::uint32_t checksum = 0;  // CRC-32 over every header field above plus the payload
};

// Binary container: magic, header, then per-cluster and per-member records.
std::string snapshot_save(const ClusterStore& store);
ClusterStore snapshot_load(std::string_view blob);
SnapshotHeader snapshot_peek(std::string_view blob);

// Line-delimited JSON for inspection: one header line, then one line per cluster.
void snapshot_export_jsonl(const ClusterStore& store, std::ostream& out);

std::uint32_t crc32_of(std::string_view bytes);

}  // namespace narrative
