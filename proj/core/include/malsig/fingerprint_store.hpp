#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <json.hpp>

#include "malsig/ball_tree.hpp"
#include "malsig/features.hpp"

namespace malsig {

// On-disk layout, all integers little-endian:
//
//   offset  size  field
//   0       8     magic "SPAMFP01"
//   8       4     format version (1)
//   12      4     descriptor kind (1 = GIST, 2 = RP)
//   16      4     descriptor dimension
//   20      8     record count
//   28      4     metadata length in bytes
//   32      4     CRC-32 of everything after the header
//   36      ...   metadata (UTF-8 JSON)
//   ...     ...   records, each kRecordFixedBytes + 4 * dimension bytes:
//                   sha256 (32) | label (128, NUL-padded UTF-8) |
//                   byte_length u64 | added_at i64 | descriptor f32[dim]
inline constexpr char kStoreMagic[8] = {'S', 'P', 'A', 'M', 'F', 'P', '0', '1'};
inline constexpr std::uint32_t kStoreVersion = 1;
inline constexpr std::size_t kStoreHeaderBytes = 36;
inline constexpr std::size_t kLabelBytes = 128;
inline constexpr std::size_t kRecordFixedBytes = 32 + kLabelBytes + 8 + 8;

struct StoreMetadata {
  DescriptorKind kind = DescriptorKind::Gist;
  std::uint32_t dimension = 0;
  std::uint32_t version = kStoreVersion;
  // Resolved FeatureConfig plus any free-form extras (tool version, ...).
  nlohmann::json feature_config = nlohmann::json::object();

  static StoreMetadata for_features(const FeatureConfig& config);
  bool operator==(const StoreMetadata&) const = default;
};

struct Store {
  StoreMetadata metadata;
  std::vector<FingerprintRecord> records;
};

// Serialized bytes; throws DimensionMismatch, InvalidConfig (label too long or
// duplicate sha256).
std::vector<std::uint8_t> encode_store(const Store& store);
// Throws CorruptStore or VersionMismatch.
Store decode_store(std::span<const std::uint8_t> bytes);

// Writes to a temporary sibling and renames over path.
void store_save(const Store& store, const std::filesystem::path& path);
Store store_load(const std::filesystem::path& path);

// Throws DimensionMismatch when a query does not fit the store.
void check_query_dimension(const StoreMetadata& metadata, std::size_t query_dimension);

}  // namespace malsig
