#include "malsig/fingerprint_store.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <unistd.h>
#include <fcntl.h>

#include "malsig/error.hpp"
#include "malsig/hashing.hpp"

namespace malsig {

static_assert(std::endian::native == std::endian::little, "store codec assumes a little-endian host");

StoreMetadata StoreMetadata::for_features(const FeatureConfig& config) {
  StoreMetadata m;
  m.kind = config.kind;
  m.dimension = static_cast<std::uint32_t>(config.dimension());
  m.feature_config = config.to_json();
  m.feature_config["format_version"] = kStoreVersion;
  return m;
}

namespace {

class Writer {
 public:
  explicit Writer(std::vector<std::uint8_t>& out) : out_(out) {}

  template <typename T>
  void put(T v) {
    std::uint8_t b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out_.insert(out_.end(), b, b + sizeof(T));
  }
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), c, c + n);
  }

 private:
  std::vector<std::uint8_t>& out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  template <typename T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)).data(), sizeof(T));
    return v;
  }
  std::span<const std::uint8_t> take(std::size_t n) {
    if (n > in_.size() - pos_) throw Error(Errc::CorruptStore, "store is truncated");
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

void check_query_dimension(const StoreMetadata& metadata, std::size_t query_dimension) {
  if (query_dimension != metadata.dimension)
    throw Error(Errc::DimensionMismatch, "store holds " + std::to_string(metadata.dimension) +
                                             "-d descriptors, query has " + std::to_string(query_dimension));
}

std::vector<std::uint8_t> encode_store(const Store& store) {
  const auto& meta = store.metadata;
  std::set<Sha256> seen;
  for (const auto& r : store.records) {
    if (r.descriptor.size() != meta.dimension)
      throw Error(Errc::DimensionMismatch, "record " + to_hex(r.sha256) + " has dimension " +
                                               std::to_string(r.descriptor.size()));
    if (r.label.size() > kLabelBytes || r.label.find('\0') != std::string::npos)
      throw Error(Errc::InvalidConfig, "label for " + to_hex(r.sha256) + " exceeds " +
                                           std::to_string(kLabelBytes) + " bytes or contains NUL");
    if (!seen.insert(r.sha256).second)
      throw Error(Errc::InvalidConfig, "duplicate sha256 " + to_hex(r.sha256));
  }

  const std::string meta_text = meta.feature_config.dump();
  std::vector<std::uint8_t> body;
  body.reserve(meta_text.size() + store.records.size() * (kRecordFixedBytes + 4 * meta.dimension));
  Writer b(body);
  b.bytes(meta_text.data(), meta_text.size());
  for (const auto& r : store.records) {
    b.bytes(r.sha256.data(), r.sha256.size());
    char label[kLabelBytes] = {};
    std::memcpy(label, r.label.data(), r.label.size());
    b.bytes(label, kLabelBytes);
    b.put<std::uint64_t>(r.byte_length);
    b.put<std::int64_t>(r.added_at);
    b.bytes(r.descriptor.data(), r.descriptor.size() * sizeof(float));
  }

  std::vector<std::uint8_t> out;
  out.reserve(kStoreHeaderBytes + body.size());
  Writer h(out);
  h.bytes(kStoreMagic, sizeof kStoreMagic);
  h.put<std::uint32_t>(meta.version);
  h.put<std::uint32_t>(static_cast<std::uint32_t>(meta.kind));
  h.put<std::uint32_t>(meta.dimension);
  h.put<std::uint64_t>(store.records.size());
  h.put<std::uint32_t>(static_cast<std::uint32_t>(meta_text.size()));
  h.put<std::uint32_t>(crc32(body));
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

Store decode_store(std::span<const std::uint8_t> bytes) {
  Reader in(bytes);
  const auto magic = in.take(sizeof kStoreMagic);
  if (std::memcmp(magic.data(), kStoreMagic, sizeof kStoreMagic) != 0)
    throw Error(Errc::CorruptStore, "bad magic");
  Store store;
  auto& meta = store.metadata;
  meta.version = in.get<std::uint32_t>();
  if (meta.version != kStoreVersion)
    throw Error(Errc::VersionMismatch, "store format version " + std::to_string(meta.version) +
                                           ", this build reads version " + std::to_string(kStoreVersion));
  const auto kind = in.get<std::uint32_t>();
  if (kind != 1 && kind != 2) throw Error(Errc::CorruptStore, "unknown descriptor kind");
  meta.kind = static_cast<DescriptorKind>(kind);
  meta.dimension = in.get<std::uint32_t>();
  const auto count = in.get<std::uint64_t>();
  const auto meta_len = in.get<std::uint32_t>();
  const auto crc = in.get<std::uint32_t>();
  if (crc32(bytes.subspan(kStoreHeaderBytes)) != crc) throw Error(Errc::CorruptStore, "checksum mismatch");

  const std::size_t record_bytes = kRecordFixedBytes + 4ull * meta.dimension;
  if (meta_len > in.remaining() || (in.remaining() - meta_len) / record_bytes != count ||
      (in.remaining() - meta_len) % record_bytes != 0)
    throw Error(Errc::CorruptStore, "record section size does not match header");

  const auto meta_bytes = in.take(meta_len);
  try {
    meta.feature_config = nlohmann::json::parse(meta_bytes.begin(), meta_bytes.end());
  } catch (const nlohmann::json::exception&) {
    throw Error(Errc::CorruptStore, "metadata is not valid JSON");
  }

  store.records.resize(count);
  for (auto& r : store.records) {
    const auto sha = in.take(32);
    std::copy(sha.begin(), sha.end(), r.sha256.begin());
    const auto label = in.take(kLabelBytes);
    const auto* p = reinterpret_cast<const char*>(label.data());
    r.label.assign(p, strnlen(p, kLabelBytes));
    r.byte_length = in.get<std::uint64_t>();
    r.added_at = in.get<std::int64_t>();
    r.descriptor.resize(meta.dimension);
    const auto desc = in.take(4ull * meta.dimension);
    std::memcpy(r.descriptor.data(), desc.data(), desc.size());
  }
  return store;
}

void store_save(const Store& store, const std::filesystem::path& path) {
  const auto bytes = encode_store(store);
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::IOFailure, "cannot create " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error(Errc::IOFailure, "write failed for " + tmp.string());
    }
  }
  if (int fd = ::open(tmp.c_str(), O_RDONLY); fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(Errc::IOFailure, "cannot publish store at " + path.string());
  }
}

Store store_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IOFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_store(bytes);
}

}  // namespace malsig
