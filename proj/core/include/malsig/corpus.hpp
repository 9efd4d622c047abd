#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "malsig/features.hpp"
#include "malsig/fingerprint_store.hpp"

namespace malsig {

struct LabelEntry {
  std::string label;
  std::string source;
  std::int64_t fetched_at = 0;
};

// sha256 (lowercase hex) -> externally supplied AV-style label.
class LabelCache {
 public:
  // Reads "sha256<TAB>label" lines. Throws MalformedLabelsFile / IOFailure.
  static LabelCache from_tsv(const std::filesystem::path& path, const std::string& source = "offline-tsv");
  static LabelCache parse_tsv(std::string_view text, const std::string& source, std::int64_t fetched_at);

  void put(const std::string& sha256_hex, LabelEntry entry);
  const LabelEntry* find(const std::string& sha256_hex) const;
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::map<std::string, LabelEntry> entries_;
};

// Where labels come from. The only implementation reads an offline cache;
// an online AV-label client would implement the same interface.
class LabelSource {
 public:
  virtual ~LabelSource() = default;
  virtual std::optional<LabelEntry> lookup(const std::string& sha256_hex) const = 0;
};

class OfflineLabelSource final : public LabelSource {
 public:
  explicit OfflineLabelSource(LabelCache cache) : cache_(std::move(cache)) {}
  std::optional<LabelEntry> lookup(const std::string& sha256_hex) const override;

 private:
  LabelCache cache_;
};

enum class CorpusLayout { FamilyDirs, Flat };

struct ManifestEntry {
  std::filesystem::path path;  // relative to root
  std::string sha256;
  std::string label;
  std::uint64_t byte_length = 0;
};

struct CorpusManifest {
  std::filesystem::path root;
  std::vector<ManifestEntry> entries;  // sorted by path
  std::int64_t created_at = 0;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

// family-dirs: every file below <root>/<family>/ is labelled <family>.
// flat: files directly in root, labelled through `labels` (unknown hashes get
// an empty label and a warning). Empty files are skipped with a warning.
CorpusManifest ingest(const std::filesystem::path& root, CorpusLayout layout,
                      const LabelSource* labels = nullptr);

struct FingerprintSummary {
  std::size_t records = 0;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
};

struct FingerprintOptions {
  // When set, an 8-bit PNG of each sample's byte image is written here.
  std::optional<std::filesystem::path> export_png_dir;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

// One record per readable entry (added_at = file mtime so unchanged corpora
// give byte-identical stores). Unreadable files are listed in the summary;
// the store is written atomically.
FingerprintSummary fingerprint_corpus(const CorpusManifest& manifest, const FeatureExtractor& extractor,
                                      const std::filesystem::path& store_path,
                                      const FingerprintOptions& options = {});

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

// Truncates to at most max_bytes without splitting a UTF-8 sequence.
std::string truncate_utf8(const std::string& s, std::size_t max_bytes);

}  // namespace malsig
