#include "malsig/corpus.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>
#include <atomic>

#include "malsig/error.hpp"
#include "malsig/hashing.hpp"
#include "malsig/png_export.hpp"
#include "parallel.hpp"

namespace fs = std::filesystem;

namespace malsig {

namespace {

std::int64_t now_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::int64_t mtime_seconds(const fs::path& p) {
  const auto t = fs::last_write_time(p);
  const auto sys = std::chrono::file_clock::to_sys(t);
  return std::chrono::duration_cast<std::chrono::seconds>(sys.time_since_epoch()).count();
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IOFailure, "cannot read " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::IOFailure, "read error on " + path.string());
  return bytes;
}

std::string truncate_utf8(const std::string& s, std::size_t max_bytes) {
  if (s.size() <= max_bytes) return s;
  std::size_t cut = max_bytes;
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  return s.substr(0, cut);
}

LabelCache LabelCache::parse_tsv(std::string_view text, const std::string& source, std::int64_t fetched_at) {
  LabelCache cache;
  std::istringstream in{std::string(text)};
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos)
      throw Error(Errc::MalformedLabelsFile, "line " + std::to_string(line_no) + ": expected sha256<TAB>label");
    const std::string hash = lower(line.substr(0, tab));
    try {
      sha256_from_hex(hash);
    } catch (const Error&) {
      throw Error(Errc::MalformedLabelsFile, "line " + std::to_string(line_no) + ": bad sha256 '" + hash + "'");
    }
    cache.put(hash, {line.substr(tab + 1), source, fetched_at});
  }
  return cache;
}

LabelCache LabelCache::from_tsv(const fs::path& path, const std::string& source) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IOFailure, "cannot read labels file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_tsv(ss.str(), source, mtime_seconds(path));
}

void LabelCache::put(const std::string& sha256_hex, LabelEntry entry) {
  entries_[lower(sha256_hex)] = std::move(entry);
}

const LabelEntry* LabelCache::find(const std::string& sha256_hex) const {
  const auto it = entries_.find(lower(sha256_hex));
  return it == entries_.end() ? nullptr : &it->second;
}

std::optional<LabelEntry> OfflineLabelSource::lookup(const std::string& sha256_hex) const {
  if (const auto* e = cache_.find(sha256_hex)) return *e;
  return std::nullopt;
}

nlohmann::json CorpusManifest::to_json() const {
  nlohmann::json entries_json = nlohmann::json::array();
  for (const auto& e : entries)
    entries_json.push_back(
        {{"path", e.path.generic_string()}, {"sha256", e.sha256}, {"label", e.label}, {"byte_length", e.byte_length}});
  return {{"root", root.string()}, {"created_at", created_at}, {"entries", entries_json}, {"warnings", warnings}};
}

CorpusManifest ingest(const fs::path& root, CorpusLayout layout, const LabelSource* labels) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) throw Error(Errc::IOFailure, root.string() + " is not a readable directory");
  CorpusManifest m;
  m.root = root;
  m.created_at = now_seconds();

  auto add = [&](const fs::path& file, std::string label) {
    const auto bytes = read_file(file);
    const auto rel = fs::relative(file, root);
    if (bytes.empty()) {
      m.warnings.push_back("skipping empty file " + rel.generic_string());
      return;
    }
    ManifestEntry e{rel, to_hex(sha256(bytes)), std::move(label), bytes.size()};
    if (layout == CorpusLayout::Flat) {
      std::optional<LabelEntry> found = labels ? labels->lookup(e.sha256) : std::nullopt;
      if (found) {
        e.label = found->label;
      } else {
        m.warnings.push_back("no label for " + rel.generic_string() + " (" + e.sha256 + ")");
      }
    }
    m.entries.push_back(std::move(e));
  };

  try {
    if (layout == CorpusLayout::FamilyDirs) {
      for (const auto& top : fs::directory_iterator(root)) {
        if (top.is_directory()) {
          const std::string family = top.path().filename().string();
          for (const auto& f : fs::recursive_directory_iterator(top.path()))
            if (f.is_regular_file()) add(f.path(), family);
        } else if (top.is_regular_file()) {
          m.warnings.push_back("ignoring file outside a family directory: " + top.path().filename().string());
        }
      }
    } else {
      for (const auto& f : fs::directory_iterator(root))
        if (f.is_regular_file()) add(f.path(), "");
    }
  } catch (const fs::filesystem_error& e) {
    throw Error(Errc::IOFailure, e.what());
  }
  std::sort(m.entries.begin(), m.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
  if (m.entries.empty()) m.warnings.push_back("corpus at " + root.string() + " is empty");
  return m;
}

FingerprintSummary fingerprint_corpus(const CorpusManifest& manifest, const FeatureExtractor& extractor,
                                      const fs::path& store_path, const FingerprintOptions& options) {
  if (manifest.entries.empty()) throw Error(Errc::EmptyInput, "manifest has no entries");
  if (options.export_png_dir) fs::create_directories(*options.export_png_dir);

  const std::size_t n = manifest.entries.size();
  std::vector<std::optional<FingerprintRecord>> slots(n);
  std::vector<std::string> errors(n), warnings(n);
  std::atomic<std::size_t> done{0};

  detail::parallel_for(n, [&](std::size_t i) {
    const auto& e = manifest.entries[i];
    const fs::path full = manifest.root / e.path;
    try {
      const auto bytes = read_file(full);
      const auto digest = sha256(bytes);
      if (to_hex(digest) != e.sha256) throw Error(Errc::IOFailure, "content changed since ingest");
      auto result = extractor.extract(bytes);
      if (result.truncated) warnings[i] = e.path.generic_string() + ": truncated to projection length";
      if (options.export_png_dir) {
        const auto img = to_image(to_signal(bytes), extractor.config().width_policy);
        write_png(img, *options.export_png_dir / (e.sha256 + ".png"));
      }
      FingerprintRecord r;
      r.sha256 = digest;
      r.label = truncate_utf8(e.label, kLabelBytes);
      if (r.label.size() != e.label.size())
        warnings[i] = e.path.generic_string() + ": label truncated to " + std::to_string(kLabelBytes) + " bytes";
      r.descriptor.assign(result.values.begin(), result.values.end());
      r.byte_length = bytes.size();
      r.added_at = mtime_seconds(full);
      slots[i] = std::move(r);
    } catch (const std::exception& ex) {
      errors[i] = e.path.generic_string() + ": " + ex.what();
    }
    const std::size_t d = ++done;
    if (options.progress) options.progress(d, n);
  });

  FingerprintSummary summary;
  Store store;
  store.metadata = StoreMetadata::for_features(extractor.config());
  std::set<Sha256> seen;
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i].empty()) summary.errors.push_back(errors[i]);
    if (!warnings[i].empty()) summary.warnings.push_back(warnings[i]);
    if (!slots[i]) continue;
    if (!seen.insert(slots[i]->sha256).second) {
      summary.warnings.push_back(manifest.entries[i].path.generic_string() + ": duplicate content, skipped");
      continue;
    }
    store.records.push_back(std::move(*slots[i]));
  }
  summary.records = store.records.size();
  store_save(store, store_path);
  return summary;
}

}  // namespace malsig
