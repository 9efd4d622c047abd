#include "malsig/sections.hpp"

#include <algorithm>
#include <cstring>
#include <limits>

#include "malsig/error.hpp"
#include "malsig/features.hpp"

namespace malsig {

namespace {

// Bounds-checked little/big-endian field access. Every read goes through
// fits(), so no path can touch memory outside the input span.
class View {
 public:
  View(std::span<const std::uint8_t> data, bool big_endian = false) : data_(data), big_(big_endian) {}

  std::size_t size() const { return data_.size(); }
  bool fits(std::uint64_t offset, std::uint64_t len) const {
    return offset <= data_.size() && len <= data_.size() - offset;
  }

  template <typename T>
  std::optional<T> read(std::uint64_t offset) const {
    if (!fits(offset, sizeof(T))) return std::nullopt;
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      const std::size_t src = big_ ? i : sizeof(T) - 1 - i;
      v = static_cast<T>((v << 8) | data_[offset + src]);
    }
    return v;
  }

  std::string cstring(std::uint64_t offset, std::uint64_t limit) const {
    std::string s;
    for (std::uint64_t i = offset; i < limit && i < data_.size() && data_[i] != 0; ++i)
      s.push_back(static_cast<char>(data_[i]));
    return s;
  }

 private:
  std::span<const std::uint8_t> data_;
  bool big_;
};

constexpr std::uint32_t kPeScnCntCode = 0x00000020;
constexpr std::uint32_t kPeScnMemExecute = 0x20000000;
constexpr std::uint64_t kElfShfExecinstr = 0x4;
constexpr std::uint32_t kElfShtNobits = 8;

SectionTable parse_pe(const View& v) {
  SectionTable t{BinaryFormat::Pe, {}, {}};
  const auto lfanew = v.read<std::uint32_t>(0x3C);
  if (!lfanew) {
    t.warnings.push_back("DOS header truncated");
    return t;
  }
  const std::uint64_t pe = *lfanew;
  const auto sig = v.read<std::uint32_t>(pe);
  if (!sig || *sig != 0x00004550u) {
    t.warnings.push_back("missing PE signature");
    return t;
  }
  const auto n_sections = v.read<std::uint16_t>(pe + 6);
  const auto opt_size = v.read<std::uint16_t>(pe + 20);
  if (!n_sections || !opt_size) {
    t.warnings.push_back("COFF header truncated");
    return t;
  }
  const std::uint64_t table = pe + 24 + *opt_size;
  for (std::uint32_t i = 0; i < *n_sections; ++i) {
    const std::uint64_t entry = table + 40ull * i;
    if (!v.fits(entry, 40)) {
      t.warnings.push_back("section table truncated after " + std::to_string(i) + " entries");
      break;
    }
    const auto raw_size = *v.read<std::uint32_t>(entry + 16);
    const auto raw_ptr = *v.read<std::uint32_t>(entry + 20);
    const auto characteristics = *v.read<std::uint32_t>(entry + 36);
    if (!v.fits(raw_ptr, raw_size)) {
      t.warnings.push_back("section " + std::to_string(i) + " extends past end of file");
      break;
    }
    SectionInfo s;
    s.name = v.cstring(entry, entry + 8);
    s.file_offset = raw_ptr;
    s.file_size = raw_size;
    s.flags = characteristics;
    s.executable = (characteristics & (kPeScnCntCode | kPeScnMemExecute)) != 0;
    t.sections.push_back(std::move(s));
  }
  return t;
}

SectionTable parse_elf(std::span<const std::uint8_t> raw) {
  SectionTable t{BinaryFormat::Elf, {}, {}};
  if (raw.size() < 6) {
    t.warnings.push_back("ELF identification truncated");
    return t;
  }
  const std::uint8_t cls = raw[4], data = raw[5];
  if ((cls != 1 && cls != 2) || (data != 1 && data != 2)) {
    t.warnings.push_back("unsupported ELF class or data encoding");
    return t;
  }
  const bool is64 = cls == 2;
  const View v(raw, data == 2);

  std::optional<std::uint64_t> shoff;
  std::optional<std::uint16_t> shentsize, shnum, shstrndx;
  if (is64) {
    shoff = v.read<std::uint64_t>(0x28);
    shentsize = v.read<std::uint16_t>(0x3A);
    shnum = v.read<std::uint16_t>(0x3C);
    shstrndx = v.read<std::uint16_t>(0x3E);
  } else {
    if (auto o = v.read<std::uint32_t>(0x20)) shoff = *o;
    shentsize = v.read<std::uint16_t>(0x2E);
    shnum = v.read<std::uint16_t>(0x30);
    shstrndx = v.read<std::uint16_t>(0x32);
  }
  if (!shoff || !shentsize || !shnum || !shstrndx) {
    t.warnings.push_back("ELF header truncated");
    return t;
  }
  const std::uint64_t min_entry = is64 ? 64 : 40;
  if (*shoff == 0) return t;
  if (*shentsize < min_entry) {
    t.warnings.push_back("section header entries too small");
    return t;
  }

  struct Raw {
    std::uint32_t name, type;
    std::uint64_t flags, offset, size;
  };
  auto header = [&](std::uint64_t i) -> std::optional<Raw> {
    if (i > (std::numeric_limits<std::uint64_t>::max() - *shoff) / *shentsize) return std::nullopt;
    const std::uint64_t e = *shoff + i * *shentsize;
    if (!v.fits(e, min_entry)) return std::nullopt;
    if (is64)
      return Raw{*v.read<std::uint32_t>(e), *v.read<std::uint32_t>(e + 4), *v.read<std::uint64_t>(e + 8),
                 *v.read<std::uint64_t>(e + 24), *v.read<std::uint64_t>(e + 32)};
    return Raw{*v.read<std::uint32_t>(e), *v.read<std::uint32_t>(e + 4), *v.read<std::uint32_t>(e + 8),
               *v.read<std::uint32_t>(e + 16), *v.read<std::uint32_t>(e + 20)};
  };

  std::uint64_t count = *shnum;
  std::uint64_t strndx = *shstrndx;
  if (count == 0 || strndx == 0xFFFF) {
    // Extended numbering keeps the real values in section 0.
    if (auto first = header(0)) {
      if (count == 0) count = first->size;
      if (strndx == 0xFFFF) strndx = 0;  // sh_link holds it; names are cosmetic
    }
  }
  // Cannot have more headers than bytes left after shoff.
  count = std::min<std::uint64_t>(count, (v.size() - std::min<std::uint64_t>(v.size(), *shoff)) / *shentsize);

  std::uint64_t str_off = 0, str_size = 0;
  if (auto strtab = header(strndx); strtab && strndx < count && v.fits(strtab->offset, strtab->size)) {
    str_off = strtab->offset;
    str_size = strtab->size;
  } else if (strndx != 0) {
    t.warnings.push_back("section name table unreadable");
  }

  for (std::uint64_t i = 0; i < count; ++i) {
    const auto h = header(i);
    if (!h) {
      t.warnings.push_back("section header table truncated after " + std::to_string(i) + " entries");
      break;
    }
    if (h->type == 0) continue;  // SHT_NULL
    const std::uint64_t size = h->type == kElfShtNobits ? 0 : h->size;
    const std::uint64_t offset = h->type == kElfShtNobits ? std::min<std::uint64_t>(h->offset, v.size()) : h->offset;
    if (!v.fits(offset, size)) {
      t.warnings.push_back("section " + std::to_string(i) + " extends past end of file");
      break;
    }
    SectionInfo s;
    if (str_size > 0 && h->name < str_size) s.name = v.cstring(str_off + h->name, str_off + str_size);
    s.file_offset = offset;
    s.file_size = size;
    s.flags = h->flags;
    s.executable = (h->flags & kElfShfExecinstr) != 0;
    t.sections.push_back(std::move(s));
  }
  return t;
}

}  // namespace

SectionTable parse_sections(std::span<const std::uint8_t> raw) {
  if (raw.size() >= 2 && raw[0] == 'M' && raw[1] == 'Z') return parse_pe(View(raw));
  if (raw.size() >= 4 && raw[0] == 0x7F && raw[1] == 'E' && raw[2] == 'L' && raw[3] == 'F')
    return parse_elf(raw);
  throw Error(Errc::UnknownFormat, "neither MZ nor ELF magic");
}

std::vector<std::size_t> rank_sections(std::span<const SectionInfo> sections, RankRule rule) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < sections.size(); ++i)
    if (sections[i].file_size > 0) idx.push_back(i);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (rule == RankRule::ExecutableThenLargest && sections[a].executable != sections[b].executable)
      return sections[a].executable;
    return sections[a].file_size > sections[b].file_size;
  });
  if (idx.size() > 2) idx.resize(2);
  return idx;
}

SectionAwareDescriptor section_aware_descriptor(std::span<const std::uint8_t> raw,
                                                const FeatureExtractor& extractor, RankRule rule) {
  SectionAwareDescriptor out;
  out.whole = extractor.extract(raw).values;
  SectionTable table;
  try {
    table = parse_sections(raw);
  } catch (const Error& e) {
    if (e.code() != Errc::UnknownFormat) throw;
    out.warnings.push_back(e.what());
    return out;
  }
  out.warnings = table.warnings;
  const auto chosen = rank_sections(table.sections, rule);
  for (std::size_t slot = 0; slot < chosen.size(); ++slot) {
    const auto& s = table.sections[chosen[slot]];
    const auto bytes = raw.subspan(s.file_offset, s.file_size);
    auto values = extractor.extract(bytes).values;
    (slot == 0 ? out.section1 : out.section2) = std::move(values);
    out.section_names.push_back(s.name);
  }
  return out;
}

}  // namespace malsig
