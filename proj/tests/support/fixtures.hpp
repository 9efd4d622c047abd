#pragma once

// Minimal synthetic PE and ELF images laid out from the format definitions.

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace malsig::testkit {

inline void put_le(std::vector<std::uint8_t>& b, std::size_t at, std::uint64_t v, int n) {
  if (b.size() < at + n) b.resize(at + n, 0);
  for (int i = 0; i < n; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

inline void put_be(std::vector<std::uint8_t>& b, std::size_t at, std::uint64_t v, int n) {
  if (b.size() < at + n) b.resize(at + n, 0);
  for (int i = 0; i < n; ++i) b[at + i] = static_cast<std::uint8_t>(v >> (8 * (n - 1 - i)));
}

struct FixtureSection {
  std::string name;
  std::uint32_t size;
  std::uint64_t flags;
  std::uint8_t fill;
};

constexpr std::uint32_t kPeCode = 0x00000020;
constexpr std::uint32_t kPeExecute = 0x20000000;
constexpr std::uint32_t kPeInitData = 0x00000040;
constexpr std::uint32_t kPeRead = 0x40000000;

struct PeFixture {
  std::vector<std::uint8_t> bytes;
  std::vector<std::uint32_t> offsets;
};

// DOS header, e_lfanew = 0x80, "PE\0\0", COFF header, 224-byte optional
// header, section table, then raw section data at 0x200-aligned offsets.
inline PeFixture make_pe(const std::vector<FixtureSection>& sections) {
  PeFixture f;
  auto& b = f.bytes;
  b.assign(0x400, 0);
  b[0] = 'M';
  b[1] = 'Z';
  put_le(b, 0x3C, 0x80, 4);
  put_le(b, 0x80, 0x00004550, 4);
  put_le(b, 0x84, 0x14C, 2);  // machine i386
  put_le(b, 0x86, sections.size(), 2);
  put_le(b, 0x94, 224, 2);  // SizeOfOptionalHeader
  put_le(b, 0x98, 0x10B, 2);  // PE32 magic
  const std::size_t table = 0x80 + 24 + 224;
  std::uint32_t data = 0x400;
  for (std::size_t i = 0; i < sections.size(); ++i) {
    const auto& s = sections[i];
    const std::size_t e = table + 40 * i;
    for (std::size_t c = 0; c < 8 && c < s.name.size(); ++c) b[e + c] = static_cast<std::uint8_t>(s.name[c]);
    put_le(b, e + 8, s.size, 4);    // VirtualSize
    put_le(b, e + 12, data, 4);     // VirtualAddress
    put_le(b, e + 16, s.size, 4);   // SizeOfRawData
    put_le(b, e + 20, data, 4);     // PointerToRawData
    put_le(b, e + 36, s.flags, 4);  // Characteristics
    f.offsets.push_back(data);
    b.resize(data + s.size, s.fill);
    std::fill(b.begin() + data, b.begin() + data + s.size, s.fill);
    data = (data + s.size + 0x1FF) & ~0x1FFu;
    b.resize(data, 0);
  }
  return f;
}

constexpr std::uint64_t kElfAlloc = 0x2;
constexpr std::uint64_t kElfExec = 0x4;
constexpr std::uint64_t kElfWrite = 0x1;

struct ElfFixture {
  std::vector<std::uint8_t> bytes;
  std::vector<std::uint64_t> offsets;
};

// ELF with a null section, the given PROGBITS sections and a trailing
// .shstrtab. 64-bit or 32-bit, little- or big-endian.
inline ElfFixture make_elf(const std::vector<FixtureSection>& sections, bool is64 = true, bool big = false) {
  ElfFixture f;
  auto& b = f.bytes;
  auto put = [&](std::size_t at, std::uint64_t v, int n) { big ? put_be(b, at, v, n) : put_le(b, at, v, n); };
  const std::size_t ehsize = is64 ? 64 : 52;
  const std::size_t shentsize = is64 ? 64 : 40;
  b.assign(ehsize, 0);
  b[0] = 0x7F;
  b[1] = 'E';
  b[2] = 'L';
  b[3] = 'F';
  b[4] = is64 ? 2 : 1;
  b[5] = big ? 2 : 1;
  b[6] = 1;

  std::string strtab(1, '\0');
  std::vector<std::uint32_t> name_off;
  for (const auto& s : sections) {
    name_off.push_back(static_cast<std::uint32_t>(strtab.size()));
    strtab += s.name;
    strtab.push_back('\0');
  }
  const auto shstr_name = static_cast<std::uint32_t>(strtab.size());
  strtab += ".shstrtab";
  strtab.push_back('\0');

  std::size_t at = ehsize;
  for (const auto& s : sections) {
    f.offsets.push_back(at);
    b.resize(at + s.size, s.fill);
    at += s.size;
  }
  const std::size_t str_at = at;
  b.insert(b.end(), strtab.begin(), strtab.end());
  at = (b.size() + 7) & ~std::size_t{7};
  b.resize(at, 0);
  const std::size_t shoff = at;
  const std::size_t shnum = sections.size() + 2;
  b.resize(shoff + shnum * shentsize, 0);

  put(16, 2, 2);  // ET_EXEC
  put(18, 62, 2);
  put(20, 1, 4);
  if (is64) {
    put(0x28, shoff, 8);
    put(0x34, ehsize, 2);
    put(0x3A, shentsize, 2);
    put(0x3C, shnum, 2);
    put(0x3E, shnum - 1, 2);
  } else {
    put(0x20, shoff, 4);
    put(0x28, ehsize, 2);
    put(0x2E, shentsize, 2);
    put(0x30, shnum, 2);
    put(0x32, shnum - 1, 2);
  }
  auto header = [&](std::size_t i, std::uint32_t name, std::uint32_t type, std::uint64_t flags, std::uint64_t off,
                    std::uint64_t size) {
    const std::size_t e = shoff + i * shentsize;
    put(e, name, 4);
    put(e + 4, type, 4);
    if (is64) {
      put(e + 8, flags, 8);
      put(e + 24, off, 8);
      put(e + 32, size, 8);
    } else {
      put(e + 8, flags, 4);
      put(e + 16, off, 4);
      put(e + 20, size, 4);
    }
  };
  for (std::size_t i = 0; i < sections.size(); ++i)
    header(i + 1, name_off[i], 1 /* PROGBITS */, sections[i].flags, f.offsets[i], sections[i].size);
  header(shnum - 1, shstr_name, 3 /* STRTAB */, 0, str_at, strtab.size());
  return f;
}

inline std::vector<std::uint8_t> random_bytes(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::vector<std::uint8_t> out(n);
  for (auto& b : out) b = static_cast<std::uint8_t>(g());
  return out;
}

inline void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                           static_cast<std::streamsize>(bytes.size()));
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("malsig-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace malsig::testkit
