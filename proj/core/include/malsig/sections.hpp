#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace malsig {

class FeatureExtractor;

enum class BinaryFormat { Pe, Elf };

struct SectionInfo {
  std::string name;
  std::uint64_t file_offset = 0;
  std::uint64_t file_size = 0;
  std::uint64_t flags = 0;  // PE Characteristics or ELF sh_flags
  bool executable = false;  // code / execute flag set

  bool operator==(const SectionInfo&) const = default;
};

struct SectionTable {
  BinaryFormat format = BinaryFormat::Pe;
  std::vector<SectionInfo> sections;
  std::vector<std::string> warnings;
};

// Walks the PE section table (DOS header -> NT headers -> section headers)
// or the ELF section header table. A malformed table yields the entries
// parsed before the first bad one plus a warning. Every reported section
// satisfies file_offset + file_size <= raw.size(). Throws
// Error(UnknownFormat) when neither MZ nor ELF magic is present.
SectionTable parse_sections(std::span<const std::uint8_t> raw);

enum class RankRule {
  // Executable sections by file size; remaining slots filled by the largest
  // other sections.
  ExecutableThenLargest,
  LargestBySize,
};

// Indices into sections, at most two, best first. Zero-sized sections are
// never chosen; ties go to the lower index.
std::vector<std::size_t> rank_sections(std::span<const SectionInfo> sections, RankRule rule);

struct SectionAwareDescriptor {
  std::vector<double> whole;
  std::optional<std::vector<double>> section1;
  std::optional<std::vector<double>> section2;
  std::vector<std::string> section_names;
  std::vector<std::string> warnings;
};

SectionAwareDescriptor section_aware_descriptor(std::span<const std::uint8_t> raw,
                                                const FeatureExtractor& extractor,
                                                RankRule rule = RankRule::ExecutableThenLargest);

}  // namespace malsig
