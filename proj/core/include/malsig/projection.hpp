#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "malsig/bytes_image.hpp"

namespace malsig {

// D x M Gaussian random projection with entries ~ N(0, 1/D).
//
// Row i is generated from its own mt19937_64 stream seeded with
// splitmix64(seed, i); normals come from Box-Muller on 53-bit uniforms. Both
// pieces are fully specified, so (seed, D, M) reproduces every entry
// bit-for-bit on any conforming platform. Rows are produced on demand; small
// matrices are cached in memory after first use.
class ProjectionMatrix {
 public:
  static constexpr std::string_view kGenerator = "mt19937_64-rowseed-splitmix64/boxmuller";
  static constexpr std::uint32_t kGeneratorVersion = 1;
  static constexpr std::size_t kMaxCachedEntries = std::size_t{1} << 24;

  // Throws Error(InvalidDim) unless 1 <= rows < cols.
  ProjectionMatrix(std::size_t rows, std::size_t cols, std::uint64_t seed);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::uint64_t seed() const noexcept { return seed_; }

  void fill_row(std::size_t row, std::span<double> out) const;
  std::vector<double> row(std::size_t row) const;

  // Materialized entries when the matrix fits kMaxCachedEntries, else empty.
  std::span<const double> cached() const noexcept { return cache_; }

 private:
  void generate_row(std::size_t row, std::span<double> out) const;

  std::size_t rows_;
  std::size_t cols_;
  std::uint64_t seed_;
  std::vector<double> cache_;
};

inline ProjectionMatrix make_projection(std::size_t d, std::size_t m, std::uint64_t seed) {
  return ProjectionMatrix(d, m, seed);
}

// w = R u in double precision. Throws Error(SizeMismatch) if length != M.
std::vector<double> project(const ByteSignal& signal, const ProjectionMatrix& r);
std::vector<double> project(std::span<const double> signal, const ProjectionMatrix& r);

// Projects many signals while generating each row once.
std::vector<std::vector<double>> project_all(std::span<const ByteSignal> signals,
                                             const ProjectionMatrix& r);

// The dimension sweep used by the experiment grid.
inline constexpr std::size_t kSweepDims[] = {48, 96, 192, 256, 384, 512};

}  // namespace malsig
