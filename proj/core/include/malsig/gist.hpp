#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "malsig/bytes_image.hpp"

namespace malsig {

struct GistConfig {
  std::uint32_t image_size = 64;
  // One entry per scale; total count is the number of sub-bands.
  std::vector<std::uint32_t> orientations_per_scale{8, 8, 4};
  std::uint32_t grid = 4;
  // Radial centre of the finest scale in cycles/pixel; halves per scale.
  double max_frequency = 0.25;
  // Log-Gabor radial bandwidth expressed as sigma/f0.
  double sigma_on_f = 0.55;
  // Angular spacing divided by the angular sigma.
  double dtheta_on_sigma = 1.2;

  std::uint32_t subbands() const noexcept;
  std::size_t descriptor_length() const noexcept;
  bool operator==(const GistConfig&) const = default;
};

struct FilterInfo {
  std::uint32_t scale;
  std::uint32_t orientation;
  double center_frequency;  // cycles/pixel
  double angle;             // radians in [0, pi)
};

// Polar-separable log-Gabor transfer functions on an image_size x image_size
// frequency grid (FFT order, DC at index 0). Immutable once built; the FFT
// plans it carries are safe to use concurrently.
class FilterBank {
 public:
  explicit FilterBank(const GistConfig& config);

  std::uint32_t image_size() const noexcept { return size_; }
  std::size_t count() const noexcept { return info_.size(); }
  const FilterInfo& info(std::size_t k) const { return info_[k]; }
  std::span<const double> transfer(std::size_t k) const;
  const GistConfig& config() const noexcept { return config_; }

  struct Plans;
  const Plans& plans() const noexcept { return *plans_; }

 private:
  GistConfig config_;
  std::uint32_t size_;
  std::vector<FilterInfo> info_;
  std::vector<double> transfer_;  // count * size * size
  std::shared_ptr<const Plans> plans_;
};

FilterBank build_gabor_bank(std::uint32_t image_size, std::vector<std::uint32_t> orientations_per_scale);

struct GistDescriptor {
  std::vector<double> values;
  std::uint32_t grid = 0;
  std::uint32_t n_subbands = 0;
};

// Magnitude of the complex response of each filter, one map per sub-band.
// Throws Error(SizeMismatch) unless img is bank.image_size() square.
std::vector<RealImage> subband_responses(const RealImage& img, const FilterBank& bank);

// Block means over a grid x grid partition of every map; sub-band-major,
// then row-major blocks.
GistDescriptor pool_grid(std::span<const RealImage> maps, std::uint32_t grid);

// resize to image_size (quantized) -> filter -> pool.
class GistExtractor {
 public:
  explicit GistExtractor(GistConfig config = {});

  GistDescriptor operator()(const MalwareImage& img) const;
  // Unquantized: resizes in floating point.
  GistDescriptor compute(const RealImage& img) const;

  const FilterBank& bank() const noexcept { return bank_; }
  const GistConfig& config() const noexcept { return bank_.config(); }

 private:
  FilterBank bank_;
};

}  // namespace malsig
