#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace malsig {

// Raw bytes of a binary viewed as a 1-D signal with samples in [0,255].
struct ByteSignal {
  std::vector<std::uint8_t> bytes;

  std::size_t length() const noexcept { return bytes.size(); }
  bool operator==(const ByteSignal&) const = default;
};

// 8-bit grayscale image, row-major.
struct MalwareImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::uint32_t row, std::uint32_t col) const {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }
  bool operator==(const MalwareImage&) const = default;
};

// Real-valued image used by the descriptor path when quantization must be
// avoided (e.g. checking homogeneity of the filter pipeline).
struct RealImage {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<double> pixels;

  double at(std::uint32_t row, std::uint32_t col) const {
    return pixels[static_cast<std::size_t>(row) * width + col];
  }
  static RealImage from(const MalwareImage& img);
};

struct WidthBand {
  std::uint64_t max_bytes;  // inclusive upper bound on file size
  std::uint32_t width;
};

// Maps a file size to an image width. Sizes above the last band use
// overflow_width.
class WidthPolicy {
 public:
  WidthPolicy(std::vector<WidthBand> bands, std::uint32_t overflow_width);

  // <=10K:32, <=30K:64, <=60K:128, <=100K:256, <=200K:384, <=500K:512,
  // <=1000K:768, above:1024 (K = 1024 bytes).
  static WidthPolicy standard();

  std::uint32_t width_for(std::uint64_t file_size) const noexcept;
  const std::vector<WidthBand>& bands() const noexcept { return bands_; }
  std::uint32_t overflow_width() const noexcept { return overflow_width_; }

 private:
  std::vector<WidthBand> bands_;
  std::uint32_t overflow_width_;
};

struct PaddedSignal {
  ByteSignal signal;
  bool truncated = false;
};

// Throws Error(EmptyInput) for an empty buffer.
ByteSignal to_signal(std::span<const std::uint8_t> raw);

MalwareImage to_image(const ByteSignal& signal, const WidthPolicy& policy);

// Same layout as to_image with an explicit width.
MalwareImage to_image_with_width(const ByteSignal& signal, std::uint32_t width);

// Bilinear interpolation with corner-aligned sampling: output pixel (0,0)
// samples input (0,0), output (h-1,w-1) samples input (H-1,W-1). Values are
// quantized with round-half-up and clamped to [0,255].
MalwareImage resize_bilinear(const MalwareImage& img, std::uint32_t out_w, std::uint32_t out_h);

// Unquantized variant of the same interpolation.
RealImage resize_bilinear(const RealImage& img, std::uint32_t out_w, std::uint32_t out_h);

// Zero-pads up to length m or truncates to m (flagged).
PaddedSignal pad_to_length(const ByteSignal& signal, std::size_t m);

}  // namespace malsig
