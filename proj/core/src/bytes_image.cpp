#include "malsig/bytes_image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "malsig/error.hpp"

namespace malsig {

RealImage RealImage::from(const MalwareImage& img) {
  RealImage out{img.width, img.height, {}};
  out.pixels.assign(img.pixels.begin(), img.pixels.end());
  return out;
}

WidthPolicy::WidthPolicy(std::vector<WidthBand> bands, std::uint32_t overflow_width)
    : bands_(std::move(bands)), overflow_width_(overflow_width) {
  if (overflow_width_ == 0) throw Error(Errc::InvalidConfig, "overflow width must be positive");
  for (std::size_t i = 0; i < bands_.size(); ++i) {
    if (bands_[i].width == 0) throw Error(Errc::InvalidConfig, "band width must be positive");
    if (i > 0 && bands_[i].max_bytes <= bands_[i - 1].max_bytes)
      throw Error(Errc::InvalidConfig, "width bands must have strictly increasing size thresholds");
  }
}

WidthPolicy WidthPolicy::standard() {
  constexpr std::uint64_t kb = 1024;
  return WidthPolicy({{10 * kb, 32},
                      {30 * kb, 64},
                      {60 * kb, 128},
                      {100 * kb, 256},
                      {200 * kb, 384},
                      {500 * kb, 512},
                      {1000 * kb, 768}},
                     1024);
}

std::uint32_t WidthPolicy::width_for(std::uint64_t file_size) const noexcept {
  for (const auto& band : bands_)
    if (file_size <= band.max_bytes) return band.width;
  return overflow_width_;
}

ByteSignal to_signal(std::span<const std::uint8_t> raw) {
  if (raw.empty()) throw Error(Errc::EmptyInput, "binary has zero bytes");
  return ByteSignal{std::vector<std::uint8_t>(raw.begin(), raw.end())};
}

MalwareImage to_image_with_width(const ByteSignal& signal, std::uint32_t width) {
  if (signal.bytes.empty()) throw Error(Errc::EmptyInput, "cannot image an empty signal");
  if (width == 0) throw Error(Errc::InvalidConfig, "image width must be positive");
  const std::size_t n = signal.length();
  const std::size_t height = (n + width - 1) / width;
  MalwareImage img;
  img.width = width;
  img.height = static_cast<std::uint32_t>(height);
  img.pixels.assign(height * width, 0);
  std::copy(signal.bytes.begin(), signal.bytes.end(), img.pixels.begin());
  return img;
}

MalwareImage to_image(const ByteSignal& signal, const WidthPolicy& policy) {
  return to_image_with_width(signal, policy.width_for(signal.length()));
}

namespace {

struct Tap {
  std::uint32_t lo;
  std::uint32_t hi;
  double frac;
};

std::vector<Tap> taps(std::uint32_t in, std::uint32_t out) {
  std::vector<Tap> t(out);
  for (std::uint32_t i = 0; i < out; ++i) {
    double pos = out > 1 ? static_cast<double>(i) * (in - 1) / (out - 1) : 0.0;
    auto lo = static_cast<std::uint32_t>(std::floor(pos));
    if (lo > in - 1) lo = in - 1;
    std::uint32_t hi = std::min(lo + 1, in - 1);
    t[i] = {lo, hi, pos - lo};
  }
  return t;
}

template <typename Src, typename Store>
void resample(const Src& src, std::uint32_t in_w, std::uint32_t in_h, std::uint32_t out_w,
              std::uint32_t out_h, Store&& store) {
  const auto tx = taps(in_w, out_w);
  const auto ty = taps(in_h, out_h);
  for (std::uint32_t r = 0; r < out_h; ++r) {
    const auto& y = ty[r];
    for (std::uint32_t c = 0; c < out_w; ++c) {
      const auto& x = tx[c];
      const double p00 = src(y.lo, x.lo), p01 = src(y.lo, x.hi);
      const double p10 = src(y.hi, x.lo), p11 = src(y.hi, x.hi);
      const double top = p00 + (p01 - p00) * x.frac;
      const double bottom = p10 + (p11 - p10) * x.frac;
      store(r, c, top + (bottom - top) * y.frac);
    }
  }
}

void check_resize_args(std::uint32_t w, std::uint32_t h, std::size_t pixels, std::uint32_t out_w,
                       std::uint32_t out_h) {
  if (out_w < 1 || out_h < 1) throw Error(Errc::InvalidConfig, "resize target must be at least 1x1");
  if (w == 0 || h == 0 || pixels != static_cast<std::size_t>(w) * h)
    throw Error(Errc::EmptyInput, "resize source image is empty or inconsistent");
}

}  // namespace

MalwareImage resize_bilinear(const MalwareImage& img, std::uint32_t out_w, std::uint32_t out_h) {
  check_resize_args(img.width, img.height, img.pixels.size(), out_w, out_h);
  MalwareImage out{out_w, out_h, std::vector<std::uint8_t>(static_cast<std::size_t>(out_w) * out_h)};
  resample([&](std::uint32_t r, std::uint32_t c) { return double(img.at(r, c)); }, img.width,
           img.height, out_w, out_h, [&](std::uint32_t r, std::uint32_t c, double v) {
             const double q = std::clamp(std::floor(v + 0.5), 0.0, 255.0);
             out.pixels[static_cast<std::size_t>(r) * out_w + c] = static_cast<std::uint8_t>(q);
           });
  return out;
}

RealImage resize_bilinear(const RealImage& img, std::uint32_t out_w, std::uint32_t out_h) {
  check_resize_args(img.width, img.height, img.pixels.size(), out_w, out_h);
  RealImage out{out_w, out_h, std::vector<double>(static_cast<std::size_t>(out_w) * out_h)};
  resample([&](std::uint32_t r, std::uint32_t c) { return img.at(r, c); }, img.width, img.height,
           out_w, out_h, [&](std::uint32_t r, std::uint32_t c, double v) {
             out.pixels[static_cast<std::size_t>(r) * out_w + c] = v;
           });
  return out;
}

PaddedSignal pad_to_length(const ByteSignal& signal, std::size_t m) {
  if (m < 1) throw Error(Errc::InvalidConfig, "target length must be at least 1");
  PaddedSignal out;
  out.truncated = signal.length() > m;
  out.signal.bytes = signal.bytes;
  out.signal.bytes.resize(m, 0);
  return out;
}

}  // namespace malsig
