#include "malsig/gist.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <numbers>
#include <numeric>

#include "malsig/error.hpp"

namespace malsig {

std::uint32_t GistConfig::subbands() const noexcept {
  return std::accumulate(orientations_per_scale.begin(), orientations_per_scale.end(), 0u);
}

std::size_t GistConfig::descriptor_length() const noexcept {
  return static_cast<std::size_t>(grid) * grid * subbands();
}

namespace {

// FFTW's planner is not thread-safe; execution with the new-array interface is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n)
      : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
    if (!data) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;

  fftw_complex* data;
};

double frequency_of(std::uint32_t index, std::uint32_t n) {
  const auto i = static_cast<std::int64_t>(index);
  const auto half = static_cast<std::int64_t>(n / 2);
  return static_cast<double>(i < half ? i : i - static_cast<std::int64_t>(n)) / n;
}

bool is_power_of_two(std::uint32_t v) { return v != 0 && (v & (v - 1)) == 0; }

}  // namespace

struct FilterBank::Plans {
  explicit Plans(std::uint32_t n) {
    const std::size_t total = static_cast<std::size_t>(n) * n;
    FftwBuffer in(total), out(total);
    std::lock_guard lock(planner_mutex());
    forward = fftw_plan_dft_2d(int(n), int(n), in.data, out.data, FFTW_FORWARD, FFTW_ESTIMATE);
    backward = fftw_plan_dft_2d(int(n), int(n), in.data, out.data, FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!forward || !backward) throw Error(Errc::InvalidConfig, "FFT planning failed");
  }
  ~Plans() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(backward);
  }
  Plans(const Plans&) = delete;
  Plans& operator=(const Plans&) = delete;

  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

FilterBank::FilterBank(const GistConfig& config) : config_(config), size_(config.image_size) {
  if (!is_power_of_two(size_) || size_ < 16)
    throw Error(Errc::InvalidConfig, "filter bank size must be a power of two >= 16");
  if (config_.orientations_per_scale.empty())
    throw Error(Errc::InvalidConfig, "filter bank needs at least one scale");
  for (auto n : config_.orientations_per_scale)
    if (n < 1) throw Error(Errc::InvalidConfig, "each scale needs at least one orientation");
  if (config_.grid < 1 || size_ % config_.grid != 0)
    throw Error(Errc::InvalidConfig, "pooling grid must divide the image size");
  if (!(config_.max_frequency > 0.0 && config_.max_frequency <= 0.5) || !(config_.sigma_on_f > 0.0) ||
      !(config_.sigma_on_f < 1.0) || !(config_.dtheta_on_sigma > 0.0))
    throw Error(Errc::InvalidConfig, "filter shape parameters out of range");

  const std::size_t plane = static_cast<std::size_t>(size_) * size_;
  const double log_sigma = std::log(config_.sigma_on_f);
  const double two_log_sigma_sq = 2.0 * log_sigma * log_sigma;

  std::vector<double> radius(plane), theta(plane);
  for (std::uint32_t r = 0; r < size_; ++r) {
    const double fy = frequency_of(r, size_);
    for (std::uint32_t c = 0; c < size_; ++c) {
      const double fx = frequency_of(c, size_);
      radius[r * size_ + c] = std::hypot(fx, fy);
      theta[r * size_ + c] = std::atan2(fy, fx);
    }
  }

  for (std::uint32_t s = 0; s < config_.orientations_per_scale.size(); ++s) {
    const std::uint32_t n_orient = config_.orientations_per_scale[s];
    const double f0 = config_.max_frequency / std::ldexp(1.0, static_cast<int>(s));
    const double sigma_theta = std::numbers::pi / n_orient / config_.dtheta_on_sigma;
    for (std::uint32_t o = 0; o < n_orient; ++o) {
      const double angle = std::numbers::pi * o / n_orient;
      info_.push_back({s, o, f0, angle});
      const std::size_t base = transfer_.size();
      transfer_.resize(base + plane);
      double peak = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        if (radius[i] == 0.0) continue;  // DC stays zero
        const double lr = std::log(radius[i] / f0);
        double d = theta[i] - angle;
        d = std::remainder(d, 2.0 * std::numbers::pi);
        const double g = std::exp(-lr * lr / two_log_sigma_sq) *
                         std::exp(-d * d / (2.0 * sigma_theta * sigma_theta));
        transfer_[base + i] = g;
        peak = std::max(peak, g);
      }
      if (!(peak > 0.0)) throw Error(Errc::InvalidConfig, "filter has no support on this grid");
      for (std::size_t i = 0; i < plane; ++i) transfer_[base + i] /= peak;
      transfer_[base] = 0.0;
    }
  }
  plans_ = std::make_shared<const Plans>(size_);
}

std::span<const double> FilterBank::transfer(std::size_t k) const {
  const std::size_t plane = static_cast<std::size_t>(size_) * size_;
  return {transfer_.data() + k * plane, plane};
}

FilterBank build_gabor_bank(std::uint32_t image_size, std::vector<std::uint32_t> orientations_per_scale) {
  GistConfig config;
  config.image_size = image_size;
  config.orientations_per_scale = std::move(orientations_per_scale);
  return FilterBank(config);
}

std::vector<RealImage> subband_responses(const RealImage& img, const FilterBank& bank) {
  const std::uint32_t n = bank.image_size();
  if (img.width != n || img.height != n || img.pixels.size() != std::size_t(n) * n)
    throw Error(Errc::SizeMismatch, "image is " + std::to_string(img.width) + "x" +
                                        std::to_string(img.height) + ", bank expects " +
                                        std::to_string(n) + "x" + std::to_string(n));
  const std::size_t plane = static_cast<std::size_t>(n) * n;
  FftwBuffer spatial(plane), spectrum(plane), filtered(plane), response(plane);
  for (std::size_t i = 0; i < plane; ++i) {
    spatial.data[i][0] = img.pixels[i];
    spatial.data[i][1] = 0.0;
  }
  const auto& plans = bank.plans();
  fftw_execute_dft(plans.forward, spatial.data, spectrum.data);

  const double norm = 1.0 / static_cast<double>(plane);
  std::vector<RealImage> maps;
  maps.reserve(bank.count());
  for (std::size_t k = 0; k < bank.count(); ++k) {
    const auto h = bank.transfer(k);
    for (std::size_t i = 0; i < plane; ++i) {
      filtered.data[i][0] = spectrum.data[i][0] * h[i];
      filtered.data[i][1] = spectrum.data[i][1] * h[i];
    }
    fftw_execute_dft(plans.backward, filtered.data, response.data);
    RealImage map{n, n, std::vector<double>(plane)};
    for (std::size_t i = 0; i < plane; ++i)
      map.pixels[i] = std::hypot(response.data[i][0], response.data[i][1]) * norm;
    maps.push_back(std::move(map));
  }
  return maps;
}

GistDescriptor pool_grid(std::span<const RealImage> maps, std::uint32_t grid) {
  if (maps.empty()) throw Error(Errc::SizeMismatch, "no sub-band maps to pool");
  if (grid < 1) throw Error(Errc::InvalidConfig, "pooling grid must be >= 1");
  const std::uint32_t n = maps.front().width;
  for (const auto& m : maps)
    if (m.width != n || m.height != n || m.pixels.size() != std::size_t(n) * n)
      throw Error(Errc::SizeMismatch, "sub-band maps must be square and equal-sized");
  if (n % grid != 0) throw Error(Errc::SizeMismatch, "map size not divisible by pooling grid");

  const std::uint32_t block = n / grid;
  const double inv_area = 1.0 / (static_cast<double>(block) * block);
  GistDescriptor out;
  out.grid = grid;
  out.n_subbands = static_cast<std::uint32_t>(maps.size());
  out.values.reserve(maps.size() * grid * grid);
  for (const auto& m : maps) {
    for (std::uint32_t by = 0; by < grid; ++by) {
      for (std::uint32_t bx = 0; bx < grid; ++bx) {
        double sum = 0.0;
        for (std::uint32_t r = by * block; r < (by + 1) * block; ++r)
          for (std::uint32_t c = bx * block; c < (bx + 1) * block; ++c) sum += m.at(r, c);
        out.values.push_back(sum * inv_area);
      }
    }
  }
  return out;
}

GistExtractor::GistExtractor(GistConfig config) : bank_(config) {}

GistDescriptor GistExtractor::operator()(const MalwareImage& img) const {
  const auto n = bank_.image_size();
  return compute(RealImage::from(resize_bilinear(img, n, n)));
}

GistDescriptor GistExtractor::compute(const RealImage& img) const {
  const auto n = bank_.image_size();
  const auto maps = (img.width == n && img.height == n)
                        ? subband_responses(img, bank_)
                        : subband_responses(resize_bilinear(img, n, n), bank_);
  return pool_grid(maps, bank_.config().grid);
}

}  // namespace malsig
