#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <random>

#include "fixtures.hpp"
#include "malsig/error.hpp"
#include "malsig/features.hpp"
#include "malsig/gist.hpp"

using namespace malsig;

namespace {

RealImage random_real(std::uint32_t n, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  RealImage img{n, n, std::vector<double>(std::size_t{n} * n)};
  for (auto& p : img.pixels) p = static_cast<double>(g() % 256);
  return img;
}

RealImage grating(std::uint32_t n, double freq, double angle) {
  RealImage img{n, n, std::vector<double>(std::size_t{n} * n)};
  for (std::uint32_t r = 0; r < n; ++r)
    for (std::uint32_t c = 0; c < n; ++c)
      img.pixels[r * n + c] =
          128.0 + 100.0 * std::cos(2.0 * std::numbers::pi * freq * (c * std::cos(angle) + r * std::sin(angle)));
  return img;
}

double mean(const RealImage& m) {
  double s = 0;
  for (double v : m.pixels) s += v;
  return s / static_cast<double>(m.pixels.size());
}

}  // namespace

TEST(FilterBank, DefaultHasTwentyFilters) {
  const auto bank = build_gabor_bank(64, {8, 8, 4});
  EXPECT_EQ(bank.count(), 20u);
  EXPECT_EQ(GistConfig{}.subbands(), 20u);
  EXPECT_EQ(GistConfig{}.descriptor_length(), 320u);
}

TEST(FilterBank, MinimalBank) {
  const auto bank = build_gabor_bank(16, {1});
  ASSERT_EQ(bank.count(), 1u);
  EXPECT_EQ(bank.transfer(0)[0], 0.0);
}

TEST(FilterBank, TransferFunctionsNonNegativePeakOneDcZero) {
  for (const auto& orients : {std::vector<std::uint32_t>{8, 8, 4}, std::vector<std::uint32_t>{8, 8, 8, 8}}) {
    const auto bank = build_gabor_bank(64, orients);
    for (std::size_t k = 0; k < bank.count(); ++k) {
      const auto t = bank.transfer(k);
      double peak = 0;
      for (double v : t) {
        ASSERT_GE(v, 0.0);
        peak = std::max(peak, v);
      }
      EXPECT_GT(peak, 0.0);
      EXPECT_LE(peak, 1.0001);
      EXPECT_EQ(t[0], 0.0);
    }
  }
}

TEST(FilterBank, RadialCentresHalvePerScale) {
  const auto bank = build_gabor_bank(64, {8, 8, 4});
  EXPECT_DOUBLE_EQ(bank.info(0).center_frequency, 2 * bank.info(8).center_frequency);
  EXPECT_DOUBLE_EQ(bank.info(8).center_frequency, 2 * bank.info(16).center_frequency);
}

TEST(FilterBank, InvalidSizes) {
  EXPECT_THROW(build_gabor_bank(8, {4}), Error);
  EXPECT_THROW(build_gabor_bank(48, {4}), Error);
  EXPECT_THROW(build_gabor_bank(64, {}), Error);
  EXPECT_THROW(build_gabor_bank(64, {4, 0}), Error);
  try {
    build_gabor_bank(15, {1});
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::InvalidConfig);
  }
}

TEST(Subbands, ConstantImageIsAnnihilated) {
  const auto bank = build_gabor_bank(64, {8, 8, 4});
  const RealImage img{64, 64, std::vector<double>(64 * 64, 128.0)};
  for (const auto& m : subband_responses(img, bank))
    for (double v : m.pixels) ASSERT_LE(v, 1e-6);
}

TEST(Subbands, Homogeneity) {
  const auto bank = build_gabor_bank(64, {8, 8, 4});
  auto img = random_real(64, 1);
  auto scaled = img;
  for (auto& p : scaled.pixels) p *= 2.0;
  const auto a = subband_responses(img, bank), b = subband_responses(scaled, bank);
  for (std::size_t k = 0; k < a.size(); ++k)
    for (std::size_t i = 0; i < a[k].pixels.size(); ++i)
      ASSERT_NEAR(b[k].pixels[i], 2.0 * a[k].pixels[i], 1e-9 * std::max(1.0, 2.0 * a[k].pixels[i]));
}

TEST(Subbands, MatchesDirectDft) {
  // Oracle: O(n^4) DFT, multiply by the transfer function, inverse DFT.
  const std::uint32_t n = 16;
  const auto bank = build_gabor_bank(n, {3, 2});
  const auto img = random_real(n, 2);
  using C = std::complex<double>;
  const double tau = 2.0 * std::numbers::pi;
  std::vector<C> spectrum(n * n);
  for (std::uint32_t v = 0; v < n; ++v)
    for (std::uint32_t u = 0; u < n; ++u) {
      C acc = 0;
      for (std::uint32_t y = 0; y < n; ++y)
        for (std::uint32_t x = 0; x < n; ++x)
          acc += img.pixels[y * n + x] * std::polar(1.0, -tau * (double(u * x) + double(v * y)) / n);
      spectrum[v * n + u] = acc;
    }
  const auto maps = subband_responses(img, bank);
  ASSERT_EQ(maps.size(), bank.count());
  for (std::size_t k = 0; k < bank.count(); ++k) {
    const auto t = bank.transfer(k);
    for (std::uint32_t y = 0; y < n; ++y)
      for (std::uint32_t x = 0; x < n; ++x) {
        C acc = 0;
        for (std::uint32_t v = 0; v < n; ++v)
          for (std::uint32_t u = 0; u < n; ++u)
            acc += spectrum[v * n + u] * t[v * n + u] * std::polar(1.0, tau * (double(u * x) + double(v * y)) / n);
        ASSERT_NEAR(maps[k].pixels[y * n + x], std::abs(acc) / (n * n), 1e-9);
      }
  }
}

TEST(Subbands, OrientationSelectivity) {
  const auto bank = build_gabor_bank(64, {8, 8, 4});
  for (std::size_t k = 0; k < bank.count(); ++k) {
    const auto& info = bank.info(k);
    const auto maps = subband_responses(grating(64, info.center_frequency, info.angle), bank);
    const double own = mean(maps[k]);
    for (std::size_t j = 0; j < bank.count(); ++j)
      if (j != k && bank.info(j).scale == info.scale) EXPECT_GT(own, mean(maps[j])) << "filter " << k << " vs " << j;
  }
}

TEST(Subbands, SizeMismatch) {
  const auto bank = build_gabor_bank(64, {8, 8, 4});
  try {
    subband_responses(random_real(32, 3), bank);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SizeMismatch);
  }
}

TEST(Pool, LengthAndLayout) {
  std::vector<RealImage> maps(20, RealImage{64, 64, std::vector<double>(64 * 64, 0.0)});
  EXPECT_EQ(pool_grid(maps, 4).values.size(), 320u);

  maps[3].pixels.assign(64 * 64, 2.5);
  maps[5].pixels[17 * 64 + 40] = 7.0;  // block row 1, block col 2
  const auto d = pool_grid(maps, 4);
  for (std::size_t b = 0; b < 16; ++b) EXPECT_DOUBLE_EQ(d.values[3 * 16 + b], 2.5);
  for (std::size_t b = 0; b < 16; ++b) EXPECT_DOUBLE_EQ(d.values[5 * 16 + b], b == 1 * 4 + 2 ? 7.0 / 256 : 0.0);
}

TEST(Pool, RejectsIndivisibleOrRagged) {
  std::vector<RealImage> maps(2, RealImage{30, 30, std::vector<double>(900, 0.0)});
  EXPECT_THROW(pool_grid(maps, 4), Error);
  maps[1] = RealImage{32, 32, std::vector<double>(1024, 0.0)};
  EXPECT_THROW(pool_grid(maps, 2), Error);
}

TEST(Gist, DeterministicNonNegative) {
  const GistExtractor gist;
  const MalwareImage img = to_image(ByteSignal{testkit::random_bytes(20000, 4)}, WidthPolicy::standard());
  const auto a = gist(img), b = gist(img);
  ASSERT_EQ(a.values.size(), 320u);
  EXPECT_EQ(a.values, b.values);
  for (double v : a.values) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.0);
  }
}

TEST(Gist, ConstantBytesGiveZeroDescriptor) {
  const GistExtractor gist;
  for (std::uint8_t byte : {0x00, 0x41, 0xFF}) {
    const MalwareImage img = to_image(ByteSignal{std::vector<std::uint8_t>(32 * 100, byte)}, WidthPolicy::standard());
    for (double v : gist(img).values) ASSERT_LE(v, 1e-6);
  }
}

TEST(Gist, HomogeneityUnquantized) {
  const GistExtractor gist;
  const auto img = random_real(100, 5);
  auto scaled = img;
  for (auto& p : scaled.pixels) p *= 3.0;
  const auto a = gist.compute(img).values, b = gist.compute(scaled).values;
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(b[i], 3.0 * a[i], 1e-9 * std::max(1.0, b[i]));
}

TEST(Gist, TrailingPaddingCloserThanRandom) {
  const FeatureExtractor fx(FeatureConfig{});
  const auto base = testkit::random_bytes(6000, 6);
  auto padded = base;
  padded.resize(6000 + 10, 0);  // same height at width 32
  const auto other = testkit::random_bytes(6000, 7);
  const auto a = fx.extract(base).values, b = fx.extract(padded).values, c = fx.extract(other).values;
  auto dist = [](const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
    return std::sqrt(s);
  };
  EXPECT_LT(dist(a, b), dist(a, c));
}

TEST(GistLayout, DimensionRule) {
  auto l = gist_config_for_dim(320);
  ASSERT_TRUE(l);
  EXPECT_EQ(l->orientations_per_scale, (std::vector<std::uint32_t>{8, 8, 4}));
  for (std::size_t dim : {48, 96, 192, 256, 384, 512}) {
    const auto c = gist_config_for_dim(dim);
    ASSERT_TRUE(c) << dim;
    EXPECT_EQ(c->descriptor_length(), dim);
    for (auto o : c->orientations_per_scale) EXPECT_LE(o, 8u);
  }
  EXPECT_FALSE(gist_config_for_dim(100));
}
