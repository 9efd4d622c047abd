#include "malsig/projection.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "malsig/error.hpp"

namespace malsig {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double unit_open(std::mt19937_64& g) {
  // (0, 1): 53-bit mantissa, offset by half an ulp so log() never sees 0.
  return (static_cast<double>(g() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

ProjectionMatrix::ProjectionMatrix(std::size_t rows, std::size_t cols, std::uint64_t seed)
    : rows_(rows), cols_(cols), seed_(seed) {
  if (rows < 1 || rows >= cols)
    throw Error(Errc::InvalidDim, "projection needs 1 <= D < M (D=" + std::to_string(rows) +
                                      ", M=" + std::to_string(cols) + ")");
  if (rows <= kMaxCachedEntries / cols) {
    cache_.resize(rows * cols);
    for (std::size_t i = 0; i < rows; ++i) generate_row(i, std::span(cache_).subspan(i * cols, cols));
  }
}

void ProjectionMatrix::fill_row(std::size_t row, std::span<double> out) const {
  if (out.size() != cols_) throw Error(Errc::SizeMismatch, "row buffer has wrong length");
  if (!cache_.empty()) {
    std::copy_n(cache_.begin() + static_cast<std::ptrdiff_t>(row * cols_), cols_, out.begin());
    return;
  }
  generate_row(row, out);
}

void ProjectionMatrix::generate_row(std::size_t row, std::span<double> out) const {
  std::mt19937_64 gen(splitmix64(seed_ ^ splitmix64(row + 1)));
  const double scale = 1.0 / std::sqrt(static_cast<double>(rows_));
  std::size_t j = 0;
  while (j < cols_) {
    const double u1 = unit_open(gen);
    const double u2 = unit_open(gen);
    const double mag = std::sqrt(-2.0 * std::log(u1)) * scale;
    out[j++] = mag * std::cos(2.0 * std::numbers::pi * u2);
    if (j < cols_) out[j++] = mag * std::sin(2.0 * std::numbers::pi * u2);
  }
}

std::vector<double> ProjectionMatrix::row(std::size_t row) const {
  std::vector<double> out(cols_);
  fill_row(row, out);
  return out;
}

std::vector<double> project(std::span<const double> signal, const ProjectionMatrix& r) {
  if (signal.size() != r.cols())
    throw Error(Errc::SizeMismatch, "signal length " + std::to_string(signal.size()) +
                                        " != projection input dimension " + std::to_string(r.cols()));
  std::vector<double> w(r.rows());
  std::vector<double> buf(r.cols());
  for (std::size_t i = 0; i < r.rows(); ++i) {
    r.fill_row(i, buf);
    double acc = 0.0;
    for (std::size_t j = 0; j < buf.size(); ++j) acc += buf[j] * signal[j];
    w[i] = acc;
  }
  return w;
}

std::vector<double> project(const ByteSignal& signal, const ProjectionMatrix& r) {
  std::vector<double> u(signal.bytes.begin(), signal.bytes.end());
  return project(u, r);
}

std::vector<std::vector<double>> project_all(std::span<const ByteSignal> signals,
                                             const ProjectionMatrix& r) {
  for (const auto& s : signals)
    if (s.length() != r.cols())
      throw Error(Errc::SizeMismatch, "signal length " + std::to_string(s.length()) +
                                          " != projection input dimension " + std::to_string(r.cols()));
  std::vector<std::vector<double>> out(signals.size(), std::vector<double>(r.rows()));
  std::vector<double> buf(r.cols());
  for (std::size_t i = 0; i < r.rows(); ++i) {
    r.fill_row(i, buf);
    for (std::size_t s = 0; s < signals.size(); ++s) {
      const auto& bytes = signals[s].bytes;
      double acc = 0.0;
      for (std::size_t j = 0; j < buf.size(); ++j) acc += buf[j] * bytes[j];
      out[s][i] = acc;
    }
  }
  return out;
}

}  // namespace malsig
