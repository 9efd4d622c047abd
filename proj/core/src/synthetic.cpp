#include "malsig/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "rng.hpp"

namespace malsig::synthetic {

namespace {

double uniform01(std::mt19937_64& g) { return static_cast<double>(g() >> 11) * 0x1.0p-53; }

std::uint8_t byte(std::mt19937_64& g) { return static_cast<std::uint8_t>(g() & 0xFF); }

}  // namespace

std::vector<std::uint8_t> family_template(std::size_t length, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::vector<std::uint8_t> out;
  out.reserve(length);
  // A handful of opcode-like motifs this family reuses throughout its code.
  std::vector<std::vector<std::uint8_t>> motifs(6);
  for (auto& m : motifs) {
    m.resize(2 + detail::bounded(g, 7));
    for (auto& b : m) b = byte(g);
  }
  while (out.size() < length) {
    const std::size_t seg = 64 + detail::bounded(g, 448);
    switch (detail::bounded(g, 5)) {
      case 0:  // code: motifs interleaved with random operands
        for (std::size_t i = 0; i < seg; ++i) {
          const auto& m = motifs[detail::bounded(g, motifs.size())];
          out.insert(out.end(), m.begin(), m.end());
          out.push_back(byte(g));
        }
        break;
      case 1:  // zero padding
        out.insert(out.end(), seg, 0);
        break;
      case 2:  // printable strings
        for (std::size_t i = 0; i < seg; ++i)
          out.push_back(detail::bounded(g, 12) == 0 ? 0 : static_cast<std::uint8_t>(0x20 + detail::bounded(g, 95)));
        break;
      case 3: {  // table with a stride
        const std::uint8_t step = static_cast<std::uint8_t>(1 + detail::bounded(g, 16));
        std::uint8_t v = byte(g);
        for (std::size_t i = 0; i < seg; ++i, v = static_cast<std::uint8_t>(v + step)) out.push_back(v);
        break;
      }
      default:  // high-entropy blob
        for (std::size_t i = 0; i < seg; ++i) out.push_back(byte(g));
        break;
    }
  }
  out.resize(length);
  return out;
}

std::vector<RawSample> variant_corpus(const VariantCorpusOptions& options) {
  std::vector<RawSample> corpus;
  corpus.reserve(options.families * options.per_family);
  std::mt19937_64 g(options.seed);
  std::uint64_t id = 0;
  for (std::size_t f = 0; f < options.families; ++f) {
    const auto base = family_template(options.length, g());
    char label[32];
    std::snprintf(label, sizeof label, "family_%02zu", f);
    for (std::size_t v = 0; v < options.per_family; ++v) {
      ByteSignal s{base};
      for (auto& b : s.bytes)
        if (uniform01(g) < options.mutation_rate) b = byte(g);
      corpus.push_back({id++, std::move(s), label});
    }
  }
  return corpus;
}

Sha256 synthetic_hash(std::uint64_t i) {
  Sha256 h{};
  std::mt19937_64 g(i * 0x9E3779B97F4A7C15ULL + 1);
  for (std::size_t j = 0; j < h.size(); j += 8) {
    const auto v = g();
    for (std::size_t b = 0; b < 8; ++b) h[j + b] = static_cast<std::uint8_t>(v >> (8 * b));
  }
  return h;
}

std::vector<FingerprintRecord> clustered_records(const ClusteredOptions& options) {
  std::mt19937_64 g(options.seed);
  std::normal_distribution<double> noise(0.0, options.spread);
  const std::size_t clusters = std::max<std::size_t>(1, options.count / options.cluster_size);
  std::vector<std::vector<double>> centers(clusters, std::vector<double>(options.dim));
  for (auto& c : centers)
    for (auto& x : c) x = uniform01(g) * options.center_range;
  std::vector<FingerprintRecord> out(options.count);
  for (std::size_t i = 0; i < options.count; ++i) {
    const std::size_t c = i % clusters;
    auto& r = out[i];
    r.sha256 = synthetic_hash(i);
    r.label = "c" + std::to_string(c);
    r.descriptor.resize(options.dim);
    for (std::size_t d = 0; d < options.dim; ++d)
      r.descriptor[d] = static_cast<float>(centers[c][d] + noise(g));
    r.byte_length = 4096;
  }
  return out;
}

std::vector<FingerprintRecord> uniform_records(std::size_t count, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 g(seed);
  std::vector<FingerprintRecord> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i].sha256 = synthetic_hash(seed * 1000003 + i);
    out[i].descriptor.resize(dim);
    for (auto& x : out[i].descriptor) x = static_cast<float>(uniform01(g));
  }
  return out;
}

}  // namespace malsig::synthetic
