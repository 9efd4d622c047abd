#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "malsig/ball_tree.hpp"
#include "malsig/knn_eval.hpp"

namespace malsig::synthetic {

struct VariantCorpusOptions {
  std::size_t families = 5;
  std::size_t per_family = 100;
  std::size_t length = 4096;
  // Fraction of bytes overwritten with random values in each variant.
  double mutation_rate = 0.02;
  std::uint64_t seed = 2015;
};

// Family template = concatenation of structured segments (code-like bytes,
// zero padding, ASCII strings, lookup tables); each variant is its family
// template with sparse random byte replacements. Labels are "family_00" ...
std::vector<RawSample> variant_corpus(const VariantCorpusOptions& options);

// One family template as produced inside variant_corpus.
std::vector<std::uint8_t> family_template(std::size_t length, std::uint64_t seed);

struct ClusteredOptions {
  std::size_t count = 10000;
  std::size_t dim = 320;
  std::size_t cluster_size = 50;  // clusters = count / cluster_size
  double center_range = 100.0;
  double spread = 1.0;
  std::uint64_t seed = 11;
};

// Gaussian blobs around uniform centres; record i gets label "c<cluster>".
std::vector<FingerprintRecord> clustered_records(const ClusteredOptions& options);

// Uniform [0,1) descriptors.
std::vector<FingerprintRecord> uniform_records(std::size_t count, std::size_t dim, std::uint64_t seed);

// Deterministic fake hash for synthetic records.
Sha256 synthetic_hash(std::uint64_t i);

}  // namespace malsig::synthetic
