#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "malsig/bytes_image.hpp"
#include "malsig/gist.hpp"
#include "malsig/projection.hpp"

namespace malsig {

enum class DescriptorKind : std::uint32_t { Gist = 1, RandomProjection = 2 };

std::string to_string(DescriptorKind kind);
DescriptorKind descriptor_kind_from_string(const std::string& name);

struct FeatureConfig {
  DescriptorKind kind = DescriptorKind::Gist;
  GistConfig gist;
  WidthPolicy width_policy = WidthPolicy::standard();
  // Random projection parameters: signals are padded/truncated to rp_length.
  std::uint64_t rp_seed = 20150601;
  std::size_t rp_dim = 512;
  std::size_t rp_length = std::size_t{1} << 16;

  std::size_t dimension() const;
  nlohmann::json to_json() const;
  static FeatureConfig from_json(const nlohmann::json& j);
};

// GIST layout reaching exactly `dim` values on a 4x4 grid: the default bank
// for 320, otherwise dim/16 sub-bands spread evenly over 3 scales, else 4
// scales, with at most 8 orientations per scale. nullopt when no such layout
// exists (callers then truncate the default 320-d descriptor to a prefix).
std::optional<GistConfig> gist_config_for_dim(std::size_t dim);

// Raw bytes -> descriptor, for either descriptor kind. Immutable after
// construction and safe to share across threads.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(FeatureConfig config);

  struct Result {
    std::vector<double> values;
    bool truncated = false;  // RP only: input longer than rp_length
  };

  Result extract(std::span<const std::uint8_t> raw) const;
  std::vector<double> gist_of_image(const MalwareImage& img) const;

  const FeatureConfig& config() const noexcept { return config_; }
  std::size_t dimension() const noexcept { return dimension_; }

 private:
  FeatureConfig config_;
  std::size_t dimension_;
  std::optional<GistExtractor> gist_;
  std::optional<ProjectionMatrix> projection_;
};

}  // namespace malsig
