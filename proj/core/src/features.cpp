#include "malsig/features.hpp"

#include "malsig/error.hpp"

namespace malsig {

std::string to_string(DescriptorKind kind) {
  return kind == DescriptorKind::Gist ? "gist" : "rp";
}

DescriptorKind descriptor_kind_from_string(const std::string& name) {
  if (name == "gist") return DescriptorKind::Gist;
  if (name == "rp") return DescriptorKind::RandomProjection;
  throw Error(Errc::InvalidConfig, "unknown descriptor kind '" + name + "' (expected gist or rp)");
}

std::size_t FeatureConfig::dimension() const {
  return kind == DescriptorKind::Gist ? gist.descriptor_length() : rp_dim;
}

nlohmann::json FeatureConfig::to_json() const {
  nlohmann::json j;
  j["kind"] = to_string(kind);
  j["dimension"] = dimension();
  if (kind == DescriptorKind::Gist) {
    j["gist"] = {{"image_size", gist.image_size},
                 {"orientations_per_scale", gist.orientations_per_scale},
                 {"grid", gist.grid},
                 {"max_frequency", gist.max_frequency},
                 {"sigma_on_f", gist.sigma_on_f},
                 {"dtheta_on_sigma", gist.dtheta_on_sigma}};
    nlohmann::json bands = nlohmann::json::array();
    for (const auto& b : width_policy.bands()) bands.push_back({b.max_bytes, b.width});
    j["width_policy"] = {{"bands", bands}, {"overflow_width", width_policy.overflow_width()}};
  } else {
    j["rp"] = {{"seed", rp_seed},
               {"dim", rp_dim},
               {"length", rp_length},
               {"generator", std::string(ProjectionMatrix::kGenerator)},
               {"generator_version", ProjectionMatrix::kGeneratorVersion}};
  }
  return j;
}

FeatureConfig FeatureConfig::from_json(const nlohmann::json& j) {
  try {
    FeatureConfig c;
    c.kind = descriptor_kind_from_string(j.at("kind").get<std::string>());
    if (c.kind == DescriptorKind::Gist) {
      if (j.contains("gist")) {
        const auto& g = j.at("gist");
        c.gist.image_size = g.value("image_size", c.gist.image_size);
        c.gist.orientations_per_scale = g.value("orientations_per_scale", c.gist.orientations_per_scale);
        c.gist.grid = g.value("grid", c.gist.grid);
        c.gist.max_frequency = g.value("max_frequency", c.gist.max_frequency);
        c.gist.sigma_on_f = g.value("sigma_on_f", c.gist.sigma_on_f);
        c.gist.dtheta_on_sigma = g.value("dtheta_on_sigma", c.gist.dtheta_on_sigma);
      }
      if (j.contains("width_policy")) {
        const auto& wp = j.at("width_policy");
        std::vector<WidthBand> bands;
        for (const auto& b : wp.at("bands"))
          bands.push_back({b.at(0).get<std::uint64_t>(), b.at(1).get<std::uint32_t>()});
        c.width_policy = WidthPolicy(std::move(bands), wp.at("overflow_width").get<std::uint32_t>());
      }
    } else {
      const auto& rp = j.at("rp");
      c.rp_seed = rp.value("seed", c.rp_seed);
      c.rp_dim = rp.value("dim", c.rp_dim);
      c.rp_length = rp.value("length", c.rp_length);
      if (rp.contains("generator") && rp.at("generator").get<std::string>() != ProjectionMatrix::kGenerator)
        throw Error(Errc::VersionMismatch, "projection generator '" +
                                               rp.at("generator").get<std::string>() + "' not supported");
      if (rp.value("generator_version", ProjectionMatrix::kGeneratorVersion) != ProjectionMatrix::kGeneratorVersion)
        throw Error(Errc::VersionMismatch, "projection generator version not supported");
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::InvalidConfig, std::string("feature config: ") + e.what());
  }
}

std::optional<GistConfig> gist_config_for_dim(std::size_t dim) {
  constexpr std::size_t cells = 16;
  if (dim == 0 || dim % cells != 0) return std::nullopt;
  const std::size_t bands = dim / cells;
  if (bands == GistConfig{}.subbands()) return GistConfig{};
  for (std::size_t scales : {3u, 4u}) {
    if (bands % scales == 0 && bands / scales <= 8) {
      GistConfig c;
      c.orientations_per_scale.assign(scales, static_cast<std::uint32_t>(bands / scales));
      return c;
    }
  }
  return std::nullopt;
}

FeatureExtractor::FeatureExtractor(FeatureConfig config) : config_(std::move(config)) {
  if (config_.kind == DescriptorKind::Gist) {
    gist_.emplace(config_.gist);
  } else {
    projection_.emplace(config_.rp_dim, config_.rp_length, config_.rp_seed);
  }
  dimension_ = config_.dimension();
}

std::vector<double> FeatureExtractor::gist_of_image(const MalwareImage& img) const {
  if (!gist_) throw Error(Errc::InvalidConfig, "extractor is not configured for GIST");
  return (*gist_)(img).values;
}

FeatureExtractor::Result FeatureExtractor::extract(std::span<const std::uint8_t> raw) const {
  const ByteSignal signal = to_signal(raw);
  Result out;
  if (gist_) {
    out.values = gist_of_image(to_image(signal, config_.width_policy));
  } else {
    auto padded = pad_to_length(signal, projection_->cols());
    out.truncated = padded.truncated;
    out.values = project(padded.signal, *projection_);
  }
  return out;
}

}  // namespace malsig
