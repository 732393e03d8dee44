#include "derain/toolbox.hpp"

#include <algorithm>
#include <cstdio>

#include "derain/filters.hpp"
#include "derain/hash.hpp"

namespace derain {

std::string_view tool_name(ToolId tool) {
  switch (tool) {
    case ToolId::Denoise: return "denoise";
    case ToolId::Deblur: return "deblur";
    case ToolId::ColorCorrect: return "color_correct";
  }
  return "unknown";
}

std::optional<ToolId> tool_from_name(std::string_view name) {
  for (ToolId t : kAllTools) {
    if (tool_name(t) == name) return t;
  }
  return std::nullopt;
}

void ToolConfig::validate() const {
  if (denoise.kernel_radius < 1 || denoise.kernel_radius > 7) {
    throw ConfigError("denoise.kernel_radius must lie in [1,7]");
  }
  if (!(denoise.spatial_sigma > 0.0) || !(denoise.range_sigma > 0.0)) {
    throw ConfigError("denoise sigmas must be positive");
  }
  if (!(deblur.blur_sigma > 0.0)) throw ConfigError("deblur.blur_sigma must be positive");
  if (!(deblur.amount > 0.0 && deblur.amount <= 3.0)) {
    throw ConfigError("deblur.amount must lie in (0,3]");
  }
  if (!(color_correct.gain_clip >= 1.0)) throw ConfigError("color_correct.gain_clip must be >= 1");
}

ToolConfig default_config() { return ToolConfig{}; }

void to_json(nlohmann::json& j, const ToolConfig& cfg) {
  j = nlohmann::json{
      {"denoise",
       {{"kernel_radius", cfg.denoise.kernel_radius},
        {"spatial_sigma", cfg.denoise.spatial_sigma},
        {"range_sigma", cfg.denoise.range_sigma}}},
      {"deblur", {{"blur_sigma", cfg.deblur.blur_sigma}, {"amount", cfg.deblur.amount}}},
      {"color_correct", {{"gain_clip", cfg.color_correct.gain_clip}}},
  };
}

void from_json(const nlohmann::json& j, ToolConfig& cfg) {
  cfg = ToolConfig{};
  try {
    if (j.contains("denoise")) {
      const auto& d = j.at("denoise");
      cfg.denoise.kernel_radius = d.value("kernel_radius", cfg.denoise.kernel_radius);
      cfg.denoise.spatial_sigma = d.value("spatial_sigma", cfg.denoise.spatial_sigma);
      cfg.denoise.range_sigma = d.value("range_sigma", cfg.denoise.range_sigma);
    }
    if (j.contains("deblur")) {
      const auto& d = j.at("deblur");
      cfg.deblur.blur_sigma = d.value("blur_sigma", cfg.deblur.blur_sigma);
      cfg.deblur.amount = d.value("amount", cfg.deblur.amount);
    }
    if (j.contains("color_correct")) {
      cfg.color_correct.gain_clip = j.at("color_correct").value("gain_clip", cfg.color_correct.gain_clip);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed tool config: ") + e.what());
  }
  cfg.validate();
}

std::string config_hash(const ToolConfig& cfg) {
  return hex64(fnv1a64(nlohmann::json(cfg).dump()));
}

namespace {

Image unsharp(const Image& img, const DeblurConfig& cfg) {
  const Image blurred = filters::gaussian_blur(img, cfg.blur_sigma);
  Image out(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double v = img.data()[i];
    out.data()[i] = v + cfg.amount * (v - blurred.data()[i]);
  }
  return clamp01(std::move(out));
}

Image gray_world(const Image& img, const ColorCorrectConfig& cfg) {
  std::array<double, 3> mean{};
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) mean[c] += img.data()[i * 3 + c];
  }
  for (double& m : mean) m /= static_cast<double>(img.pixel_count());
  const double global = (mean[0] + mean[1] + mean[2]) / 3.0;

  std::array<double, 3> gain{};
  for (int c = 0; c < 3; ++c) {
    // A black channel gets the maximal gain; it stays black anyway.
    const double g = mean[c] > 0.0 ? global / mean[c] : cfg.gain_clip;
    gain[c] = std::clamp(g, 1.0 / cfg.gain_clip, cfg.gain_clip);
  }
  Image out = img;
  for (std::size_t i = 0; i < out.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) out.data()[i * 3 + c] *= gain[c];
  }
  return clamp01(std::move(out));
}

}  // namespace

Image apply_tool(ToolId tool, const Image& img, const ToolConfig& cfg) {
  switch (tool) {
    case ToolId::Denoise:
      return clamp01(filters::bilateral(img, cfg.denoise.kernel_radius, cfg.denoise.spatial_sigma,
                                        cfg.denoise.range_sigma));
    case ToolId::Deblur: return unsharp(img, cfg.deblur);
    case ToolId::ColorCorrect: return gray_world(img, cfg.color_correct);
  }
  throw ConfigError("unknown tool id");
}

}  // namespace derain
