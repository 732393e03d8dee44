#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

#include "derain/image.hpp"

namespace derain {

/// Frozen restoration tools. Ordinals are part of the file formats; never reorder.
enum class ToolId : int { Denoise = 0, Deblur = 1, ColorCorrect = 2 };

inline constexpr int kToolCount = 3;
inline constexpr std::array<ToolId, kToolCount> kAllTools = {ToolId::Denoise, ToolId::Deblur,
                                                             ToolId::ColorCorrect};

std::string_view tool_name(ToolId tool);
std::optional<ToolId> tool_from_name(std::string_view name);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DenoiseConfig {
  int kernel_radius = 3;
  double spatial_sigma = 2.0;
  double range_sigma = 0.1;
  friend bool operator==(const DenoiseConfig&, const DenoiseConfig&) = default;
};

struct DeblurConfig {
  double blur_sigma = 1.5;
  double amount = 1.0;
  friend bool operator==(const DeblurConfig&, const DeblurConfig&) = default;
};

struct ColorCorrectConfig {
  double gain_clip = 4.0;
  friend bool operator==(const ColorCorrectConfig&, const ColorCorrectConfig&) = default;
};

struct ToolConfig {
  DenoiseConfig denoise;
  DeblurConfig deblur;
  ColorCorrectConfig color_correct;

  /// Throws ConfigError when any parameter is outside its documented range.
  void validate() const;
  friend bool operator==(const ToolConfig&, const ToolConfig&) = default;
};

ToolConfig default_config();

void to_json(nlohmann::json& j, const ToolConfig& cfg);
/// Missing keys fall back to defaults; the result is validated.
void from_json(const nlohmann::json& j, ToolConfig& cfg);

/// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string config_hash(const ToolConfig& cfg);

/// Applies one frozen tool. Output always lies in [0,1]; same input gives identical bits.
Image apply_tool(ToolId tool, const Image& img, const ToolConfig& cfg);

}  // namespace derain
