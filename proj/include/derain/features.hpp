#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

#include "derain/image.hpp"

namespace derain {

/// Pooled vector layout:
///   0 mean luma, 1 mean local contrast, 2 mean gradient magnitude, 3 mean |Laplacian|,
///   4..6 colour cast (channel mean minus global mean, R/G/B),
///   7 noise sigma estimate, 8 high-frequency energy ratio, 9 global luma std.
/// Per-pixel planes follow the same layout. Entries 0..6 are evaluated locally; the global-only
/// statistics 7..9 are broadcast as constant planes, so every pooled entry is the spatial mean
/// of its plane.
inline constexpr int kPooledDim = 10;
inline constexpr int kPixelDim = 10;

/// Changes whenever the layout or a statistic's definition changes; stored in model files.
std::uint64_t feature_spec_hash();

struct FeatureSet {
  std::vector<double> pooled;       // kPooledDim
  std::vector<Plane> per_pixel;     // kPixelDim planes, image-sized
};

FeatureSet extract_features(const Image& img);

/// Median-absolute-deviation noise estimate of one plane from its Laplacian response.
double estimate_noise_sigma(const Plane& plane);

}  // namespace derain
