#pragma once

#include <vector>

#include "derain/image.hpp"

namespace derain::filters {

/// Normalized 1-D Gaussian taps, truncated at radius ceil(3*sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Separable Gaussian blur with edge replication. Constant inputs are fixpoints, exactly.
Image gaussian_blur(const Image& img, double sigma);
Plane gaussian_blur(const Plane& plane, double sigma);

/// Joint-RGB bilateral filter over a (2r+1)^2 window; out-of-bounds taps are skipped.
Image bilateral(const Image& img, int radius, double spatial_sigma, double range_sigma);

/// Per-pixel Rec.601 luma.
Plane luma(const Image& img);

/// 4-neighbour Laplacian of one channel with edge replication.
Plane laplacian(const Plane& plane);
Plane channel(const Image& img, int c);

}  // namespace derain::filters
