#include "derain/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "derain/filters.hpp"
#include "derain/hash.hpp"

namespace derain {

namespace {

constexpr int kContrastRadius = 2;
constexpr double kHighPassSigma = 1.0;
// std of the 4-neighbour Laplacian of unit i.i.d. noise: sqrt(4 * 1 + 16).
const double kLaplacianNoiseGain = std::sqrt(20.0);
constexpr double kMadToSigma = 0.6745;

double median(std::vector<double> v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Plane local_std(const Plane& p, int radius) {
  const int w = p.width();
  const int h = p.height();
  Plane out(w, h);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - radius);
    const int y1 = std::min(h - 1, y + radius);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - radius);
      const int x1 = std::min(w - 1, x + radius);
      const int n = (y1 - y0 + 1) * (x1 - x0 + 1);
      // Two passes so flat patches give exactly zero.
      double s = 0.0;
      for (int yy = y0; yy <= y1; ++yy) {
        for (int xx = x0; xx <= x1; ++xx) s += p.at(xx, yy);
      }
      const double m = s / n;
      double s2 = 0.0;
      for (int yy = y0; yy <= y1; ++yy) {
        for (int xx = x0; xx <= x1; ++xx) s2 += (p.at(xx, yy) - m) * (p.at(xx, yy) - m);
      }
      out.at(x, y) = std::sqrt(s2 / n);
    }
  }
  return out;
}

Plane gradient_magnitude(const Plane& p) {
  const int w = p.width();
  const int h = p.height();
  Plane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double gx = 0.5 * (p.at(std::min(x + 1, w - 1), y) - p.at(std::max(x - 1, 0), y));
      const double gy = 0.5 * (p.at(x, std::min(y + 1, h - 1)) - p.at(x, std::max(y - 1, 0)));
      out.at(x, y) = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

}  // namespace

std::uint64_t feature_spec_hash() {
  return fnv1a64(
      "derain-features/1;pooled=luma,contrast5,grad,abslap,cast_r,cast_g,cast_b,noise_mad,"
      "hf_ratio_s1,luma_std;pixel=local(0..6),broadcast(7..9)");
}

double estimate_noise_sigma(const Plane& plane) {
  const int w = plane.width();
  const int h = plane.height();
  if (w < 3 || h < 3) return 0.0;
  const Plane lap = filters::laplacian(plane);
  std::vector<double> interior;
  interior.reserve(static_cast<std::size_t>(w - 2) * (h - 2));
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) interior.push_back(lap.at(x, y));
  }
  const double med = median(interior);
  for (double& v : interior) v = std::abs(v - med);
  return median(std::move(interior)) / kMadToSigma / kLaplacianNoiseGain;
}

FeatureSet extract_features(const Image& img) {
  const int w = img.width();
  const int h = img.height();
  const Plane y = filters::luma(img);

  FeatureSet fs;
  fs.per_pixel.reserve(kPixelDim);
  fs.per_pixel.push_back(y);
  fs.per_pixel.push_back(local_std(y, kContrastRadius));
  fs.per_pixel.push_back(gradient_magnitude(y));
  Plane abs_lap = filters::laplacian(y);
  for (double& v : abs_lap.data()) v = std::abs(v);
  fs.per_pixel.push_back(std::move(abs_lap));
  for (int c = 0; c < 3; ++c) {
    Plane cast(w, h);
    for (int yy = 0; yy < h; ++yy) {
      for (int xx = 0; xx < w; ++xx) {
        const double gray = (img.at(xx, yy, 0) + img.at(xx, yy, 1) + img.at(xx, yy, 2)) / 3.0;
        cast.at(xx, yy) = img.at(xx, yy, c) - gray;
      }
    }
    fs.per_pixel.push_back(std::move(cast));
  }

  fs.pooled.reserve(kPooledDim);
  for (const auto& p : fs.per_pixel) fs.pooled.push_back(mean_of(p.data()));
  // Global-only statistics.
  double noise = 0.0;
  for (int c = 0; c < 3; ++c) noise += estimate_noise_sigma(filters::channel(img, c));
  fs.pooled.push_back(noise / 3.0);

  const double luma_mean = fs.pooled[0];
  const Plane low = filters::gaussian_blur(y, kHighPassSigma);
  double hf = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = y.data()[i] - low.data()[i];
    const double e = y.data()[i] - luma_mean;
    hf += d * d;
    total += e * e;
  }
  fs.pooled.push_back(total > 1e-12 ? hf / total : 0.0);
  fs.pooled.push_back(std::sqrt(total / static_cast<double>(y.size())));
  for (int k = 7; k < kPooledDim; ++k) {
    Plane broadcast(w, h);
    std::fill(broadcast.data().begin(), broadcast.data().end(), fs.pooled[k]);
    fs.per_pixel.push_back(std::move(broadcast));
  }
  return fs;
}

}  // namespace derain
