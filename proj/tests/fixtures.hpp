#pragma once

// Seeded image generators and scratch directories shared by the test binaries.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "derain/image.hpp"

namespace fixtures {

inline derain::Image constant(int w, int h, double r, double g, double b) {
  derain::Image img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      img.at(x, y, 0) = r;
      img.at(x, y, 1) = g;
      img.at(x, y, 2) = b;
    }
  }
  return img;
}

inline derain::Image uniform_noise(int w, int h, std::uint64_t seed, double lo = 0.0,
                                   double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  derain::Image img(w, h);
  for (double& v : img.data()) v = u(rng);
  return img;
}

/// Smooth colour gradients plus a few hard edges; never flat.
inline derain::Image scene(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double fx = 0.05 + 0.2 * u(rng);
  const double fy = 0.05 + 0.2 * u(rng);
  const double px = 6.28 * u(rng);
  const int cx = static_cast<int>(w * (0.3 + 0.4 * u(rng)));
  const int cy = static_cast<int>(h * (0.3 + 0.4 * u(rng)));
  derain::Image img(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double s = 0.5 + 0.25 * std::sin(fx * x + px) * std::cos(fy * y);
      const bool block = x > cx && y > cy;
      img.at(x, y, 0) = block ? 0.8 : s;
      img.at(x, y, 1) = block ? 0.3 : 0.6 * s + 0.2;
      img.at(x, y, 2) = block ? 0.4 : 1.0 - s;
    }
  }
  return img;
}

inline derain::Image add_gaussian_noise(derain::Image img, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma);
  for (double& v : img.data()) v += n(rng);
  return derain::clamp01(std::move(img));
}

/// Fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("derain-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixtures
