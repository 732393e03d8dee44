#include "derain/filters.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace derain::filters {

namespace {

// One separable pass over `channels` interleaved samples. Written in residual form
// (center + sum w*(neighbour - center)) so flat regions come back bit-exact.
void blur_pass(const std::vector<double>& src, std::vector<double>& dst, int width, int height,
               int channels, const std::vector<double>& taps, bool horizontal) {
  const int radius = static_cast<int>(taps.size() / 2);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < channels; ++c) {
        const std::size_t center_idx = (static_cast<std::size_t>(y) * width + x) * channels + c;
        const double center = src[center_idx];
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int xx = horizontal ? std::clamp(x + k, 0, width - 1) : x;
          const int yy = horizontal ? y : std::clamp(y + k, 0, height - 1);
          const double v = src[(static_cast<std::size_t>(yy) * width + xx) * channels + c];
          acc += taps[k + radius] * (v - center);
        }
        dst[center_idx] = center + acc;
      }
    }
  }
}

std::vector<double> blur_buffer(const std::vector<double>& src, int width, int height,
                                int channels, double sigma) {
  const auto taps = gaussian_kernel(sigma);
  std::vector<double> tmp(src.size());
  std::vector<double> out(src.size());
  blur_pass(src, tmp, width, height, channels, taps, true);
  blur_pass(tmp, out, width, height, channels, taps, false);
  return out;
}

}  // namespace

std::vector<double> gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian sigma must be positive");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    const double w = std::exp(-0.5 * (k * k) / (sigma * sigma));
    taps[k + radius] = w;
    sum += w;
  }
  for (double& w : taps) w /= sum;
  return taps;
}

Image gaussian_blur(const Image& img, double sigma) {
  std::vector<double> src(img.data().begin(), img.data().end());
  return Image(img.width(), img.height(),
               blur_buffer(src, img.width(), img.height(), Image::kChannels, sigma));
}

Plane gaussian_blur(const Plane& plane, double sigma) {
  std::vector<double> src(plane.data().begin(), plane.data().end());
  return Plane(plane.width(), plane.height(),
               blur_buffer(src, plane.width(), plane.height(), 1, sigma));
}

Image bilateral(const Image& img, int radius, double spatial_sigma, double range_sigma) {
  const int w = img.width();
  const int h = img.height();
  std::vector<double> spatial((2 * radius + 1) * (2 * radius + 1));
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      spatial[(dy + radius) * (2 * radius + 1) + dx + radius] =
          std::exp(-0.5 * (dx * dx + dy * dy) / (spatial_sigma * spatial_sigma));
    }
  }
  const double inv_range = 1.0 / (2.0 * range_sigma * range_sigma);

  Image out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double c0 = img.at(x, y, 0);
      const double c1 = img.at(x, y, 1);
      const double c2 = img.at(x, y, 2);
      double wsum = 0.0;
      double a0 = 0.0;
      double a1 = 0.0;
      double a2 = 0.0;
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (int dx = -radius; dx <= radius; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= w) continue;
          const double d0 = img.at(xx, yy, 0) - c0;
          const double d1 = img.at(xx, yy, 1) - c1;
          const double d2 = img.at(xx, yy, 2) - c2;
          const double wt = spatial[(dy + radius) * (2 * radius + 1) + dx + radius] *
                            std::exp(-(d0 * d0 + d1 * d1 + d2 * d2) * inv_range);
          wsum += wt;
          a0 += wt * d0;
          a1 += wt * d1;
          a2 += wt * d2;
        }
      }
      out.at(x, y, 0) = c0 + a0 / wsum;
      out.at(x, y, 1) = c1 + a1 / wsum;
      out.at(x, y, 2) = c2 + a2 / wsum;
    }
  }
  return out;
}

Plane luma(const Image& img) {
  Plane out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      out.at(x, y) = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
    }
  }
  return out;
}

Plane laplacian(const Plane& p) {
  const int w = p.width();
  const int h = p.height();
  Plane out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double c = p.at(x, y);
      out.at(x, y) = p.at(std::max(x - 1, 0), y) + p.at(std::min(x + 1, w - 1), y) +
                     p.at(x, std::max(y - 1, 0)) + p.at(x, std::min(y + 1, h - 1)) - 4.0 * c;
    }
  }
  return out;
}

Plane channel(const Image& img, int c) {
  Plane out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) out.at(x, y) = img.at(x, y, c);
  }
  return out;
}

}  // namespace derain::filters
