#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace derain {

/// Raised for anything wrong with pixel data or image files.
class ImageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Smallest side accepted from disk and by windowed SSIM.
inline constexpr int kMinImageSide = 8;

/// RGB image with samples in [0,1], row-major and channel-interleaved.
class Image {
 public:
  static constexpr int kChannels = 3;

  Image() = default;
  Image(int width, int height, double fill = 0.0);
  Image(int width, int height, std::vector<double> data);

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] std::size_t pixel_count() const {
    return static_cast<std::size_t>(width_) * height_;
  }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }

  [[nodiscard]] double at(int x, int y, int c) const { return data_[index(x, y, c)]; }
  double& at(int x, int y, int c) { return data_[index(x, y, c)]; }

  [[nodiscard]] std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  [[nodiscard]] bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  [[nodiscard]] std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Single-channel plane of reals; used for strength maps and feature planes.
class Plane {
 public:
  Plane() = default;
  Plane(int width, int height, double fill = 0.0);
  Plane(int width, int height, std::vector<double> data);

  [[nodiscard]] int width() const { return width_; }
  [[nodiscard]] int height() const { return height_; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }

  [[nodiscard]] double at(int x, int y) const {
    return data_[static_cast<std::size_t>(y) * width_ + x];
  }
  double& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }

  [[nodiscard]] std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Reads an 8-bit RGB/RGBA/gray PNG. Samples map to v/255; alpha is dropped.
Image load_image(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG, quantizing each sample as floor(v*255 + 0.5).
void save_image(const Image& img, const std::filesystem::path& path);

/// Single-channel 8-bit PNG I/O for planes whose values lie in [0,1].
Plane load_plane_png(const std::filesystem::path& path);
void save_plane_png(const Plane& plane, const std::filesystem::path& path);

/// Byte quantization shared by every 8-bit writer.
unsigned char quantize_u8(double v);

Image crop_center(const Image& img, int size);
Image clamp01(Image img);

}  // namespace derain
