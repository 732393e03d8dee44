#include "derain/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace derain {

namespace {

void check_dims(int width, int height) {
  if (width <= 0 || height <= 0) {
    throw ImageError("image dimensions must be positive, got " + std::to_string(width) + "x" +
                     std::to_string(height));
  }
}

struct PngImage {
  png_image img{};
  PngImage() {
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
  }
  ~PngImage() { png_image_free(&img); }
  PngImage(const PngImage&) = delete;
  PngImage& operator=(const PngImage&) = delete;
};

std::vector<unsigned char> read_png(const std::filesystem::path& path, png_uint_32 format,
                                    int& width, int& height) {
  PngImage png;
  if (!png_image_begin_read_from_file(&png.img, path.c_str())) {
    throw ImageError("cannot read PNG '" + path.string() + "': " + png.img.message);
  }
  if (png.img.format & PNG_FORMAT_FLAG_LINEAR) {
    throw ImageError("unsupported bit depth in '" + path.string() + "': only 8-bit PNG is accepted");
  }
  png.img.format = format;
  std::vector<unsigned char> buffer(PNG_IMAGE_SIZE(png.img));
  if (!png_image_finish_read(&png.img, nullptr, buffer.data(), 0, nullptr)) {
    throw ImageError("cannot decode PNG '" + path.string() + "': " + png.img.message);
  }
  width = static_cast<int>(png.img.width);
  height = static_cast<int>(png.img.height);
  return buffer;
}

void write_png(const std::filesystem::path& path, png_uint_32 format, int width, int height,
               const std::vector<unsigned char>& bytes) {
  PngImage png;
  png.img.width = static_cast<png_uint_32>(width);
  png.img.height = static_cast<png_uint_32>(height);
  png.img.format = format;
  if (!png_image_write_to_file(&png.img, path.c_str(), 0, bytes.data(), 0, nullptr)) {
    throw ImageError("cannot write PNG '" + path.string() + "': " + png.img.message);
  }
}

}  // namespace

Image::Image(int width, int height, double fill)
    : width_(width), height_(height) {
  check_dims(width, height);
  data_.assign(pixel_count() * kChannels, fill);
}

Image::Image(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  check_dims(width, height);
  if (data_.size() != pixel_count() * kChannels) {
    throw ImageError("pixel buffer length does not match " + std::to_string(width) + "x" +
                     std::to_string(height) + "x3");
  }
}

Plane::Plane(int width, int height, double fill) : width_(width), height_(height) {
  check_dims(width, height);
  data_.assign(static_cast<std::size_t>(width) * height, fill);
}

Plane::Plane(int width, int height, std::vector<double> data)
    : width_(width), height_(height), data_(std::move(data)) {
  check_dims(width, height);
  if (data_.size() != static_cast<std::size_t>(width) * height) {
    throw ImageError("plane buffer length does not match its dimensions");
  }
}

unsigned char quantize_u8(double v) {
  const double q = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
  return static_cast<unsigned char>(q);
}

Image load_image(const std::filesystem::path& path) {
  int width = 0;
  int height = 0;
  const auto bytes = read_png(path, PNG_FORMAT_RGB, width, height);
  if (width < kMinImageSide || height < kMinImageSide) {
    throw ImageError("image '" + path.string() + "' is smaller than 8x8");
  }
  std::vector<double> data(bytes.size());
  std::transform(bytes.begin(), bytes.end(), data.begin(),
                 [](unsigned char b) { return static_cast<double>(b) / 255.0; });
  return Image(width, height, std::move(data));
}

void save_image(const Image& img, const std::filesystem::path& path) {
  std::vector<unsigned char> bytes(img.size());
  std::transform(img.data().begin(), img.data().end(), bytes.begin(), quantize_u8);
  write_png(path, PNG_FORMAT_RGB, img.width(), img.height(), bytes);
}

Plane load_plane_png(const std::filesystem::path& path) {
  int width = 0;
  int height = 0;
  const auto bytes = read_png(path, PNG_FORMAT_GRAY, width, height);
  std::vector<double> data(bytes.size());
  std::transform(bytes.begin(), bytes.end(), data.begin(),
                 [](unsigned char b) { return static_cast<double>(b) / 255.0; });
  return Plane(width, height, std::move(data));
}

void save_plane_png(const Plane& plane, const std::filesystem::path& path) {
  std::vector<unsigned char> bytes(plane.size());
  std::transform(plane.data().begin(), plane.data().end(), bytes.begin(), quantize_u8);
  write_png(path, PNG_FORMAT_GRAY, plane.width(), plane.height(), bytes);
}

Image crop_center(const Image& img, int size) {
  if (size <= 0 || size > img.width() || size > img.height()) {
    throw ImageError("crop size " + std::to_string(size) + " does not fit a " +
                     std::to_string(img.width()) + "x" + std::to_string(img.height()) + " image");
  }
  const int x0 = (img.width() - size) / 2;
  const int y0 = (img.height() - size) / 2;
  Image out(size, size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      for (int c = 0; c < Image::kChannels; ++c) out.at(x, y, c) = img.at(x0 + x, y0 + y, c);
    }
  }
  return out;
}

Image clamp01(Image img) {
  for (double& v : img.data()) v = std::min(1.0, std::max(0.0, v));
  return img;
}

}  // namespace derain
