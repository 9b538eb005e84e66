#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ruledvo/types.hpp"

namespace ruledvo {

// 8-bit grayscale raster, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  std::uint8_t at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t& at(int x, int y) {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
};

// Binary PGM (P5) with maxval 255.
GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const GrayImage& image);

// Pinhole intrinsics mapping pixel centers (u = column, v = row) to the
// normalized image plane.
struct Intrinsics {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 319.5;
  double cy = 239.5;
  int width = 640;
  int height = 480;

  Vec2 to_normalized(const Vec2& pixel) const {
    return {(pixel.x() - cx) / fx, (pixel.y() - cy) / fy};
  }
  Vec2 to_pixel(const Vec2& normalized) const {
    return {normalized.x() * fx + cx, normalized.y() * fy + cy};
  }
  double mean_focal() const { return 0.5 * (fx + fy); }
  bool contains_pixel(const Vec2& pixel) const {
    return pixel.x() >= -0.5 && pixel.x() <= width - 0.5 && pixel.y() >= -0.5 &&
           pixel.y() <= height - 0.5;
  }
};

// Sobel gradients of an image and the pixels whose gradient magnitude
// reaches the threshold.
struct EdgeMap {
  int width = 0;
  int height = 0;
  double threshold = 0.0;
  std::vector<float> magnitude;
  std::vector<float> direction;  // radians, atan2(gy, gx)
  std::vector<Vec2> active;      // pixel centers, row-major order

  float magnitude_at(int x, int y) const {
    return magnitude[static_cast<std::size_t>(y) * width + x];
  }
};

EdgeMap compute_edge_map(const GrayImage& image, double threshold);

}  // namespace ruledvo
