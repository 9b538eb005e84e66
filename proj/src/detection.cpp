#include "ruledvo/detection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "ruledvo/errors.hpp"

namespace ruledvo {
namespace {

std::vector<LineDetection> finish_detection(const std::vector<HoughLine>& found,
                                            std::span<const Observation> points,
                                            const Intrinsics& intrinsics,
                                            const DetectionConfig& config) {
  if (static_cast<int>(found.size()) < config.num_lines) {
    throw Error(ErrorCode::kNotEnoughLines,
                "found " + std::to_string(found.size()) + " of " +
                    std::to_string(config.num_lines) + " lines");
  }
  std::vector<ImageLine> lines;
  for (const auto& h : found) lines.push_back(pixel_to_normalized(h.line, intrinsics));
  auto inliers = assign_to_lines(points, lines, config.inlier_radius);

  std::vector<LineDetection> out(found.size());
  for (std::size_t l = 0; l < found.size(); ++l) {
    out[l].line = lines[l];
    out[l].pixel_line = found[l];
    out[l].inliers = std::move(inliers[l]);
  }
  return out;
}

double suppression_pixels(const DetectionConfig& config, const Intrinsics& intrinsics) {
  return config.suppression_radius * intrinsics.mean_focal();
}

}  // namespace

GrayImage median_filter3(const GrayImage& image) {
  GrayImage out = image;
  std::array<std::uint8_t, 9> window;
  for (int y = 1; y + 1 < image.height; ++y) {
    for (int x = 1; x + 1 < image.width; ++x) {
      int k = 0;
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) window[k++] = image.at(x + dx, y + dy);
      }
      std::nth_element(window.begin(), window.begin() + 4, window.end());
      out.at(x, y) = window[4];
    }
  }
  return out;
}

std::vector<Observation> harvest_edge_points(const GrayImage& image, double t,
                                             const Intrinsics& intrinsics,
                                             const DetectionConfig& config) {
  const EdgeMap edges = compute_edge_map(
      config.median_prefilter ? median_filter3(image) : image, config.edge_threshold);
  std::vector<Observation> out;
  out.reserve(edges.active.size());
  for (const auto& px : edges.active) out.push_back({t, intrinsics.to_normalized(px)});
  return out;
}

ImageLine pixel_to_normalized(const ImageLine& pixel_line, const Intrinsics& intrinsics) {
  // n . (K x) = rho  =>  (n.x fx) x + (n.y fy) y = rho - n.x cx - n.y cy
  const Vec2 n(pixel_line.normal.x() * intrinsics.fx,
               pixel_line.normal.y() * intrinsics.fy);
  double offset = pixel_line.offset - pixel_line.normal.x() * intrinsics.cx -
                  pixel_line.normal.y() * intrinsics.cy;
  const double scale = n.norm();
  ImageLine line{n / scale, offset / scale};
  if (line.offset < 0.0) {
    line.normal = -line.normal;
    line.offset = -line.offset;
  }
  return line;
}

std::vector<LineDetection> detect_initial_lines(std::span<const TimedFrame> frames,
                                                const Intrinsics& intrinsics,
                                                const DetectionConfig& config) {
  if (frames.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "line detection needs at least one frame");
  }
  const int width = frames.front().image.width;
  const int height = frames.front().image.height;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(width) * height, 0);
  std::vector<Observation> points;
  for (const auto& frame : frames) {
    if (frame.image.width != width || frame.image.height != height) {
      throw Error(ErrorCode::kInvalidArgument, "frames differ in size");
    }
    const GrayImage& source =
        config.median_prefilter ? median_filter3(frame.image) : frame.image;
    const EdgeMap edges = compute_edge_map(source, config.edge_threshold);
    for (const auto& px : edges.active) {
      mask[static_cast<std::size_t>(px.y()) * width + static_cast<std::size_t>(px.x())] = 1;
      points.push_back({frame.t, intrinsics.to_normalized(px)});
    }
  }
  std::vector<Vec2> pixels;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (mask[static_cast<std::size_t>(y) * width + x]) pixels.emplace_back(x, y);
    }
  }
  const auto found =
      detect_hough_lines(std::move(pixels), width, height, config.hough,
                         config.num_lines, suppression_pixels(config, intrinsics));
  return finish_detection(found, points, intrinsics, config);
}

std::vector<LineDetection> detect_initial_lines(std::span<const Observation> points,
                                                const Intrinsics& intrinsics,
                                                const DetectionConfig& config) {
  const int width = intrinsics.width;
  const int height = intrinsics.height;
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(width) * height, 0);
  for (const auto& obs : points) {
    const Vec2 px = intrinsics.to_pixel(obs.p);
    const long x = std::lround(px.x());
    const long y = std::lround(px.y());
    // A 3x3 stamp per point: sampled data is much sparser than edge
    // pixels, and the gap rule is written for the latter.
    for (long yy = std::max(0L, y - 1); yy <= std::min<long>(height - 1, y + 1); ++yy) {
      for (long xx = std::max(0L, x - 1); xx <= std::min<long>(width - 1, x + 1); ++xx) {
        mask[static_cast<std::size_t>(yy) * width + static_cast<std::size_t>(xx)] = 1;
      }
    }
  }
  std::vector<Vec2> pixels;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (mask[static_cast<std::size_t>(y) * width + x]) pixels.emplace_back(x, y);
    }
  }
  const auto found =
      detect_hough_lines(std::move(pixels), width, height, config.hough,
                         config.num_lines, suppression_pixels(config, intrinsics));
  return finish_detection(found, points, intrinsics, config);
}

std::vector<std::vector<Observation>> assign_to_lines(std::span<const Observation> points,
                                                      std::span<const ImageLine> lines,
                                                      double radius) {
  std::vector<std::vector<Observation>> out(lines.size());
  for (const auto& obs : points) {
    int owner = -1;
    int hits = 0;
    for (std::size_t l = 0; l < lines.size(); ++l) {
      if (lines[l].distance(obs.p) < radius) {
        owner = static_cast<int>(l);
        ++hits;
      }
    }
    if (hits == 1) out[static_cast<std::size_t>(owner)].push_back(obs);
  }
  return out;
}

SurfaceSetParams init_surface_params(std::span<const LineDetection> detections,
                                     double a_init, const Vec3& g_init) {
  std::vector<ImageLine> lines;
  lines.reserve(detections.size());
  for (const auto& d : detections) lines.push_back(d.line);
  return init_surface_params(lines, a_init, g_init);
}

SurfaceSetParams init_surface_params(std::span<const ImageLine> lines, double a_init,
                                     const Vec3& g_init) {
  SurfaceSetParams params;
  for (const auto& line : lines) {
    LineBlock block;
    block.a = a_init;
    block.c = 0.0;
    block.d = line.direction();
    block.e = a_init * line.foot();
    params.lines.push_back(block);
  }
  params.shared.g = g_init;
  return retract(params);
}

}  // namespace ruledvo
