#pragma once

// Initial line hypotheses for the first frames of a sequence: image
// gradients (or raw data points) are accumulated over the initial interval
// and the strongest straight lines are picked by the Hough transform.

#include <span>
#include <vector>

#include "ruledvo/estimator.hpp"
#include "ruledvo/hough.hpp"
#include "ruledvo/image.hpp"

namespace ruledvo {

struct DetectionConfig {
  HoughConfig hough;
  int num_lines = 4;
  double edge_threshold = 100.0;     // Sobel magnitude, 8-bit images
  bool median_prefilter = true;      // 3x3 median before the gradient
  double suppression_radius = 0.05;  // normalized units
  // Data points closer than this to exactly one detected line become its
  // inliers (normalized units).
  double inlier_radius = 0.02;
};

struct TimedFrame {
  double t = 0.0;
  GrayImage image;
};

struct LineDetection {
  ImageLine line;       // normalized image plane
  HoughLine pixel_line; // the same line in pixels
  std::vector<Observation> inliers;
};

GrayImage median_filter3(const GrayImage& image);

// Pixels whose gradient magnitude reaches the threshold, as normalized
// observations stamped with time t.
std::vector<Observation> harvest_edge_points(const GrayImage& image, double t,
                                             const Intrinsics& intrinsics,
                                             const DetectionConfig& config);

ImageLine pixel_to_normalized(const ImageLine& pixel_line,
                              const Intrinsics& intrinsics);

// Hough detection on rasters. Edge pixels of all frames are pooled for
// voting; inliers come from every frame. Throws NotEnoughLines when fewer
// than config.num_lines lines are found.
std::vector<LineDetection> detect_initial_lines(std::span<const TimedFrame> frames,
                                                const Intrinsics& intrinsics,
                                                const DetectionConfig& config);

// Same detection for data that already lives on the normalized image
// plane: the points are rasterized through the intrinsics for voting.
std::vector<LineDetection> detect_initial_lines(std::span<const Observation> points,
                                                const Intrinsics& intrinsics,
                                                const DetectionConfig& config);

// Assigns each point to the single line within `radius` of it. Points
// near no line or near two or more lines are left out.
std::vector<std::vector<Observation>> assign_to_lines(
    std::span<const Observation> points, std::span<const ImageLine> lines,
    double radius);

// Static-scene starting point for the window solver: every detected image
// line is back-projected to depth a_init with no motion.
SurfaceSetParams init_surface_params(std::span<const LineDetection> detections,
                                     double a_init = 1.0,
                                     const Vec3& g_init = Vec3::Zero());

SurfaceSetParams init_surface_params(std::span<const ImageLine> lines,
                                     double a_init = 1.0,
                                     const Vec3& g_init = Vec3::Zero());

}  // namespace ruledvo
