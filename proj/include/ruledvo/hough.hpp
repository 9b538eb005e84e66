#pragma once

#include <optional>
#include <span>
#include <vector>

#include "ruledvo/geometry.hpp"

namespace ruledvo {

struct HoughConfig {
  double rho_resolution = 5.0;        // pixels
  double theta_resolution_deg = 1.0;  // degrees
  int vote_threshold = 100;
  double min_line_length = 100.0;  // pixels
  double max_line_gap = 5.0;       // pixels
  int max_candidates = 64;         // peaks examined per search
};

// A detected straight line in pixel coordinates, x cos(theta) +
// y sin(theta) = rho with theta in [0, pi).
struct HoughLine {
  double rho = 0.0;
  double theta = 0.0;
  int votes = 0;
  double length = 0.0;  // longest gap-bounded run along the line, pixels
  ImageLine line;       // refined fit, same line as (rho, theta)
};

HoughLine to_hough_form(const ImageLine& line);

// Highest-voted accumulator peak that contains a run of points at least
// min_line_length long with no gap above max_line_gap, refined by a total
// least squares fit to its supporting points.
std::optional<HoughLine> strongest_line(std::span<const Vec2> points, int width,
                                        int height, const HoughConfig& config);

// Repeatedly takes the strongest line and removes every point within
// suppression_radius of it, up to max_lines times.
std::vector<HoughLine> detect_hough_lines(std::vector<Vec2> points, int width,
                                          int height, const HoughConfig& config,
                                          int max_lines, double suppression_radius);

}  // namespace ruledvo
