#include "ruledvo/hough.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "ruledvo/errors.hpp"

namespace ruledvo {
namespace {

struct Run {
  double begin = 0.0;
  double end = 0.0;
  double length() const { return end - begin; }
};

// Longest run of sorted positions with no gap above max_gap.
Run longest_run(std::vector<double>& positions, double max_gap) {
  Run best;
  if (positions.empty()) return best;
  std::sort(positions.begin(), positions.end());
  Run current{positions.front(), positions.front()};
  best = current;
  for (std::size_t i = 1; i < positions.size(); ++i) {
    if (positions[i] - current.end > max_gap) {
      current = {positions[i], positions[i]};
    } else {
      current.end = positions[i];
    }
    if (current.length() > best.length()) best = current;
  }
  return best;
}

// Total least squares line through the points.
std::optional<ImageLine> fit_line(const std::vector<Vec2>& pts) {
  if (pts.size() < 2) return std::nullopt;
  Vec2 mean = Vec2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= static_cast<double>(pts.size());
  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) scatter += (p - mean) * (p - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(scatter);
  ImageLine line;
  line.normal = eig.eigenvectors().col(0).normalized();
  line.offset = line.normal.dot(mean);
  return line;
}

}  // namespace

HoughLine to_hough_form(const ImageLine& line) {
  HoughLine h;
  h.line = line;
  double theta = std::atan2(line.normal.y(), line.normal.x());
  double rho = line.offset;
  if (theta < 0.0) {
    theta += std::numbers::pi;
    rho = -rho;
  }
  if (theta >= std::numbers::pi) {
    theta -= std::numbers::pi;
    rho = -rho;
  }
  h.theta = theta;
  h.rho = rho;
  return h;
}

std::optional<HoughLine> strongest_line(std::span<const Vec2> points, int width,
                                        int height, const HoughConfig& config) {
  if (!(config.rho_resolution > 0.0) || !(config.theta_resolution_deg > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "Hough resolutions must be positive");
  }
  if (points.empty()) return std::nullopt;

  const double theta_step = config.theta_resolution_deg * std::numbers::pi / 180.0;
  const int num_theta =
      std::max(1, static_cast<int>(std::lround(std::numbers::pi / theta_step)));
  const double max_rho = std::hypot(width, height) + config.rho_resolution;
  const int num_rho =
      static_cast<int>(std::ceil(2.0 * max_rho / config.rho_resolution)) + 1;

  std::vector<double> cos_table(num_theta), sin_table(num_theta);
  for (int i = 0; i < num_theta; ++i) {
    cos_table[i] = std::cos(i * theta_step);
    sin_table[i] = std::sin(i * theta_step);
  }
  auto rho_bin = [&](double rho) {
    return static_cast<int>(std::lround((rho + max_rho) / config.rho_resolution));
  };

  std::vector<int> accumulator(static_cast<std::size_t>(num_theta) * num_rho, 0);
  for (const auto& p : points) {
    for (int i = 0; i < num_theta; ++i) {
      const int r = rho_bin(p.x() * cos_table[i] + p.y() * sin_table[i]);
      if (r >= 0 && r < num_rho) {
        ++accumulator[static_cast<std::size_t>(i) * num_rho + r];
      }
    }
  }

  std::vector<std::size_t> peaks;
  for (std::size_t idx = 0; idx < accumulator.size(); ++idx) {
    if (accumulator[idx] >= config.vote_threshold) peaks.push_back(idx);
  }
  const std::size_t keep =
      std::min<std::size_t>(peaks.size(), static_cast<std::size_t>(config.max_candidates));
  std::partial_sort(peaks.begin(), peaks.begin() + static_cast<long>(keep),
                    peaks.end(), [&](std::size_t a, std::size_t b) {
                      if (accumulator[a] != accumulator[b]) {
                        return accumulator[a] > accumulator[b];
                      }
                      return a < b;
                    });

  for (std::size_t k = 0; k < keep; ++k) {
    const std::size_t idx = peaks[k];
    const int ti = static_cast<int>(idx / num_rho);
    const int ri = static_cast<int>(idx % num_rho);
    const Vec2 normal(cos_table[ti], sin_table[ti]);
    const Vec2 dir(-normal.y(), normal.x());
    const double rho = ri * config.rho_resolution - max_rho;

    std::vector<double> along;
    for (const auto& p : points) {
      if (std::abs(normal.dot(p) - rho) <= 0.5 * config.rho_resolution) {
        along.push_back(dir.dot(p));
      }
    }
    const Run run = longest_run(along, config.max_line_gap);
    if (run.length() < config.min_line_length) continue;

    // Refine: fit to the supporting run, then re-gather around the fit.
    ImageLine line{normal, rho};
    double band = config.rho_resolution;
    for (int iter = 0; iter < 3; ++iter) {
      std::vector<Vec2> support;
      const Vec2 line_dir = line.direction();
      const double sign = line_dir.dot(dir) >= 0.0 ? 1.0 : -1.0;
      for (const auto& p : points) {
        const double s = sign * line_dir.dot(p);
        if (line.distance(p) <= band && s >= run.begin - config.max_line_gap &&
            s <= run.end + config.max_line_gap) {
          support.push_back(p);
        }
      }
      const auto fitted = fit_line(support);
      if (!fitted) break;
      line = *fitted;
      band = std::max(3.0, 0.6 * config.rho_resolution);
    }

    HoughLine result = to_hough_form(line);
    result.votes = accumulator[idx];
    result.length = run.length();
    return result;
  }
  return std::nullopt;
}

std::vector<HoughLine> detect_hough_lines(std::vector<Vec2> points, int width,
                                          int height, const HoughConfig& config,
                                          int max_lines, double suppression_radius) {
  std::vector<HoughLine> lines;
  for (int m = 0; m < max_lines; ++m) {
    auto found = strongest_line(points, width, height, config);
    if (!found) break;
    const ImageLine& line = found->line;
    std::erase_if(points, [&](const Vec2& p) {
      return line.distance(p) <= suppression_radius;
    });
    lines.push_back(*found);
  }
  return lines;
}

}  // namespace ruledvo
