#pragma once

// Lines, rulings and their pinhole projections. Everything here works on the
// normalized image plane (focal length 1, principal point at the origin).

#include <utility>

#include "ruledvo/types.hpp"

namespace ruledvo {

// Below this norm a direction vector is treated as zero.
inline constexpr double kMinDirectionNorm = 1e-12;
// Points closer to the image plane than this are not projected.
inline constexpr double kMinDepth = 1e-6;
// Rulings whose two reference projections are closer than this are end-on.
inline constexpr double kMinRulingImageLength = 1e-9;

// Unbounded 3D line X(alpha) = x0 + alpha * v0 in canonical form: v0 is a
// unit vector whose first significant component is positive and x0 is the
// foot of the perpendicular from the origin.
struct LineState {
  Vec3 x0 = Vec3::Zero();
  Vec3 v0 = Vec3::UnitX();
};

// A 2D data point on the normalized image plane. t is relative to the
// origin of whatever window owns the observation.
struct Observation {
  double t = 0.0;
  Vec2 p = Vec2::Zero();
};

// Normalized coordinates beyond this magnitude are rejected as garbage.
inline constexpr double kMaxNormalizedCoordinate = 10.0;

bool is_plausible(const Observation& obs);

// Per-line block of the ruled-surface parameterization: a = X0.z,
// c = V0.z, d = V0.xy, e = X0.xy.
struct LineBlock {
  double a = 1.0;
  double c = 0.0;
  Vec2 d = Vec2::UnitX();
  Vec2 e = Vec2::Zero();

  LineState to_line_state() const;
  static LineBlock from_line_state(const LineState& line);
};

// Motion block shared by every line of a window: b and f are the initial
// z and xy velocity of the line-relative translation (with the integration
// bias folded in), g is the constant acceleration bias (gravity plus
// accelerometer bias).
struct SharedMotionParams {
  double b = 0.0;
  Vec2 f = Vec2::Zero();
  Vec3 g = Vec3::Zero();

  Vec3 velocity() const { return {f.x(), f.y(), b}; }
  void set_velocity(const Vec3& v) {
    f = v.head<2>();
    b = v.z();
  }
};

// Full parameter set (a, b, c, d, e, f, g) of a single ruled surface.
struct RulingParams {
  LineBlock line;
  SharedMotionParams motion;
};

// Infinite line on the image plane: { p : normal . p = offset }, with a
// unit normal.
struct ImageLine {
  Vec2 normal = Vec2::UnitY();
  double offset = 0.0;

  static ImageLine through(const Vec2& p1, const Vec2& p2);
  Vec2 direction() const { return {-normal.y(), normal.x()}; }
  Vec2 foot() const { return offset * normal; }
  double distance(const Vec2& p) const;
};

LineState canonicalize_line(const Vec3& x0_raw, const Vec3& v0_raw);

// True when `line` satisfies the canonical-form invariants to `tol`.
bool is_canonical(const LineState& line, double tol = 1e-9);

// Euclidean distance from a 3D point to an unbounded line.
double point_to_line_distance(const Vec3& point, const LineState& line);

Vec2 project_ruling_point(const LineState& line, const Vec3& xt, double alpha);

// Projections of the ruling points at alpha = 0 and alpha = 1.
std::pair<Vec2, Vec2> ruling_endpoints_in_image(const LineState& line,
                                                const Vec3& xt);

// Unsigned perpendicular distance from p to the image of the translated
// ruling.
double point_to_ruling_distance(const Vec2& p, const LineState& line,
                                const Vec3& xt);

// Two-point line distance, unsigned. r1 and r2 must differ.
double point_to_image_line_distance(const Vec2& p, const Vec2& r1,
                                    const Vec2& r2);

}  // namespace ruledvo
