#include "ruledvo/geometry.hpp"

#include <cmath>

#include "ruledvo/errors.hpp"

namespace ruledvo {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kZeroDirection: return "ZeroDirection";
    case ErrorCode::kNonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::kDegenerateProjection: return "DegenerateProjection";
    case ErrorCode::kDegenerateAlpha: return "DegenerateAlpha";
    case ErrorCode::kOutOfRange: return "OutOfRange";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kNoObservations: return "NoObservations";
    case ErrorCode::kNotEnoughLines: return "NotEnoughLines";
    case ErrorCode::kSeamMismatch: return "SeamMismatch";
    case ErrorCode::kTimeRangeMismatch: return "TimeRangeMismatch";
    case ErrorCode::kLineNotVisible: return "LineNotVisible";
    case ErrorCode::kFrameGap: return "FrameGap";
    case ErrorCode::kInputError: return "InputError";
  }
  return "Unknown";
}

bool is_plausible(const Observation& obs) {
  return std::isfinite(obs.t) && std::isfinite(obs.p.x()) &&
         std::isfinite(obs.p.y()) &&
         std::abs(obs.p.x()) <= kMaxNormalizedCoordinate &&
         std::abs(obs.p.y()) <= kMaxNormalizedCoordinate;
}

LineState LineBlock::to_line_state() const {
  return {Vec3(e.x(), e.y(), a), Vec3(d.x(), d.y(), c)};
}

LineBlock LineBlock::from_line_state(const LineState& line) {
  LineBlock block;
  block.a = line.x0.z();
  block.c = line.v0.z();
  block.d = line.v0.head<2>();
  block.e = line.x0.head<2>();
  return block;
}

ImageLine ImageLine::through(const Vec2& p1, const Vec2& p2) {
  const Vec2 dir = p2 - p1;
  const double len = dir.norm();
  if (len < kMinRulingImageLength) {
    throw Error(ErrorCode::kDegenerateProjection,
                "image line through coincident points");
  }
  ImageLine line;
  line.normal = Vec2(-dir.y(), dir.x()) / len;
  line.offset = line.normal.dot(p1);
  if (line.offset < 0.0) {
    line.normal = -line.normal;
    line.offset = -line.offset;
  }
  return line;
}

double ImageLine::distance(const Vec2& p) const {
  return std::abs(normal.dot(p) - offset);
}

LineState canonicalize_line(const Vec3& x0_raw, const Vec3& v0_raw) {
  const double norm = v0_raw.norm();
  if (!(norm > kMinDirectionNorm)) {
    throw Error(ErrorCode::kZeroDirection, "line direction has zero norm");
  }
  LineState line;
  line.v0 = v0_raw / norm;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(line.v0[i]) > 1e-9) {
      if (line.v0[i] < 0.0) line.v0 = -line.v0;
      break;
    }
  }
  line.x0 = x0_raw - x0_raw.dot(line.v0) * line.v0;
  return line;
}

bool is_canonical(const LineState& line, double tol) {
  if (std::abs(line.v0.norm() - 1.0) > tol) return false;
  if (std::abs(line.x0.dot(line.v0)) > tol) return false;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(line.v0[i]) > 1e-9) return line.v0[i] > 0.0;
  }
  return false;
}

double point_to_line_distance(const Vec3& point, const LineState& line) {
  const Vec3 dir = line.v0.normalized();
  return (point - line.x0).cross(dir).norm();
}

Vec2 project_ruling_point(const LineState& line, const Vec3& xt,
                          double alpha) {
  const Vec3 point = line.x0 + alpha * line.v0 + xt;
  if (!(point.z() > kMinDepth)) {
    throw Error(ErrorCode::kNonPositiveDepth,
                "ruling point is not in front of the camera");
  }
  return point.head<2>() / point.z();
}

std::pair<Vec2, Vec2> ruling_endpoints_in_image(const LineState& line,
                                                const Vec3& xt) {
  Vec2 r1 = project_ruling_point(line, xt, 0.0);
  Vec2 r2 = project_ruling_point(line, xt, 1.0);
  if ((r2 - r1).norm() < kMinRulingImageLength) {
    throw Error(ErrorCode::kDegenerateProjection,
                "ruling is viewed end-on and projects to a point");
  }
  return {r1, r2};
}

double point_to_image_line_distance(const Vec2& p, const Vec2& r1,
                                    const Vec2& r2) {
  const double dx = r2.x() - r1.x();
  const double dy = r2.y() - r1.y();
  const double num =
      dy * p.x() - dx * p.y() + r2.x() * r1.y() - r2.y() * r1.x();
  return std::abs(num) / std::sqrt(dy * dy + dx * dx);
}

double point_to_ruling_distance(const Vec2& p, const LineState& line,
                                const Vec3& xt) {
  const auto [r1, r2] = ruling_endpoints_in_image(line, xt);
  return point_to_image_line_distance(p, r1, r2);
}

}  // namespace ruledvo
