#pragma once

#include "ruledvo/geometry.hpp"
#include "ruledvo/imu.hpp"

namespace ruledvo {

// Line-relative translation of a window:
//   X(t) = t * (f, b) + Gamma(t) + 0.5 * t^2 * g,
// with t measured from the window origin. X(0) is exactly zero.
class TranslationSignal {
 public:
  TranslationSignal(const SharedMotionParams& motion, GammaTable gamma)
      : motion_(motion), gamma_(std::move(gamma)) {}

  Vec3 displacement(double t_rel) const;
  Vec3 velocity(double t_rel) const;

  const SharedMotionParams& motion() const { return motion_; }
  const GammaTable& gamma() const { return gamma_; }

 private:
  SharedMotionParams motion_;
  GammaTable gamma_;
};

// Same formula for callers that already hold Gamma at t.
inline Vec3 translation_at(const SharedMotionParams& motion, double t_rel,
                           const Vec3& gamma_value) {
  return t_rel * motion.velocity() + gamma_value +
         (0.5 * t_rel * t_rel) * motion.g;
}

}  // namespace ruledvo
