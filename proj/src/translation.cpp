#include "ruledvo/translation.hpp"

namespace ruledvo {

Vec3 TranslationSignal::displacement(double t_rel) const {
  return translation_at(motion_, t_rel, gamma_.value_at(t_rel));
}

Vec3 TranslationSignal::velocity(double t_rel) const {
  return motion_.velocity() + gamma_.rate_at(t_rel) + t_rel * motion_.g;
}

}  // namespace ruledvo
