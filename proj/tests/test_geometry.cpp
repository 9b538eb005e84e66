#include <gtest/gtest.h>

#include <cmath>

#include "ruledvo/errors.hpp"
#include "ruledvo/geometry.hpp"
#include "test_util.hpp"

namespace ruledvo {
namespace {

using testing::Gen;

// Independent distance oracle: |(p - a) x (b - a)| / |b - a|.
double cross_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  return (p - a).cross(b - a).norm() / (b - a).norm();
}

TEST(CanonicalizeLine, RemovesComponentAlongDirectionAndNormalizes) {
  const LineState l = canonicalize_line(Vec3(1, 1, 1), Vec3(0, 0, 2));
  EXPECT_EQ(l.x0, Vec3(1, 1, 0));
  EXPECT_EQ(l.v0, Vec3(0, 0, 1));
}

TEST(CanonicalizeLine, CanonicalInputUnchanged) {
  const LineState l = canonicalize_line(Vec3(0, 0, 5), Vec3(1, 0, 0));
  EXPECT_EQ(l.x0, Vec3(0, 0, 5));
  EXPECT_EQ(l.v0, Vec3(1, 0, 0));
}

TEST(CanonicalizeLine, SameLineSetAsInput) {
  const Vec3 x0(3, -2, 7), v0(-1, 2, 2);
  const LineState l = canonicalize_line(x0, v0);
  EXPECT_TRUE(is_canonical(l));
  const Vec3 a = l.x0, b = l.x0 + l.v0;
  EXPECT_LT(cross_distance(x0, a, b), 1e-9);
  EXPECT_LT(cross_distance(x0 + v0, a, b), 1e-9);
}

TEST(CanonicalizeLine, ZeroDirectionThrows) {
  try {
    canonicalize_line(Vec3(1, 2, 3), Vec3::Zero());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kZeroDirection);
  }
}

TEST(CanonicalizeLine, RandomLinesAreCanonicalAndPreserveTheSet) {
  Gen gen(11);
  for (int i = 0; i < 500; ++i) {
    const Vec3 x0 = gen.vec3(-5, 5);
    const Vec3 v0 = gen.vec3(-3, 3);
    if (v0.norm() < 1e-3) continue;
    const LineState l = canonicalize_line(x0, v0);
    ASSERT_TRUE(is_canonical(l, 1e-12));
    EXPECT_LT(cross_distance(x0, l.x0, l.x0 + l.v0), 1e-9);
    EXPECT_LT(cross_distance(x0 + v0, l.x0, l.x0 + l.v0), 1e-9);
  }
}

TEST(CanonicalizeLine, SignFlipAndPowerOfTwoScaleAreBitwiseInvariant) {
  Gen gen(12);
  for (int i = 0; i < 200; ++i) {
    const Vec3 x0 = gen.vec3(-5, 5);
    const Vec3 v0 = gen.unit3();
    const LineState a = canonicalize_line(x0, v0);
    const LineState b = canonicalize_line(x0, -v0);
    const LineState c = canonicalize_line(x0, 4.0 * v0);
    EXPECT_EQ(a.v0, b.v0);
    EXPECT_EQ(a.x0, b.x0);
    EXPECT_EQ(a.v0, c.v0);
    EXPECT_EQ(a.x0, c.x0);
  }
}

TEST(CanonicalizeLine, OriginShiftGivesSameLineAndRulings) {
  Gen gen(13);
  for (int i = 0; i < 200; ++i) {
    const LineState base = gen.visible_line();
    const double s = gen.uniform(-3, 3);
    const LineState shifted = canonicalize_line(base.x0 + s * base.v0, -base.v0);
    EXPECT_LT((shifted.x0 - base.x0).norm(), 1e-12);
    EXPECT_LT((shifted.v0 - base.v0).norm(), 1e-15);
    const auto [r1, r2] = ruling_endpoints_in_image(base, Vec3::Zero());
    const auto [q1, q2] = ruling_endpoints_in_image(shifted, Vec3::Zero());
    EXPECT_LT(point_to_image_line_distance(q1, r1, r2), 1e-12);
    EXPECT_LT(point_to_image_line_distance(q2, r1, r2), 1e-12);
  }
}

TEST(PointToLineDistance, MatchesCrossProductOracle) {
  Gen gen(14);
  for (int i = 0; i < 200; ++i) {
    const LineState l = canonicalize_line(gen.vec3(-2, 2), gen.unit3());
    const Vec3 p = gen.vec3(-3, 3);
    EXPECT_NEAR(point_to_line_distance(p, l), cross_distance(p, l.x0, l.x0 + 2.0 * l.v0), 1e-12);
  }
}

TEST(ProjectRulingPoint, Examples) {
  const LineState l{Vec3(0, 0, 2), Vec3(1, 0, 0)};
  EXPECT_EQ(project_ruling_point(l, Vec3::Zero(), 0.0), Vec2(0, 0));
  EXPECT_EQ(project_ruling_point(l, Vec3::Zero(), 2.0), Vec2(1, 0));
  EXPECT_EQ(project_ruling_point(l, Vec3(0, 0, -1), 1.0), Vec2(1, 0));
}

TEST(ProjectRulingPoint, BehindCameraThrows) {
  const LineState l{Vec3(0, 0, 2), Vec3(1, 0, 0)};
  try {
    project_ruling_point(l, Vec3(0, 0, -2), 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNonPositiveDepth);
  }
}

TEST(RulingEndpoints, Examples) {
  auto [r1, r2] = ruling_endpoints_in_image({Vec3(0, 0, 1), Vec3(1, 0, 0)}, Vec3::Zero());
  EXPECT_EQ(r1, Vec2(0, 0));
  EXPECT_EQ(r2, Vec2(1, 0));
  std::tie(r1, r2) = ruling_endpoints_in_image({Vec3(0, 1, 2), Vec3(0, 0, 1)}, Vec3::Zero());
  EXPECT_DOUBLE_EQ(r1.y(), 0.5);
  EXPECT_DOUBLE_EQ(r2.y(), 1.0 / 3.0);
  EXPECT_EQ(r1.x(), 0.0);
  EXPECT_EQ(r2.x(), 0.0);
}

TEST(RulingEndpoints, EndOnRulingThrows) {
  try {
    ruling_endpoints_in_image({Vec3(0, 0, 1), Vec3(0, 0, 1)}, Vec3::Zero());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateProjection);
  }
}

TEST(PointToRulingDistance, Examples) {
  const LineState l{Vec3(0, 0, 1), Vec3(1, 0, 0)};
  EXPECT_DOUBLE_EQ(point_to_ruling_distance(Vec2(0.3, 0.4), l, Vec3::Zero()), 0.4);
  const Vec2 on = project_ruling_point(l, Vec3(0.1, 0.0, 0.5), 0.7);
  EXPECT_LT(point_to_ruling_distance(on, l, Vec3(0.1, 0.0, 0.5)), 1e-12);
}

TEST(PointToRulingDistance, MatchesNormalFormOracle) {
  Gen gen(15);
  for (int i = 0; i < 500; ++i) {
    const LineState l = gen.visible_line();
    const Vec3 xt = gen.vec3(-0.2, 0.2);
    const Vec2 p = gen.vec2();
    const auto [r1, r2] = ruling_endpoints_in_image(l, xt);
    const Vec2 dir = r2 - r1;
    const Vec2 n(-dir.y(), dir.x());
    const double c = -n.dot(r1);
    const double oracle = std::abs(n.dot(p) + c) / n.norm();
    EXPECT_NEAR(point_to_ruling_distance(p, l, xt), oracle, 1e-12 * (1.0 + oracle));
  }
}

TEST(PointToRulingDistance, SymmetricInEndpoints) {
  Gen gen(16);
  for (int i = 0; i < 200; ++i) {
    const Vec2 r1 = gen.vec2(), r2 = gen.vec2(), p = gen.vec2();
    if ((r2 - r1).norm() < 1e-3) continue;
    EXPECT_NEAR(point_to_image_line_distance(p, r1, r2), point_to_image_line_distance(p, r2, r1),
                1e-14);
  }
}

TEST(ProjectRulingPoint, ProjectionsLieOnTheRulingImage) {
  Gen gen(17);
  for (int i = 0; i < 500; ++i) {
    const LineState l = gen.visible_line();
    const Vec3 xt = gen.vec3(-0.2, 0.2);
    const double alpha = gen.uniform(-0.5, 0.5);
    const auto [r1, r2] = ruling_endpoints_in_image(l, xt);
    const Vec2 p = project_ruling_point(l, xt, alpha);
    EXPECT_LT(point_to_image_line_distance(p, r1, r2), 1e-12);
  }
}

TEST(LineBlock, RoundTripsLineState) {
  const LineState l = canonicalize_line(Vec3(0.3, -0.2, 2.0), Vec3(1, 0.5, 0.1));
  const LineBlock b = LineBlock::from_line_state(l);
  EXPECT_EQ(b.a, l.x0.z());
  EXPECT_EQ(b.c, l.v0.z());
  EXPECT_EQ(b.to_line_state().x0, l.x0);
  EXPECT_EQ(b.to_line_state().v0, l.v0);
}

TEST(ImageLine, ThroughTwoPoints) {
  const ImageLine l = ImageLine::through(Vec2(-1, 0.5), Vec2(1, 0.5));
  EXPECT_NEAR(l.offset, 0.5, 1e-15);
  EXPECT_NEAR(l.normal.y(), 1.0, 1e-15);
  EXPECT_NEAR(l.distance(Vec2(3, 0.2)), 0.3, 1e-15);
  EXPECT_THROW(ImageLine::through(Vec2(1, 1), Vec2(1, 1)), Error);
}

TEST(Observation, PlausibilityRejectsGarbage) {
  EXPECT_TRUE(is_plausible({0.0, Vec2(0.1, -0.2)}));
  EXPECT_FALSE(is_plausible({0.0, Vec2(NAN, 0.0)}));
  EXPECT_FALSE(is_plausible({0.0, Vec2(11.0, 0.0)}));
}

}  // namespace
}  // namespace ruledvo
