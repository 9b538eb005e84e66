#include <gtest/gtest.h>

#include <cmath>

#include "ruledvo/errors.hpp"
#include "ruledvo/estimator.hpp"
#include "test_util.hpp"
#include "test_window.hpp"

namespace ruledvo {
namespace {

using testing::Gen;
using testing::SyntheticWindow;
using testing::make_window;
using testing::perturb;
using testing::two_lines;

double alpha_objective(const AlphaSolve& s, double alpha) {
  return (alpha * s.p_mat - s.phi).squaredNorm();
}

TEST(SurfaceSetParams, FlatLayoutRoundTrips) {
  const SurfaceSetParams p = two_lines();
  const Eigen::VectorXd x = p.flatten();
  ASSERT_EQ(x.size(), 18);
  EXPECT_EQ(x[0], p.lines[0].a);
  EXPECT_EQ(x[1], p.lines[0].c);
  EXPECT_EQ(x[5], p.lines[0].e.y());
  EXPECT_EQ(x[12], p.shared.b);
  EXPECT_EQ(x[17], p.shared.g.z());
  const SurfaceSetParams q = SurfaceSetParams::unflatten(x, 2);
  EXPECT_EQ(q.flatten(), x);
  EXPECT_EQ(p.effective_dof(), 14);
}

TEST(SolveAlpha, ExactDataGivesGeneratingAlpha) {
  const SyntheticWindow w = make_window(two_lines(), 10, 90.0, 1, 1);
  const double t = w.gamma.times[7];
  const Vec2 p = project_ruling_point(w.truth.lines[1].to_line_state(),
                                      w.translation(w.truth, t), 0.5);
  const AlphaSolve s = solve_alpha(w.truth, 1, {t, p}, w.gamma);
  EXPECT_NEAR(s.alpha, 0.5, 1e-9);
}

TEST(SolveAlpha, DegenerateObservationThrows) {
  SurfaceSetParams p;
  p.lines.push_back({2.0, 0.5, Vec2(0.3, 0.2), Vec2::Zero()});
  GammaTable g;
  g.times = {0.0};
  g.values = {Vec3::Zero()};
  g.rates = {Vec3::Zero()};
  try {
    solve_alpha(p, 0, {0.0, Vec2(0.6, 0.4)}, g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDegenerateAlpha);
  }
}

TEST(SolveAlpha, MatchesGridSearch) {
  Gen gen(31);
  const SyntheticWindow w = make_window(two_lines(), 20, 90.0, 1, 2);
  const int kGrid = 100000;
  const double kSpan = 50.0;
  const double step = 2.0 * kSpan / (kGrid - 1);
  int checked = 0;
  while (checked < 100) {
    SurfaceSetParams p = w.truth;
    p.lines[0] = LineBlock::from_line_state(gen.visible_line());
    p.shared.set_velocity(gen.vec3(-0.5, 0.5));
    p.shared.g = gen.vec3(-1, 1);
    const Observation obs{w.gamma.times[gen.integer(0, 19)], gen.vec2()};
    const AlphaSolve s = solve_alpha(p, 0, obs, w.gamma);
    if (std::abs(s.alpha) > kSpan - 1.0) continue;
    double best = 0.0, best_f = std::numeric_limits<double>::infinity();
    for (int i = 0; i < kGrid; ++i) {
      const double a = -kSpan + i * step;
      const double f = alpha_objective(s, a);
      if (f < best_f) {
        best_f = f;
        best = a;
      }
    }
    EXPECT_LE(std::abs(s.alpha - best), step) << checked;
    ++checked;
  }
}

TEST(SolveAlpha, SmallPerturbationNeverImproves) {
  Gen gen(32);
  const SyntheticWindow w = make_window(two_lines(), 20, 90.0, 1, 3);
  for (int i = 0; i < 500; ++i) {
    const Observation obs{w.gamma.times[gen.integer(0, 19)], gen.vec2()};
    const AlphaSolve s = solve_alpha(w.truth, gen.integer(0, 1), obs, w.gamma);
    const double f = alpha_objective(s, s.alpha);
    EXPECT_GE(alpha_objective(s, s.alpha + 1e-3), f);
    EXPECT_GE(alpha_objective(s, s.alpha - 1e-3), f);
  }
}

TEST(Residuals, NoiselessDataIsZero) {
  const SyntheticWindow w = make_window(two_lines(), 30, 90.0, 20, 4);
  const ResidualEvaluation r = residuals(w.truth, w.obs, w.gamma);
  EXPECT_EQ(r.residuals.size(), 2 * 2 * 30 * 20);
  EXPECT_LT(r.residuals.cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_EQ(r.degenerate, 0u);
  EXPECT_EQ(r.nonpositive_depth, 0u);
}

TEST(Residuals, PerpendicularOffsetShowsUpInFull) {
  // Vertical ruling with no z component: the image x axis is perpendicular
  // to it at every alpha.
  SurfaceSetParams p;
  p.lines.push_back(LineBlock::from_line_state({Vec3(0.0, 0.0, 2.0), Vec3(0.0, 1.0, 0.0)}));
  p.shared.set_velocity(Vec3(0.05, 0.02, 0.0));
  SyntheticWindow w = make_window(p, 5, 90.0, 1, 5);
  Observation o = w.obs[0][3];
  o.p.x() += 0.01;
  const std::vector<std::vector<Observation>> one{{o}};
  const ResidualEvaluation r = residuals(p, one, w.gamma);
  EXPECT_NEAR(r.residuals[0], 0.01, 1e-6);
  EXPECT_NEAR(r.residuals[1], 0.0, 1e-6);
}

TEST(Residuals, EmptyInput) {
  const SurfaceSetParams p = two_lines();
  const std::vector<std::vector<Observation>> none(2);
  GammaTable g;
  const ResidualEvaluation r = residuals(p, none, g);
  EXPECT_EQ(r.residuals.size(), 0);
  EXPECT_EQ(r.loss(), 0.0);
  const Eigen::MatrixXd J = loss_jacobian(p, none, g);
  EXPECT_EQ(J.rows(), 0);
  EXPECT_EQ(J.cols(), p.num_parameters());
}

TEST(Residuals, DegenerateObservationGetsPenalty) {
  SurfaceSetParams p;
  p.lines.push_back({2.0, 0.5, Vec2(0.3, 0.2), Vec2::Zero()});
  GammaTable g;
  g.times = {0.0};
  g.values = {Vec3::Zero()};
  g.rates = {Vec3::Zero()};
  const std::vector<std::vector<Observation>> obs{{{0.0, Vec2(0.6, 0.4)}}};
  const ResidualEvaluation r = residuals(p, obs, g, 7.0);
  EXPECT_EQ(r.residuals[0], 7.0);
  EXPECT_EQ(r.residuals[1], 0.0);
  EXPECT_EQ(r.degenerate, 1u);
  EXPECT_EQ(r.status[0], ObservationStatus::kDegenerateAlpha);
}

TEST(Residuals, InvariantUnderOriginShiftAndDirectionFlip) {
  Gen gen(33);
  const SyntheticWindow w = make_window(two_lines(), 20, 90.0, 10, 6);
  for (int i = 0; i < 20; ++i) {
    // Noisy points so the loss is not trivially zero.
    auto obs = w.obs;
    for (auto& line : obs) {
      for (auto& o : line) o.p += gen.vec2(-0.01, 0.01);
    }
    const double base = residuals(w.truth, obs, w.gamma).loss();

    SurfaceSetParams shifted = w.truth;
    const double s = gen.uniform(-2, 2);
    LineState l = shifted.lines[0].to_line_state();
    shifted.lines[0] = LineBlock::from_line_state({l.x0 + s * l.v0, l.v0});
    EXPECT_NEAR(residuals(retract(shifted), obs, w.gamma).loss(), base, 1e-12 * base);

    SurfaceSetParams flipped = w.truth;
    flipped.lines[1].d = -flipped.lines[1].d;
    flipped.lines[1].c = -flipped.lines[1].c;
    EXPECT_NEAR(residuals(flipped, obs, w.gamma).loss(), base, 1e-12 * base);
  }
}

TEST(LossJacobian, MatchesCentralDifferences) {
  Gen gen(34);
  const SyntheticWindow w = make_window(two_lines(), 15, 90.0, 3, 7);
  for (int trial = 0; trial < 20; ++trial) {
    const SurfaceSetParams p = perturb(w.truth, 0.03, 100 + trial);
    auto obs = w.obs;
    for (auto& line : obs) {
      for (auto& o : line) o.p += gen.vec2(-0.005, 0.005);
    }
    const Eigen::MatrixXd J = loss_jacobian(p, obs, w.gamma);
    const Eigen::VectorXd x = p.flatten();
    for (int j = 0; j < x.size(); ++j) {
      const double h = 1e-6 * std::max(1.0, std::abs(x[j]));
      Eigen::VectorXd xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      const Eigen::VectorXd rp = residuals(SurfaceSetParams::unflatten(xp, 2), obs, w.gamma).residuals;
      const Eigen::VectorXd rm = residuals(SurfaceSetParams::unflatten(xm, 2), obs, w.gamma).residuals;
      const Eigen::VectorXd fd = (rp - rm) / (2.0 * h);
      const double scale = std::max(fd.norm(), J.col(j).norm());
      if (scale < 1e-10) continue;
      EXPECT_LE((J.col(j) - fd).norm() / scale, 1e-4) << "trial " << trial << " column " << j;
    }
  }
}

TEST(LossJacobian, GravityColumnsVanishAtTimeZero) {
  const SyntheticWindow w = make_window(two_lines(), 1, 90.0, 10, 8);
  const Eigen::MatrixXd J = loss_jacobian(w.truth, w.obs, w.gamma);
  ASSERT_GT(J.rows(), 0);
  EXPECT_EQ(J.rightCols(3).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Retract, Examples) {
  SurfaceSetParams p = two_lines();
  const SurfaceSetParams same = retract(p);
  EXPECT_LT((same.flatten() - p.flatten()).cwiseAbs().maxCoeff(), 1e-15);

  SurfaceSetParams q;
  q.lines.push_back({1.0, 2.0, Vec2::Zero(), Vec2(1.0, 1.0)});
  q.shared.b = 0.7;
  const SurfaceSetParams r = retract(q);
  EXPECT_EQ(r.lines[0].c, 1.0);
  EXPECT_EQ(r.lines[0].d, Vec2::Zero());
  EXPECT_EQ(r.lines[0].e, Vec2(1.0, 1.0));
  EXPECT_EQ(r.lines[0].a, 0.0);
  EXPECT_EQ(r.shared.b, 0.7);
}

TEST(Retract, RandomParamsSatisfyConstraintsAndKeepTheLine) {
  Gen gen(35);
  for (int i = 0; i < 300; ++i) {
    SurfaceSetParams p;
    p.lines.push_back({gen.uniform(-3, 3), gen.uniform(-2, 2), gen.vec2(-2, 2), gen.vec2(-3, 3)});
    p.shared.g = gen.vec3();
    if (p.lines[0].to_line_state().v0.norm() < 1e-3) continue;
    const SurfaceSetParams r = retract(p);
    const LineState in = p.lines[0].to_line_state();
    const LineState out = r.lines[0].to_line_state();
    EXPECT_NEAR(out.v0.norm(), 1.0, 1e-12);
    EXPECT_NEAR(out.x0.dot(out.v0), 0.0, 1e-12);
    EXPECT_LT(point_to_line_distance(in.x0, out), 1e-9);
    EXPECT_LT(point_to_line_distance(in.x0 + in.v0, out), 1e-9);
    EXPECT_EQ(r.shared.g, p.shared.g);
  }
}

TEST(Retract, ZeroDirectionThrows) {
  SurfaceSetParams p;
  p.lines.push_back({1.0, 0.0, Vec2::Zero(), Vec2::Zero()});
  EXPECT_THROW(retract(p), Error);
}

TEST(SolveWindow, TruthIsAFixedPoint) {
  const SyntheticWindow w = make_window(two_lines(), 60, 90.0, 20, 9);
  const WindowSolution s = solve_window(w.truth, w.obs, w.gamma, {});
  EXPECT_LE(s.diagnostics.iterations, 3);
  EXPECT_LT(s.final_loss, 1e-12);
  EXPECT_LT((s.params.flatten() - w.truth.flatten()).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_FALSE(s.diagnostics.infeasible);
}

TEST(SolveWindow, RecoversFromFivePercentPerturbation) {
  const SyntheticWindow w = make_window(two_lines(), 141, 90.0, 20, 10);
  const WindowSolution s = solve_window(perturb(w.truth, 0.05, 11), w.obs, w.gamma, {});
  EXPECT_LT(s.final_loss, 1e-10);
  EXPECT_LE(s.diagnostics.iterations, 200);
  double worst = 0.0;
  for (double t : w.gamma.times) {
    worst = std::max(worst, (w.translation(s.params, t) - w.translation(w.truth, t)).norm());
  }
  EXPECT_LT(worst, 1e-4);
  for (std::size_t l = 0; l < 2; ++l) {
    const LineState est = s.params.lines[l].to_line_state();
    const LineState tru = w.truth.lines[l].to_line_state();
    EXPECT_LT((est.x0 - tru.x0).norm(), 1e-4);
    EXPECT_LT(std::acos(std::min(1.0, std::abs(est.v0.dot(tru.v0)))), 1e-4);
  }
  // Constraints hold after every accepted step.
  EXPECT_LE(s.diagnostics.max_unit_norm_violation, 1e-6);
  EXPECT_LE(s.diagnostics.max_orthogonality_violation, 1e-6);
}

TEST(SolveWindow, SingleLineIsOnlyBoundedAcrossTheRuling) {
  SurfaceSetParams truth = two_lines();
  truth.lines.resize(1);
  const SyntheticWindow w = make_window(truth, 141, 90.0, 30, 12);
  const WindowSolution s = solve_window(perturb(truth, 0.05, 13), w.obs, w.gamma, {});
  EXPECT_TRUE(s.diagnostics.unbounded_direction);
  const LineState est = s.params.lines[0].to_line_state();
  const LineState tru = truth.lines[0].to_line_state();
  const Vec3 err = est.x0 - tru.x0;
  EXPECT_LT((err - err.dot(tru.v0) * tru.v0).norm(), 1e-4);
}

TEST(SolveWindow, BestLossNeverIncreasesAcrossRestarts) {
  const SyntheticWindow w = make_window(two_lines(), 30, 90.0, 10, 14);
  SolverConfig config;
  config.restart_threshold = 0.0;  // force every restart
  config.max_restarts = 4;
  config.max_iterations = 10;
  const WindowSolution s = solve_window(perturb(w.truth, 0.3, 15), w.obs, w.gamma, config);
  const auto& h = s.diagnostics.best_loss_history;
  ASSERT_EQ(h.size(), 5u);
  for (std::size_t i = 1; i < h.size(); ++i) EXPECT_LE(h[i], h[i - 1]);
  EXPECT_EQ(s.final_loss, h.back());
}

TEST(SolveWindow, IsDeterministicInTheSeed) {
  const SyntheticWindow w = make_window(two_lines(), 30, 90.0, 10, 16);
  SolverConfig config;
  config.restart_threshold = 0.0;
  config.max_restarts = 2;
  config.max_iterations = 5;
  config.seed = 42;
  const SurfaceSetParams init = perturb(w.truth, 0.2, 17);
  const WindowSolution a = solve_window(init, w.obs, w.gamma, config);
  const WindowSolution b = solve_window(init, w.obs, w.gamma, config);
  EXPECT_EQ(a.params.flatten(), b.params.flatten());
}

TEST(SolveWindow, LineWithoutObservationsThrows) {
  const SyntheticWindow w = make_window(two_lines(), 5, 90.0, 5, 18);
  auto obs = w.obs;
  obs[1].clear();
  try {
    solve_window(w.truth, obs, w.gamma, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNoObservations);
  }
}

TEST(SolveWindow, DepthViolationsAreReported) {
  const SyntheticWindow w = make_window(two_lines(), 10, 90.0, 10, 19);
  SurfaceSetParams behind = w.truth;
  for (auto& l : behind.lines) l.a = -l.a;
  SolverConfig config;
  config.max_iterations = 0;
  config.max_restarts = 0;
  const WindowSolution s = solve_window(behind, w.obs, w.gamma, config);
  EXPECT_GT(s.diagnostics.depth_violation_fraction, 0.01);
  EXPECT_TRUE(s.diagnostics.infeasible);
}

}  // namespace
}  // namespace ruledvo
