#pragma once

// Per-observation residual kernel shared by the public residual/Jacobian
// functions and the solver's normal-equation assembly.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "ruledvo/estimator.hpp"

namespace ruledvo::detail {

struct PreparedObservation {
  double t = 0.0;
  Vec2 p = Vec2::Zero();
  Vec3 gamma = Vec3::Zero();
};

// Columns: a c d.x d.y e.x e.y | b f.x f.y g.x g.y g.z
using LocalJacobian = Eigen::Matrix<double, 2, 12>;

struct AlphaTerms {
  double A = 0.0;     // a + t b + Gamma.z + t^2/2 g.z
  Vec2 E = Vec2::Zero();  // e + t f + Gamma.xy + t^2/2 g.xy
  Vec2 P = Vec2::Zero();
  Vec2 phi = Vec2::Zero();
  double w = 0.0;  // P^T P
  double alpha = 0.0;
};

AlphaTerms alpha_terms(const LineBlock& line, const SharedMotionParams& motion,
                       const PreparedObservation& obs);

ObservationStatus evaluate_observation(const LineBlock& line,
                                       const SharedMotionParams& motion,
                                       const PreparedObservation& obs,
                                       double penalty, Vec2& residual,
                                       LocalJacobian* jacobian);

std::vector<std::vector<PreparedObservation>> prepare(
    std::span<const std::vector<Observation>> obs_by_line,
    const GammaTable& gamma);

struct CostSummary {
  double total = 0.0;  // sum of squared residuals
  std::size_t observations = 0;
  std::size_t degenerate = 0;
  std::size_t nonpositive_depth = 0;

  double mean() const {
    return observations == 0 ? 0.0 : total / static_cast<double>(observations);
  }
};

class WindowProblem {
 public:
  WindowProblem(std::vector<std::vector<PreparedObservation>> obs, double penalty)
      : obs_(std::move(obs)), penalty_(penalty) {}

  std::size_t num_lines() const { return obs_.size(); }
  std::size_t num_observations() const;

  CostSummary cost(const SurfaceSetParams& params) const;

  // J^T J and J^T r over every observation.
  CostSummary normal_equations(const SurfaceSetParams& params,
                               Eigen::MatrixXd& jtj, Eigen::VectorXd& jtr) const;

  ResidualEvaluation residual_vector(const SurfaceSetParams& params) const;
  Eigen::MatrixXd jacobian(const SurfaceSetParams& params) const;

 private:
  std::vector<std::vector<PreparedObservation>> obs_;
  double penalty_;
};

}  // namespace ruledvo::detail
