#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ruledvo/geometry.hpp"
#include "ruledvo/imu.hpp"

namespace ruledvo {

// Parameters of every ruled surface of a window. The flat layout used by
// the solver is [a c d.x d.y e.x e.y] per line followed by
// [b f.x f.y g.x g.y g.z].
struct SurfaceSetParams {
  static constexpr int kLineBlockSize = 6;
  static constexpr int kSharedBlockSize = 6;

  std::vector<LineBlock> lines;
  SharedMotionParams shared;

  std::size_t num_lines() const { return lines.size(); }
  int num_parameters() const {
    return kLineBlockSize * static_cast<int>(lines.size()) + kSharedBlockSize;
  }
  // Dimension of the solution space once the two per-line gauge freedoms
  // are removed.
  int effective_dof() const {
    return 4 * static_cast<int>(lines.size()) + kSharedBlockSize;
  }
  // A single line leaves the pose unbounded along its ruling.
  bool unbounded_direction() const { return lines.size() == 1; }

  Eigen::VectorXd flatten() const;
  static SurfaceSetParams unflatten(const Eigen::VectorXd& x, std::size_t num_lines);

  RulingParams ruling(std::size_t line) const { return {lines.at(line), shared}; }
};

// Closed-form solution of the inner problem for one observation:
//   alpha = (P^T Phi) / (P^T P).
struct AlphaSolve {
  double alpha = 0.0;
  Vec2 p_mat = Vec2::Zero();
  Vec2 phi = Vec2::Zero();
  double conditioning = 0.0;
};

// Below this P^T P an observation does not constrain alpha.
inline constexpr double kMinAlphaConditioning = 1e-12;

AlphaSolve solve_alpha(const SurfaceSetParams& params, std::size_t line_index,
                       const Observation& obs, const GammaTable& gamma);

enum class ObservationStatus : std::uint8_t {
  kOk = 0,
  kDegenerateAlpha,
  kNonPositiveDepth,
};

struct ResidualEvaluation {
  Eigen::VectorXd residuals;  // two entries per observation, line-major
  std::vector<ObservationStatus> status;
  std::size_t degenerate = 0;
  std::size_t nonpositive_depth = 0;

  double loss() const { return residuals.squaredNorm(); }
};

inline constexpr double kDefaultPenaltyResidual = 10.0;

// Reprojection residuals p_i - p_hat(t_i, alpha_i) with alpha_i from
// solve_alpha. Degenerate observations get the constant residual
// (penalty, 0) and are flagged. Observation times are relative to the
// gamma table origin.
ResidualEvaluation residuals(const SurfaceSetParams& params,
                             std::span<const std::vector<Observation>> obs_by_line,
                             const GammaTable& gamma,
                             double penalty = kDefaultPenaltyResidual);

// Total derivative of the residual vector with respect to the flat
// parameter vector, alpha included through its closed form.
Eigen::MatrixXd loss_jacobian(const SurfaceSetParams& params,
                              std::span<const std::vector<Observation>> obs_by_line,
                              const GammaTable& gamma);

// Normalizes each ruling direction, moves each directrix to the foot of
// the perpendicular and applies the canonical sign. Shared parameters are
// left untouched. Throws ZeroDirection.
SurfaceSetParams retract(const SurfaceSetParams& params);

struct SolverConfig {
  int max_iterations = 200;
  double gradient_tolerance = 1e-8;
  double step_tolerance = 1e-10;
  // Relative decrease of the loss below which an accepted step ends the run.
  double function_tolerance = 1e-12;
  double initial_damping = 1e-4;
  double restart_threshold = 0.01;  // mean squared residual per observation
  int max_restarts = 10;
  double sigma_line = 0.05;      // perturbation on a, c, d, e
  double sigma_velocity = 0.02;  // perturbation on b, f
  double sigma_gravity = 0.1;    // perturbation on g
  double penalty_residual = kDefaultPenaltyResidual;
  double max_depth_violation_fraction = 0.01;
  // Candidates with a longer g are projected back onto this sphere.
  double max_gravity_norm = 20.0;
  // Weight of a quadratic pull towards the starting point, on the flat
  // parameter vector. Zero disables it. The pipeline sets it per solve.
  double anchor_weight = 0.0;
  std::uint64_t seed = 0;
};

struct SolveDiagnostics {
  int iterations = 0;  // summed over all attempts
  int attempts = 0;
  int restarts = 0;
  bool converged = false;
  std::string termination;
  std::vector<double> best_loss_history;  // best mean loss after each attempt
  std::size_t observations = 0;
  double total_loss = 0.0;
  double mean_loss = 0.0;
  std::size_t degenerate = 0;
  std::size_t nonpositive_depth = 0;
  double depth_violation_fraction = 0.0;
  bool infeasible = false;
  bool unbounded_direction = false;
  // Worst constraint residuals seen right after accepted steps.
  double max_unit_norm_violation = 0.0;
  double max_orthogonality_violation = 0.0;
  int accepted_steps = 0;
};

struct WindowSolution {
  SurfaceSetParams params;
  double final_loss = 0.0;  // mean squared residual per observation
  SolveDiagnostics diagnostics;
};

// Damped Gauss-Newton (Levenberg-Marquardt) on the reprojection loss with
// retraction after every step, restarted from perturbed copies of the best
// solution while the mean loss stays above config.restart_threshold.
// Throws NoObservations if any line has no observations.
WindowSolution solve_window(const SurfaceSetParams& init,
                            std::span<const std::vector<Observation>> obs_by_line,
                            const GammaTable& gamma, const SolverConfig& config);

}  // namespace ruledvo
