#include "ruledvo/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include <Eigen/Cholesky>

#include "residual_model.hpp"
#include "ruledvo/errors.hpp"

namespace ruledvo {

Eigen::VectorXd SurfaceSetParams::flatten() const {
  Eigen::VectorXd x(num_parameters());
  int i = 0;
  for (const auto& line : lines) {
    x.segment<6>(i) << line.a, line.c, line.d.x(), line.d.y(), line.e.x(),
        line.e.y();
    i += kLineBlockSize;
  }
  x.segment<6>(i) << shared.b, shared.f.x(), shared.f.y(), shared.g.x(),
      shared.g.y(), shared.g.z();
  return x;
}

SurfaceSetParams SurfaceSetParams::unflatten(const Eigen::VectorXd& x,
                                             std::size_t num_lines) {
  SurfaceSetParams params;
  if (x.size() != kLineBlockSize * static_cast<Eigen::Index>(num_lines) +
                      kSharedBlockSize) {
    throw Error(ErrorCode::kInvalidArgument,
                "flat parameter vector has the wrong size");
  }
  params.lines.resize(num_lines);
  int i = 0;
  for (auto& line : params.lines) {
    line.a = x[i];
    line.c = x[i + 1];
    line.d = Vec2(x[i + 2], x[i + 3]);
    line.e = Vec2(x[i + 4], x[i + 5]);
    i += kLineBlockSize;
  }
  params.shared.b = x[i];
  params.shared.f = Vec2(x[i + 1], x[i + 2]);
  params.shared.g = Vec3(x[i + 3], x[i + 4], x[i + 5]);
  return params;
}

AlphaSolve solve_alpha(const SurfaceSetParams& params, std::size_t line_index,
                       const Observation& obs, const GammaTable& gamma) {
  const detail::PreparedObservation prepared{obs.t, obs.p,
                                             gamma.value_at(obs.t)};
  const auto k =
      detail::alpha_terms(params.lines.at(line_index), params.shared, prepared);
  if (!(k.w > kMinAlphaConditioning)) {
    throw Error(ErrorCode::kDegenerateAlpha,
                "observation is parallel to the projected ruling direction");
  }
  return {k.alpha, k.P, k.phi, k.w};
}

ResidualEvaluation residuals(const SurfaceSetParams& params,
                             std::span<const std::vector<Observation>> obs_by_line,
                             const GammaTable& gamma, double penalty) {
  if (obs_by_line.size() != params.num_lines()) {
    throw Error(ErrorCode::kInvalidArgument,
                "one observation list per line is required");
  }
  detail::WindowProblem problem(detail::prepare(obs_by_line, gamma), penalty);
  return problem.residual_vector(params);
}

Eigen::MatrixXd loss_jacobian(const SurfaceSetParams& params,
                              std::span<const std::vector<Observation>> obs_by_line,
                              const GammaTable& gamma) {
  if (obs_by_line.size() != params.num_lines()) {
    throw Error(ErrorCode::kInvalidArgument,
                "one observation list per line is required");
  }
  detail::WindowProblem problem(detail::prepare(obs_by_line, gamma),
                                kDefaultPenaltyResidual);
  return problem.jacobian(params);
}

SurfaceSetParams retract(const SurfaceSetParams& params) {
  SurfaceSetParams out = params;
  for (auto& line : out.lines) {
    const LineState state = line.to_line_state();
    line = LineBlock::from_line_state(canonicalize_line(state.x0, state.v0));
  }
  return out;
}

namespace {

struct ConstraintViolation {
  double unit_norm = 0.0;
  double orthogonality = 0.0;
};

ConstraintViolation constraint_violation(const SurfaceSetParams& params) {
  ConstraintViolation v;
  for (const auto& line : params.lines) {
    const LineState s = line.to_line_state();
    v.unit_norm = std::max(v.unit_norm, std::abs(s.v0.norm() - 1.0));
    v.orthogonality = std::max(v.orthogonality, std::abs(s.x0.dot(s.v0)));
  }
  return v;
}

struct Attempt {
  SurfaceSetParams params;
  detail::CostSummary cost;
  int iterations = 0;
  int accepted = 0;
  bool converged = false;
  std::string termination;
  ConstraintViolation worst;
};

void clamp_gravity(SurfaceSetParams& params, double max_norm) {
  const double n = params.shared.g.norm();
  if (max_norm > 0.0 && n > max_norm) params.shared.g *= max_norm / n;
}

Attempt levenberg_marquardt(const detail::WindowProblem& problem,
                            const SurfaceSetParams& start,
                            const SolverConfig& config) {
  Attempt run;
  run.params = retract(start);
  const std::size_t num_lines = run.params.num_lines();
  const Eigen::VectorXd anchor = run.params.flatten();
  const double mu = config.anchor_weight;
  auto anchor_cost = [&](const Eigen::VectorXd& x) {
    return mu > 0.0 ? mu * (x - anchor).squaredNorm() : 0.0;
  };

  Eigen::MatrixXd jtj;
  Eigen::VectorXd jtr;
  auto linearize = [&]() {
    run.cost = problem.normal_equations(run.params, jtj, jtr);
    if (mu > 0.0) {
      jtj.diagonal().array() += mu;
      jtr += mu * (run.params.flatten() - anchor);
    }
  };
  linearize();
  double objective = run.cost.total + anchor_cost(run.params.flatten());
  double lambda = config.initial_damping;
  double nu = 2.0;
  run.termination = "max_iterations";

  for (; run.iterations < config.max_iterations; ++run.iterations) {
    if (jtr.lpNorm<Eigen::Infinity>() < config.gradient_tolerance) {
      run.converged = true;
      run.termination = "gradient";
      break;
    }
    Eigen::VectorXd diag = jtj.diagonal();
    const double diag_floor = std::max(1e-12, 1e-9 * diag.maxCoeff());
    diag = diag.cwiseMax(diag_floor);
    Eigen::MatrixXd damped = jtj;
    damped.diagonal() += lambda * diag;
    const Eigen::VectorXd step = damped.ldlt().solve(-jtr);
    if (!step.allFinite()) {
      lambda *= nu;
      nu *= 2.0;
      continue;
    }
    const Eigen::VectorXd x = run.params.flatten();
    if (step.norm() < config.step_tolerance * (x.norm() + config.step_tolerance)) {
      run.converged = true;
      run.termination = "step";
      break;
    }
    SurfaceSetParams candidate;
    try {
      candidate = retract(SurfaceSetParams::unflatten(x + step, num_lines));
      clamp_gravity(candidate, config.max_gravity_norm);
    } catch (const Error&) {
      lambda *= nu;
      nu *= 2.0;
      continue;
    }
    const detail::CostSummary candidate_cost = problem.cost(candidate);
    const double candidate_objective =
        candidate_cost.total + anchor_cost(candidate.flatten());
    const double predicted = -(jtr.dot(step) + 0.5 * step.dot(jtj * step));
    const double actual = 0.5 * (objective - candidate_objective);
    if (actual > 0.0 && std::isfinite(candidate_objective)) {
      const double rho = predicted > 0.0 ? actual / predicted : 0.0;
      lambda *= std::max(1.0 / 3.0, 1.0 - std::pow(2.0 * rho - 1.0, 3));
      lambda = std::max(lambda, 1e-15);
      nu = 2.0;
      run.params = std::move(candidate);
      ++run.accepted;
      const ConstraintViolation v = constraint_violation(run.params);
      run.worst.unit_norm = std::max(run.worst.unit_norm, v.unit_norm);
      run.worst.orthogonality = std::max(run.worst.orthogonality, v.orthogonality);
      const double previous = objective;
      linearize();
      objective = run.cost.total + anchor_cost(run.params.flatten());
      if (actual <= config.function_tolerance * 0.5 * previous) {
        ++run.iterations;
        run.converged = true;
        run.termination = "function";
        break;
      }
    } else {
      lambda *= nu;
      nu *= 2.0;
      if (lambda > 1e20) {
        ++run.iterations;
        run.converged = true;
        run.termination = "damping";
        break;
      }
    }
  }
  return run;
}

SurfaceSetParams perturb(const SurfaceSetParams& params, const SolverConfig& config,
                         std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  SurfaceSetParams out = params;
  for (auto& line : out.lines) {
    line.a += config.sigma_line * normal(rng);
    line.c += config.sigma_line * normal(rng);
    line.d.x() += config.sigma_line * normal(rng);
    line.d.y() += config.sigma_line * normal(rng);
    line.e.x() += config.sigma_line * normal(rng);
    line.e.y() += config.sigma_line * normal(rng);
  }
  out.shared.b += config.sigma_velocity * normal(rng);
  out.shared.f.x() += config.sigma_velocity * normal(rng);
  out.shared.f.y() += config.sigma_velocity * normal(rng);
  for (int i = 0; i < 3; ++i) out.shared.g[i] += config.sigma_gravity * normal(rng);
  return out;
}

bool needs_restart(const detail::CostSummary& cost, const SolverConfig& config) {
  const double violation =
      cost.observations == 0
          ? 0.0
          : static_cast<double>(cost.nonpositive_depth) /
                static_cast<double>(cost.observations);
  return cost.mean() > config.restart_threshold ||
         violation > config.max_depth_violation_fraction;
}

}  // namespace

WindowSolution solve_window(const SurfaceSetParams& init,
                            std::span<const std::vector<Observation>> obs_by_line,
                            const GammaTable& gamma, const SolverConfig& config) {
  if (init.lines.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "solve_window needs at least one line");
  }
  if (obs_by_line.size() != init.num_lines()) {
    throw Error(ErrorCode::kInvalidArgument,
                "one observation list per line is required");
  }
  for (std::size_t l = 0; l < obs_by_line.size(); ++l) {
    if (obs_by_line[l].empty()) {
      throw Error(ErrorCode::kNoObservations,
                  "line " + std::to_string(l) + " has no observations");
    }
  }

  const detail::WindowProblem problem(detail::prepare(obs_by_line, gamma),
                                      config.penalty_residual);
  std::mt19937_64 rng(config.seed);

  SolveDiagnostics diag;
  diag.unbounded_direction = init.unbounded_direction();

  auto absorb = [&diag](const Attempt& a) {
    diag.iterations += a.iterations;
    diag.accepted_steps += a.accepted;
    diag.max_unit_norm_violation =
        std::max(diag.max_unit_norm_violation, a.worst.unit_norm);
    diag.max_orthogonality_violation =
        std::max(diag.max_orthogonality_violation, a.worst.orthogonality);
    ++diag.attempts;
  };

  Attempt best = levenberg_marquardt(problem, init, config);
  absorb(best);
  diag.best_loss_history.push_back(best.cost.mean());
  while (needs_restart(best.cost, config) && diag.restarts < config.max_restarts) {
    ++diag.restarts;
    SurfaceSetParams start;
    try {
      start = retract(perturb(best.params, config, rng));
    } catch (const Error&) {
      diag.best_loss_history.push_back(best.cost.mean());
      continue;
    }
    Attempt candidate = levenberg_marquardt(problem, start, config);
    absorb(candidate);
    if (candidate.cost.total < best.cost.total) best = std::move(candidate);
    diag.best_loss_history.push_back(best.cost.mean());
  }

  diag.converged = best.converged;
  diag.termination = best.termination;
  diag.observations = best.cost.observations;
  diag.total_loss = best.cost.total;
  diag.mean_loss = best.cost.mean();
  diag.degenerate = best.cost.degenerate;
  diag.nonpositive_depth = best.cost.nonpositive_depth;
  diag.depth_violation_fraction =
      diag.observations == 0 ? 0.0
                             : static_cast<double>(diag.nonpositive_depth) /
                                   static_cast<double>(diag.observations);
  diag.infeasible = needs_restart(best.cost, config);

  WindowSolution solution;
  solution.params = std::move(best.params);
  solution.final_loss = diag.mean_loss;
  solution.diagnostics = std::move(diag);
  return solution;
}

}  // namespace ruledvo
