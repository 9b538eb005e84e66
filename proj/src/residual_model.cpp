#include "residual_model.hpp"

#include "ruledvo/errors.hpp"

namespace ruledvo::detail {

AlphaTerms alpha_terms(const LineBlock& line, const SharedMotionParams& motion,
                       const PreparedObservation& obs) {
  const double t = obs.t;
  const double half_t2 = 0.5 * t * t;
  AlphaTerms k;
  k.A = line.a + t * motion.b + obs.gamma.z() + half_t2 * motion.g.z();
  k.E = line.e + t * motion.f + obs.gamma.head<2>() + half_t2 * motion.g.head<2>();
  k.P = obs.p * line.c - line.d;
  k.phi = k.E - obs.p * k.A;
  k.w = k.P.squaredNorm();
  k.alpha = k.w > 0.0 ? k.P.dot(k.phi) / k.w : 0.0;
  return k;
}

ObservationStatus evaluate_observation(const LineBlock& line,
                                       const SharedMotionParams& motion,
                                       const PreparedObservation& obs,
                                       double penalty, Vec2& residual,
                                       LocalJacobian* jacobian) {
  const AlphaTerms k = alpha_terms(line, motion, obs);
  if (!(k.w > kMinAlphaConditioning)) {
    residual = Vec2(penalty, 0.0);
    if (jacobian) jacobian->setZero();
    return ObservationStatus::kDegenerateAlpha;
  }
  const double alpha = k.alpha;
  const double D = k.A + alpha * line.c;
  if (!(D > kMinDepth)) {
    residual = Vec2(penalty, 0.0);
    if (jacobian) jacobian->setZero();
    return ObservationStatus::kNonPositiveDepth;
  }
  const Vec2 N = alpha * line.d + k.E;
  const Vec2 p_hat = N / D;
  residual = obs.p - p_hat;
  if (!jacobian) return ObservationStatus::kOk;

  // Directional derivatives of the intermediate quantities for each of the
  // twelve local parameters, then chained through alpha, N and D.
  const double t = obs.t;
  const double half_t2 = 0.5 * t * t;
  const Vec2& p = obs.p;
  const double inv_w = 1.0 / k.w;
  const double inv_D = 1.0 / D;

  auto column = [&](int col, double dA, const Vec2& dE, const Vec2& dP,
                    double dc, const Vec2& dd) {
    const Vec2 dphi = dE - p * dA;
    const double du = dP.dot(k.phi) + k.P.dot(dphi);
    const double dw = 2.0 * k.P.dot(dP);
    const double dalpha = (du - alpha * dw) * inv_w;
    const Vec2 dN = dalpha * line.d + alpha * dd + dE;
    const double dD = dA + dalpha * line.c + alpha * dc;
    jacobian->col(col) = -(dN - p_hat * dD) * inv_D;
  };

  const Vec2 zero = Vec2::Zero();
  const Vec2 ux = Vec2::UnitX();
  const Vec2 uy = Vec2::UnitY();
  column(0, 1.0, zero, zero, 0.0, zero);               // a
  column(1, 0.0, zero, p, 1.0, zero);                  // c
  column(2, 0.0, zero, -ux, 0.0, ux);                  // d.x
  column(3, 0.0, zero, -uy, 0.0, uy);                  // d.y
  column(4, 0.0, ux, zero, 0.0, zero);                 // e.x
  column(5, 0.0, uy, zero, 0.0, zero);                 // e.y
  column(6, t, zero, zero, 0.0, zero);                 // b
  column(7, 0.0, t * ux, zero, 0.0, zero);             // f.x
  column(8, 0.0, t * uy, zero, 0.0, zero);             // f.y
  column(9, 0.0, half_t2 * ux, zero, 0.0, zero);       // g.x
  column(10, 0.0, half_t2 * uy, zero, 0.0, zero);      // g.y
  column(11, half_t2, zero, zero, 0.0, zero);          // g.z
  return ObservationStatus::kOk;
}

std::vector<std::vector<PreparedObservation>> prepare(
    std::span<const std::vector<Observation>> obs_by_line,
    const GammaTable& gamma) {
  std::vector<std::vector<PreparedObservation>> out(obs_by_line.size());
  for (std::size_t l = 0; l < obs_by_line.size(); ++l) {
    out[l].reserve(obs_by_line[l].size());
    for (const auto& o : obs_by_line[l]) {
      out[l].push_back({o.t, o.p, gamma.value_at(o.t)});
    }
  }
  return out;
}

std::size_t WindowProblem::num_observations() const {
  std::size_t n = 0;
  for (const auto& line : obs_) n += line.size();
  return n;
}

CostSummary WindowProblem::cost(const SurfaceSetParams& params) const {
  CostSummary summary;
  Vec2 r;
  for (std::size_t l = 0; l < obs_.size(); ++l) {
    const LineBlock& line = params.lines[l];
    for (const auto& o : obs_[l]) {
      const auto status =
          evaluate_observation(line, params.shared, o, penalty_, r, nullptr);
      summary.total += r.squaredNorm();
      ++summary.observations;
      if (status == ObservationStatus::kDegenerateAlpha) ++summary.degenerate;
      if (status == ObservationStatus::kNonPositiveDepth) {
        ++summary.nonpositive_depth;
      }
    }
  }
  return summary;
}

CostSummary WindowProblem::normal_equations(const SurfaceSetParams& params,
                                            Eigen::MatrixXd& jtj,
                                            Eigen::VectorXd& jtr) const {
  const int n = params.num_parameters();
  const int shared0 = n - SurfaceSetParams::kSharedBlockSize;
  jtj.setZero(n, n);
  jtr.setZero(n);
  CostSummary summary;
  Vec2 r;
  LocalJacobian J;
  // Rows of every usable observation of a line, stacked so that the local
  // normal equations come from one matrix product.
  Eigen::Matrix<double, Eigen::Dynamic, 12> rows;
  Eigen::VectorXd res;
  Eigen::Matrix<double, 12, 12> local_h;
  Eigen::Matrix<double, 12, 1> local_g;
  for (std::size_t l = 0; l < obs_.size(); ++l) {
    const LineBlock& line = params.lines[l];
    rows.resize(2 * static_cast<Eigen::Index>(obs_[l].size()), 12);
    res.resize(rows.rows());
    Eigen::Index used = 0;
    for (const auto& o : obs_[l]) {
      const auto status =
          evaluate_observation(line, params.shared, o, penalty_, r, &J);
      summary.total += r.squaredNorm();
      ++summary.observations;
      if (status == ObservationStatus::kDegenerateAlpha) ++summary.degenerate;
      if (status == ObservationStatus::kNonPositiveDepth) {
        ++summary.nonpositive_depth;
      }
      if (status != ObservationStatus::kOk) continue;
      rows.middleRows<2>(used) = J;
      res.segment<2>(used) = r;
      used += 2;
    }
    local_h.noalias() = rows.topRows(used).transpose() * rows.topRows(used);
    local_g.noalias() = rows.topRows(used).transpose() * res.head(used);
    const int line0 = SurfaceSetParams::kLineBlockSize * static_cast<int>(l);
    jtj.block<6, 6>(line0, line0) += local_h.block<6, 6>(0, 0);
    jtj.block<6, 6>(line0, shared0) += local_h.block<6, 6>(0, 6);
    jtj.block<6, 6>(shared0, line0) += local_h.block<6, 6>(6, 0);
    jtj.block<6, 6>(shared0, shared0) += local_h.block<6, 6>(6, 6);
    jtr.segment<6>(line0) += local_g.head<6>();
    jtr.segment<6>(shared0) += local_g.tail<6>();
  }
  return summary;
}

ResidualEvaluation WindowProblem::residual_vector(
    const SurfaceSetParams& params) const {
  ResidualEvaluation eval;
  eval.residuals.resize(2 * static_cast<Eigen::Index>(num_observations()));
  eval.status.reserve(num_observations());
  Eigen::Index row = 0;
  Vec2 r;
  for (std::size_t l = 0; l < obs_.size(); ++l) {
    for (const auto& o : obs_[l]) {
      const auto status = evaluate_observation(params.lines[l], params.shared,
                                               o, penalty_, r, nullptr);
      eval.residuals.segment<2>(row) = r;
      row += 2;
      eval.status.push_back(status);
      if (status == ObservationStatus::kDegenerateAlpha) ++eval.degenerate;
      if (status == ObservationStatus::kNonPositiveDepth) {
        ++eval.nonpositive_depth;
      }
    }
  }
  return eval;
}

Eigen::MatrixXd WindowProblem::jacobian(const SurfaceSetParams& params) const {
  const int n = params.num_parameters();
  const int shared0 = n - SurfaceSetParams::kSharedBlockSize;
  Eigen::MatrixXd jac =
      Eigen::MatrixXd::Zero(2 * static_cast<Eigen::Index>(num_observations()), n);
  Eigen::Index row = 0;
  Vec2 r;
  LocalJacobian J;
  for (std::size_t l = 0; l < obs_.size(); ++l) {
    const int line0 = SurfaceSetParams::kLineBlockSize * static_cast<int>(l);
    for (const auto& o : obs_[l]) {
      evaluate_observation(params.lines[l], params.shared, o, penalty_, r, &J);
      jac.block<2, 6>(row, line0) = J.leftCols<6>();
      jac.block<2, 6>(row, shared0) = J.rightCols<6>();
      row += 2;
    }
  }
  return jac;
}

}  // namespace ruledvo::detail
