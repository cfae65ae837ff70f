#pragma once

// Fine-tuning by gradient flow dw/dtau = -grad L(w), L(w) = 1/2 ||Z w - Y||^2,
// Z = [I_p (x) Phi]^T. In the left singular basis each coefficient relaxes
// independently towards its interpolation target:
//   c_i(tau) = q_i (1 - e^{-sigma_i^2 tau}) + c_i(0) e^{-sigma_i^2 tau},  i < np,
// and coefficients i >= np never move.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "distill_lab/distill.hpp"
#include "distill_lab/error.hpp"
#include "distill_lab/spectral.hpp"

namespace distill_lab {

struct FlowConfig {
  double horizon = 5.0;      // T
  double euler_step = 1e-3;  // oracle step size (absolute)

  void validate() const {
    require(horizon > 0.0 && std::isfinite(horizon), ErrorCode::DomainError, "fine-tuning horizon must be finite and positive");
    require(euler_step > 0.0 && std::isfinite(euler_step), ErrorCode::DomainError, "euler step must be positive");
  }
};

struct FineTuneTrajectory {
  Vector q;   // target coefficients, zero beyond np
  Vector c0;  // c_i^{(t,0)}, i < dp
  Vector cT;  // c_i^{(t,T)}
  Vector w_final;
};

/// 1/2 ||Z w - Y||^2.
inline double training_loss(const SpectralDecomposition& spec, const Vector& w, const Vector& y) {
  return 0.5 * (spec.outputs(w) - y).squaredNorm();
}

/// Coefficients of the minimum-norm interpolant v with Z v = Y.
inline Vector min_norm_targets(const SpectralDecomposition& spec, const Vector& y) {
  require(y.size() == spec.np(), ErrorCode::DimensionMismatch, "labels must have length np");
  require(spec.rank() == spec.np(), ErrorCode::RankDeficient, "lifted design must have rank np");
  const double cutoff = kRankTolerance * spec.sigma(0);
  const Vector yc = spec.right_coefficients(y);
  Vector q = Vector::Zero(spec.dp());
  for (Index i = 0; i < spec.np(); ++i) {
    const double s = spec.sigma(i);
    require(s > cutoff, ErrorCode::RankDeficient, "zero singular value among the first np");
    q(i) = yc(i) / s;
  }
  return q;
}

inline double flow_coefficient(double q, double c0, double sigma, double tau) {
  const double decay = std::exp(-sigma * sigma * tau);
  return q * (1.0 - decay) + c0 * decay;
}

inline FineTuneTrajectory finetune_closed_form(const SpectralDecomposition& spec, const DistillState& state,
                                               const Vector& y, const FlowConfig& config) {
  config.validate();
  require(state.w.size() == spec.dp(), ErrorCode::DimensionMismatch, "distill state does not match decomposition");
  FineTuneTrajectory traj;
  traj.q = min_norm_targets(spec, y);
  traj.c0 = spec.left_coefficients(state.w);
  traj.cT = traj.c0;
  for (Index i = 0; i < spec.np(); ++i)
    traj.cT(i) = flow_coefficient(traj.q(i), traj.c0(i), spec.sigma(i), config.horizon);
  traj.w_final = spec.from_left_coefficients(traj.cT);
  return traj;
}

struct EulerResult {
  Vector w;
  long steps = 0;
  bool loss_monotone = true;
  double max_loss_increase = 0.0;  // largest single-step increase seen (0 if none)
};

/// Forward-Euler integration of the flow on the raw design matrix; shares no
/// code with the spectral factorisation.
inline EulerResult euler_oracle(const Matrix& phi, Index p, const Vector& y, const Vector& w_start,
                                const FlowConfig& config) {
  config.validate();
  const Index d = phi.rows();
  const Index n = phi.cols();
  require(y.size() == n * p, ErrorCode::DimensionMismatch, "labels must have length np");
  require(w_start.size() == d * p, ErrorCode::DimensionMismatch, "start weight must have length dp");

  const Eigen::SelfAdjointEigenSolver<Matrix> eig(phi.transpose() * phi, Eigen::EigenvaluesOnly);
  const double sigma_max_sq = eig.eigenvalues().maxCoeff();
  require(config.euler_step * sigma_max_sq <= 1.0, ErrorCode::UnstableStep,
          "euler step " + std::to_string(config.euler_step) + " exceeds 1/sigma_1^2 = " +
              std::to_string(1.0 / sigma_max_sq));

  EulerResult out;
  Matrix w = Eigen::Map<const Matrix>(w_start.data(), d, p);
  const Eigen::Map<const Matrix> target(y.data(), n, p);
  Matrix residual = phi.transpose() * w - target;
  double loss = 0.5 * residual.squaredNorm();
  const long full_steps = static_cast<long>(std::floor(config.horizon / config.euler_step));
  const double tail = config.horizon - static_cast<double>(full_steps) * config.euler_step;
  const double tol = 1e-13;

  auto advance = [&](double h) {
    w.noalias() -= h * (phi * residual);
    residual.noalias() = phi.transpose() * w;
    residual -= target;
    const double next = 0.5 * residual.squaredNorm();
    if (next > loss * (1.0 + tol) + tol) {
      out.loss_monotone = false;
      out.max_loss_increase = std::max(out.max_loss_increase, next - loss);
    }
    loss = next;
    ++out.steps;
  };
  for (long s = 0; s < full_steps; ++s) advance(config.euler_step);
  if (tail > 1e-15 * config.horizon) advance(tail);

  out.w = Eigen::Map<const Vector>(w.data(), d * p);
  return out;
}

/// Default oracle step 1e-3 / sigma_1^2.
inline double default_euler_step(const SpectralDecomposition& spec, double factor = 1e-3) {
  const double s = spec.sigma(0);
  return factor / (s * s);
}

}  // namespace distill_lab
