#pragma once

// Ridge-regularised self-distillation in the linear-in-features model
// f(x, w) = W phi(x). Round t fits the outputs of round t-1 with
//   L_t(w) = (1/n) sum_i ||f(x_i, w) - f(x_i, w_{t-1,0})||^2 + lambda ||w||^2,
// whose minimiser solves ([I(x)Phi][I(x)Phi]^T + n lambda I) w = [I(x)Phi] vec[f_{t-1}].

#include <Eigen/Dense>

#include <cmath>
#include <string>

#include "distill_lab/error.hpp"
#include "distill_lab/spectral.hpp"

namespace distill_lab {

/// Largest lifted dimension dp for which ridge_distill_step solves the dense
/// normal equations; above it the factored spectral solve is used.
inline constexpr Index kDenseRidgeLimit = 64;

struct DistillConfig {
  double lambda = 0.1;
  int rounds = 1;
  Index n = 1;

  void validate() const {
    require(lambda > 0.0 && std::isfinite(lambda), ErrorCode::DomainError, "lambda must be positive");
    require(rounds >= 0, ErrorCode::DomainError, "rounds must be non-negative");
    require(n >= 1, ErrorCode::DomainError, "sample count must be positive");
  }
};

struct DistillState {
  int t = 0;
  Vector w;                // w_{t,0}
  Vector coeffs;           // u_i^T w_{t,0} = alpha_{i,t} * ytilde_i, i < r
  Vector null_part;        // P_r w_{0,0} at t = 0, exactly zero afterwards
  Vector teacher_outputs;  // vec[f_t]
  Vector teacher_signal;   // ytilde = V^T vec[f_0]
  double null_energy = 0;  // ||P_r w_{0,0}||^2, the quantity removed by round one
  double lambda = 0;       // ridge coefficient the state was produced with
};

/// alpha_{i,t} = (1/sigma) * (1 / (1 + n lambda / sigma^2))^t.
inline double alpha_coefficient(double sigma, Index n, double lambda, int t) {
  require(sigma > 0.0, ErrorCode::DomainError, "sigma must be positive");
  require(lambda > 0.0, ErrorCode::DomainError, "lambda must be positive");
  require(t >= 0, ErrorCode::DomainError, "round index must be non-negative");
  const double shrink = 1.0 / (1.0 + static_cast<double>(n) * lambda / (sigma * sigma));
  return std::pow(shrink, t) / sigma;
}

/// Per-round factor sigma^2 / (sigma^2 + n lambda), the diagonal of A.
inline double shrink_factor(double sigma, Index n, double lambda) {
  return sigma * sigma / (sigma * sigma + static_cast<double>(n) * lambda);
}

/// Dense route: materialises K = [I_p (x) Phi] and solves (K K^T + n lambda I) w = K f.
inline Vector ridge_distill_step_dense(const Matrix& phi, Index p, const Vector& teacher_outputs,
                                       const DistillConfig& config) {
  config.validate();
  const Matrix k = SpectralDecomposition::kron_identity(p, phi);
  require(teacher_outputs.size() == k.cols(), ErrorCode::DimensionMismatch, "teacher outputs must have length np");
  Matrix gram = k * k.transpose();
  gram.diagonal().array() += static_cast<double>(config.n) * config.lambda;
  const Eigen::LDLT<Matrix> ldlt(gram);
  require(ldlt.info() == Eigen::Success && ldlt.isPositive(), ErrorCode::SingularSystem,
          "ridge normal equations not positive definite");
  return ldlt.solve(k * teacher_outputs);
}

/// Factored route: w = sum_i sigma_i / (sigma_i^2 + n lambda) (V^T f)_i u_i.
inline Vector ridge_distill_step_spectral(const SpectralDecomposition& spec, const Vector& teacher_outputs,
                                          const DistillConfig& config) {
  config.validate();
  Vector c = spec.right_coefficients(teacher_outputs);
  const double nl = static_cast<double>(config.n) * config.lambda;
  for (Index i = 0; i < c.size(); ++i) {
    const double s = spec.sigma(i);
    c(i) *= s / (s * s + nl);
  }
  return spec.from_left_coefficients(c);
}

inline Vector ridge_distill_step(const SpectralDecomposition& spec, const Vector& teacher_outputs,
                                 const DistillConfig& config) {
  require(teacher_outputs.size() == spec.np(), ErrorCode::DimensionMismatch, "teacher outputs must have length np");
  if (spec.dp() <= kDenseRidgeLimit) return ridge_distill_step_dense(spec.phi(), spec.p(), teacher_outputs, config);
  return ridge_distill_step_spectral(spec, teacher_outputs, config);
}

/// w_{t,0} from w_{0,0} in closed form (t = config.rounds).
inline DistillState closed_form_distill(const SpectralDecomposition& spec, const Vector& w00,
                                        const DistillConfig& config) {
  config.validate();
  require(w00.size() == spec.dp(), ErrorCode::DimensionMismatch, "initial weight must have length dp");
  require(w00.norm() > 0.0, ErrorCode::ZeroInitialWeight, "w_{0,0} must be non-zero");

  const Index r = spec.rank();
  const Vector f0 = spec.outputs(w00);

  DistillState state;
  state.t = config.rounds;
  state.lambda = config.lambda;
  state.teacher_signal = spec.right_coefficients(f0);
  state.coeffs.resize(r);
  Vector shrink(r);
  for (Index i = 0; i < r; ++i) {
    const double s = spec.sigma(i);
    state.coeffs(i) = alpha_coefficient(s, config.n, config.lambda, config.rounds) * state.teacher_signal(i);
    shrink(i) = std::pow(shrink_factor(s, config.n, config.lambda), config.rounds);
  }
  const Vector v = null_projection(spec, w00);
  state.null_energy = v.squaredNorm();
  state.null_part = config.rounds == 0 ? v : Vector::Zero(spec.dp());
  state.w = spec.from_left_coefficients(state.coeffs) + state.null_part;
  // vec[f_t] = V A^t V^T vec[f_0]
  state.teacher_outputs = spec.from_right_coefficients(shrink.cwiseProduct(state.teacher_signal));
  return state;
}

/// vec[f_t] = V A^t V^T vec[f_0] with A = diag(sigma_i^2 / (sigma_i^2 + n lambda)).
inline Vector propagate_teacher(const SpectralDecomposition& spec, const Vector& f0, int t,
                                const DistillConfig& config) {
  config.validate();
  require(t >= 0, ErrorCode::DomainError, "round index must be non-negative");
  require(f0.size() == spec.np(), ErrorCode::DimensionMismatch, "f0 must have length np");
  Vector c = spec.right_coefficients(f0);
  for (Index i = 0; i < c.size(); ++i) c(i) *= std::pow(shrink_factor(spec.sigma(i), config.n, config.lambda), t);
  return spec.from_right_coefficients(c);
}

/// Literal iteration of the per-round minimisation, starting from f_0 = model(w00).
inline Vector iterate_distill(const SpectralDecomposition& spec, const Vector& w00, const DistillConfig& config,
                              bool dense = true) {
  config.validate();
  Vector w = w00;
  for (int t = 0; t < config.rounds; ++t) {
    const Vector f = spec.outputs(w);
    w = dense ? ridge_distill_step_dense(spec.phi(), spec.p(), f, config)
              : ridge_distill_step_spectral(spec, f, config);
  }
  return w;
}

}  // namespace distill_lab
