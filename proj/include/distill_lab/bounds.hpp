#pragma once

// Weight-norm bound zeta_t(s) entering the generalisation bound, the distance
// bound psi(t) = sqrt(G1 + psi1(t) + [t=0] B) + G2 and its decomposition, and
// the bound remainder zeta * sqrt(4 c^2 R^2 p / n) + M sqrt(ln(2/delta) / 2n).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "distill_lab/distill.hpp"
#include "distill_lab/error.hpp"
#include "distill_lab/flow.hpp"
#include "distill_lab/spectral.hpp"

namespace distill_lab {

struct BoundInputs {
  double R = 1.0;      // E ||phi(x)|| <= R
  double M = 1.0;      // loss upper bound
  double delta = 0.05;
  double c = 1.0;      // Rademacher comparison constant, only known up to existence

  void validate() const {
    require(R > 0.0, ErrorCode::DomainError, "R must be positive");
    require(M > 0.0, ErrorCode::DomainError, "M must be positive");
    require(delta > 0.0 && delta < 1.0, ErrorCode::DomainError, "delta must lie in (0, 1)");
    require(c > 0.0, ErrorCode::DomainError, "c must be positive");
  }
};

struct BoundReport {
  int t = 0;
  double zeta = 0;
  double psi = 0;
  double G1 = 0;
  double psi1 = 0;
  double B = 0;
  double G2 = 0;
  double bound_rhs = 0;  // remainder term of the generalisation bound, up to c
  /// 2 sum_i q_i c_i e^{-s_i^2 T} (1 - e^{-s_i^2 T}): the part of ||w_{t,T}||^2
  /// that the decomposition above leaves out.
  double cross = 0;
  /// ||w_{t,T}|| + G2, the largest distance over all w_init of norm G2.
  double psi_attained = 0;
};

inline double generalization_remainder(double zeta_t, const BoundInputs& inputs, Index p, Index n) {
  inputs.validate();
  require(p >= 1 && n >= 1, ErrorCode::DomainError, "p and n must be positive");
  const double pn = static_cast<double>(p) / static_cast<double>(n);
  return zeta_t * std::sqrt(4.0 * inputs.c * inputs.c * inputs.R * inputs.R * pn) +
         inputs.M * std::sqrt(std::log(2.0 / inputs.delta) / (2.0 * static_cast<double>(n)));
}

/// zeta_t(s) from the coefficients of w_{t,0} in the left singular basis.
inline double zeta(const SpectralDecomposition& spec, const DistillState& state, const Vector& y,
                   const FlowConfig& flow) {
  flow.validate();
  require(state.w.size() == spec.dp(), ErrorCode::DimensionMismatch, "distill state does not match decomposition");
  const Vector q = min_norm_targets(spec, y);
  const Vector c0 = spec.left_coefficients(state.w);
  double total = 0.0;
  for (Index i = 0; i < spec.np(); ++i) {
    const double decay = std::exp(-spec.sigma(i) * spec.sigma(i) * flow.horizon);
    const double a = q(i) * (1.0 - decay);
    total += a * a + c0(i) * c0(i) * decay * decay;
  }
  total += c0.tail(spec.dp() - spec.np()).squaredNorm();
  return std::sqrt(total);
}

/// psi(t) and its parts. psi1 is evaluated from alpha_{i,t} and ytilde (the
/// closed-form coefficients), independently of the projection used by zeta().
inline BoundReport psi(const SpectralDecomposition& spec, const DistillState& state, const Vector& y,
                       const FlowConfig& flow, double w_init_norm) {
  flow.validate();
  require(w_init_norm >= 0.0, ErrorCode::DomainError, "w_init norm must be non-negative");
  require(state.teacher_signal.size() == spec.np(), ErrorCode::DimensionMismatch,
          "distill state does not match decomposition");
  const Vector q = min_norm_targets(spec, y);
  BoundReport report;
  report.t = state.t;
  for (Index i = 0; i < spec.np(); ++i) {
    const double s = spec.sigma(i);
    const double decay = std::exp(-s * s * flow.horizon);
    report.G1 += q(i) * q(i) * (1.0 - decay) * (1.0 - decay);
    const double c = alpha_coefficient(s, spec.n(), state.lambda, state.t) * state.teacher_signal(i);
    report.psi1 += c * c * decay * decay;
    report.cross += 2.0 * q(i) * c * decay * (1.0 - decay);
  }
  report.B = state.null_energy;
  report.G2 = w_init_norm;
  const double root = report.G1 + report.psi1 + (state.t == 0 ? report.B : 0.0);
  report.psi = std::sqrt(root) + report.G2;
  report.psi_attained = std::sqrt(std::max(0.0, root + report.cross)) + report.G2;
  return report;
}

/// Full report for round state.t: zeta, psi decomposition and, when bound
/// inputs are given, the remainder of the generalisation bound.
inline BoundReport bound_report(const SpectralDecomposition& spec, const DistillState& state, const Vector& y,
                                const FlowConfig& flow, double w_init_norm, const BoundInputs* inputs = nullptr) {
  BoundReport report = psi(spec, state, y, flow, w_init_norm);
  report.zeta = zeta(spec, state, y, flow);
  if (inputs != nullptr) report.bound_rhs = generalization_remainder(report.zeta, *inputs, spec.p(), spec.n());
  return report;
}

/// w_init = -alpha w_{t,T}. Its distance to w_{t,T} is psi_attained, which
/// equals psi(t) only when the cross term vanishes.
inline Vector tightness_witness(const SpectralDecomposition& spec, const DistillState& state, const Vector& y,
                                const FlowConfig& flow, double alpha) {
  require(alpha > 0.0, ErrorCode::DomainError, "alpha must be positive");
  return -alpha * finetune_closed_form(spec, state, y, flow).w_final;
}

enum class Trend { StrictlyDecreasing, Tie, Violation };

inline const char* to_string(Trend trend) {
  switch (trend) {
    case Trend::StrictlyDecreasing: return "strictly-decreasing";
    case Trend::Tie: return "tie";
    case Trend::Violation: return "violation";
  }
  return "unknown";
}

/// Relative margin below which two adjacent values count as tied.
inline constexpr double kTieTolerance = 1e-12;

/// `scale` sets the tie band; by default the larger magnitude of the two.
inline Trend classify_step(double before, double after, double scale = -1.0) {
  const double margin = before - after;
  if (scale < 0.0) scale = std::max(std::abs(before), std::abs(after));
  const double tol = kTieTolerance * scale;
  if (margin > tol) return Trend::StrictlyDecreasing;
  if (margin < -tol) return Trend::Violation;
  return Trend::Tie;
}

struct PairVerdict {
  int t_from = 0;
  int t_to = 0;
  Trend zeta_trend = Trend::Tie;
  double zeta_margin = 0;
  Trend psi_trend = Trend::Tie;
  double psi_margin = 0;
  Trend psi1_trend = Trend::Tie;
  double psi1_margin = 0;
};

struct MonotonicityReport {
  std::vector<PairVerdict> pairs;
  /// (psi(0)-G2)^2 - (psi(1)-G2)^2, the squared drop of round one, and its
  /// null-space share B; zero when the reports do not start at t = 0.
  double first_drop = 0;
  double first_drop_null_share = 0;

  bool all(Trend trend) const {
    return std::all_of(pairs.begin(), pairs.end(),
                       [&](const PairVerdict& v) { return v.zeta_trend == trend && v.psi_trend == trend; });
  }
};

inline MonotonicityReport monotonicity_report(const std::vector<BoundReport>& reports) {
  require(reports.size() >= 2, ErrorCode::InsufficientRounds, "need at least two rounds to judge monotonicity");
  MonotonicityReport out;
  for (std::size_t k = 0; k + 1 < reports.size(); ++k) {
    const BoundReport& a = reports[k];
    const BoundReport& b = reports[k + 1];
    PairVerdict v;
    v.t_from = a.t;
    v.t_to = b.t;
    v.zeta_margin = a.zeta - b.zeta;
    v.zeta_trend = classify_step(a.zeta, b.zeta);
    // G2 is a constant offset; ties are judged against the round-dependent root
    v.psi_margin = a.psi - b.psi;
    v.psi_trend = classify_step(a.psi, b.psi, std::max(a.psi - a.G2, b.psi - b.G2));
    v.psi1_margin = a.psi1 - b.psi1;
    v.psi1_trend = classify_step(a.psi1, b.psi1);
    out.pairs.push_back(v);
  }
  if (reports[0].t == 0 && reports[1].t == 1) {
    const double r0 = reports[0].psi - reports[0].G2;
    const double r1 = reports[1].psi - reports[1].G2;
    out.first_drop = r0 * r0 - r1 * r1;
    out.first_drop_null_share = reports[0].B;
  }
  return out;
}

/// Mean feature norm over the design columns, the empirical stand-in for R.
inline double empirical_feature_bound(const DesignMatrix& design) {
  return design.phi.colwise().norm().mean();
}

/// Largest per-sample loss ||f(x_i, w) - y_i||^2.
inline double max_sample_loss(const SpectralDecomposition& spec, const Vector& w, const Vector& y) {
  const Vector r = spec.outputs(w) - y;
  const Matrix rm = Eigen::Map<const Matrix>(r.data(), spec.n(), spec.p());
  return rm.rowwise().squaredNorm().maxCoeff();
}

}  // namespace distill_lab
