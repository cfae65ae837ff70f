#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "distill_lab/distill.hpp"
#include "distill_lab/flow.hpp"
#include "distill_lab/instance.hpp"
#include "distill_lab/spectral.hpp"
#include "support.hpp"

using namespace distill_lab;
using namespace testing_support;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorCode::IoError;
}

Matrix column(std::initializer_list<double> v) {
  Matrix m(static_cast<Index>(v.size()), 1);
  Index i = 0;
  for (double x : v) m(i++, 0) = x;
  return m;
}

}  // namespace

// ---------------------------------------------------------------- design matrix

TEST(DesignMatrix, IdentityMapOnUnitBasis) {
  SyntheticTask task;
  task.inputs = {Vector::Unit(2, 0), Vector::Unit(2, 1)};
  task.labels = Matrix::Zero(2, 1);
  const DesignMatrix dm = build_design_matrix(task, FeatureMap::identity(2));
  EXPECT_TRUE(dm.phi.isApprox(Matrix::Identity(2, 2)));
  EXPECT_EQ(dm.rank, 2);
}

TEST(DesignMatrix, RandomTanhIsFullRank) {
  InstanceParams params;
  params.n = 4;
  params.d = 16;
  params.input_dim = 5;
  const TheoryInstance inst = make_theory_instance(params, 42);
  EXPECT_EQ(inst.design.rank, 4);
}

TEST(DesignMatrix, RejectsMoreSamplesThanFeatures) {
  std::mt19937_64 rng(1);
  EXPECT_EQ(code_of([&] { make_design_matrix(gaussian(rng, 2, 3)); }), ErrorCode::DimensionMismatch);
}

TEST(DesignMatrix, RejectsRankDeficientColumns) {
  Matrix phi(3, 2);
  phi << 1, 2, 1, 2, 0, 0;
  EXPECT_EQ(code_of([&] { make_design_matrix(phi); }), ErrorCode::RankDeficient);
}

TEST(DesignMatrix, RejectsNonFinite) {
  Matrix phi = Matrix::Identity(2, 2);
  phi(0, 1) = std::nan("");
  EXPECT_EQ(code_of([&] { make_design_matrix(phi); }), ErrorCode::DomainError);
}

// ----------------------------------------------------------------- lifted SVD

TEST(LiftedSvd, KroneckerRepeatsSingularValues) {
  const SpectralDecomposition s = from_phi(Vector(Eigen::Vector2d(3, 1)).asDiagonal(), 2);
  ASSERT_EQ(s.np(), 4);
  EXPECT_DOUBLE_EQ(s.sigma(0), 3);
  EXPECT_DOUBLE_EQ(s.sigma(1), 3);
  EXPECT_DOUBLE_EQ(s.sigma(2), 1);
  EXPECT_DOUBLE_EQ(s.sigma(3), 1);
}

TEST(LiftedSvd, DiagonalSingleOutput) {
  const SpectralDecomposition s = from_phi(Vector(Eigen::Vector2d(3, 1)).asDiagonal(), 1);
  EXPECT_DOUBLE_EQ(s.sigma(0), 3);
  EXPECT_DOUBLE_EQ(s.sigma(1), 1);
  EXPECT_TRUE(s.top_left_matrix().cwiseAbs().isApprox(Matrix::Identity(2, 2)));
}

TEST(LiftedSvd, FactoredMatchesDenseKroneckerSpectrum) {
  std::mt19937_64 rng(8);
  const SpectralDecomposition s = from_phi(gaussian(rng, 8, 3), 2);
  const Matrix k = kron_dense(2, s.phi());
  ASSERT_EQ(k.rows(), 16);
  ASSERT_EQ(k.cols(), 6);
  // eigenvalues of K^T K, ascending
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(k.transpose() * k);
  for (Index i = 0; i < 6; ++i) EXPECT_NEAR(s.sigma(i), std::sqrt(eig.eigenvalues()(5 - i)), 1e-10);
}

TEST(LiftedSvd, PropertyReconstructionAndOrthonormality) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const Shape sh = random_shape(rng);
    const SpectralDecomposition s = random_spectrum(rng, sh);
    const Matrix k = kron_dense(sh.p, s.phi());
    const Matrix u = s.top_left_matrix();
    const Matrix v = s.right_matrix();
    EXPECT_LT((u * s.sigma().asDiagonal() * v.transpose() - k).norm(), 1e-10 * k.norm());
    const Matrix uf = s.full_left_matrix();
    EXPECT_LT((uf.transpose() * uf - Matrix::Identity(s.dp(), s.dp())).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((v.transpose() * v - Matrix::Identity(s.np(), s.np())).cwiseAbs().maxCoeff(), 1e-10);
    for (Index i = 0; i + 1 < s.np(); ++i) EXPECT_GE(s.sigma(i), s.sigma(i + 1));

    const Vector w = gaussian(rng, s.dp());
    const Vector z = gaussian(rng, s.np());
    EXPECT_LT(rel(s.outputs(w), k.transpose() * w), 1e-12);
    EXPECT_LT(rel(s.lift(z), k * z), 1e-12);
    EXPECT_LT(rel(s.from_left_coefficients(s.left_coefficients(w)), w), 1e-12);
    EXPECT_LT(rel(s.from_right_coefficients(s.right_coefficients(z)), z), 1e-12);
  }
}

// ------------------------------------------------------------- null projection

TEST(NullProjection, FirstSingularVectorVanishes) {
  std::mt19937_64 rng(3);
  const SpectralDecomposition s = from_phi(gaussian(rng, 5, 2), 2);
  EXPECT_LT(null_projection(s, s.left_vector(0)).norm(), 1e-14);
}

TEST(NullProjection, FixesNullSpace) {
  std::mt19937_64 rng(4);
  const SpectralDecomposition s = from_phi(gaussian(rng, 5, 2), 2);
  const Vector w = s.left_vector(s.np()) - 2.0 * s.left_vector(s.dp() - 1);
  EXPECT_LT((null_projection(s, w) - w).norm(), 1e-14);
}

TEST(NullProjection, MatchesAssembledProjector) {
  std::mt19937_64 rng(5);
  const SpectralDecomposition s = from_phi(gaussian(rng, 4, 2), 1);
  const Vector w = gaussian(rng, 4);
  EXPECT_LT(rel(null_projection(s, w), null_projector(s.phi()) * w), 1e-12);
}

TEST(NullProjection, PropertyIdempotentAndAnnihilated) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 60; ++trial) {
    const Shape sh = random_shape(rng);
    const SpectralDecomposition s = random_spectrum(rng, sh);
    const Vector w = gaussian(rng, s.dp());
    const Vector pw = null_projection(s, w);
    EXPECT_LT((null_projection(s, pw) - pw).norm(), 1e-12 * w.norm());
    EXPECT_LT(s.outputs(pw).norm(), 1e-12 * w.norm());
    EXPECT_LT((pw - null_projector(kron_dense(sh.p, s.phi())) * w).norm(), 1e-9 * w.norm());
  }
}

// --------------------------------------------------------------- distillation

TEST(Alpha, ReferenceValues) {
  EXPECT_DOUBLE_EQ(alpha_coefficient(1.0, 1, 1.0, 0), 1.0);
  EXPECT_DOUBLE_EQ(alpha_coefficient(1.0, 1, 1.0, 1), 0.5);
  EXPECT_NEAR(alpha_coefficient(2.0, 4, 0.5, 2), 2.0 / 9.0, 1e-15);
}

TEST(Alpha, AgreesWithTwoRidgeIterations) {
  // Phi = [2], w00 = 1/2 so f0 = 1 and ytilde = 1; n = 4 is the loss normaliser
  const SpectralDecomposition s = from_phi(Matrix::Constant(1, 1, 2.0), 1);
  const DistillConfig dc{0.5, 2, 4};
  const Vector w = iterate_distill(s, Vector::Constant(1, 0.5), dc);
  EXPECT_NEAR(w(0), alpha_coefficient(2.0, 4, 0.5, 2), 1e-15);
}

TEST(Alpha, RejectsBadArguments) {
  EXPECT_EQ(code_of([] { alpha_coefficient(0.0, 1, 1.0, 1); }), ErrorCode::DomainError);
  EXPECT_EQ(code_of([] { alpha_coefficient(1.0, 1, 0.0, 1); }), ErrorCode::DomainError);
  EXPECT_EQ(code_of([] { alpha_coefficient(1.0, 1, 1.0, -1); }), ErrorCode::DomainError);
}

TEST(RidgeStep, HandSolvedTwoByTwo) {
  const SpectralDecomposition s = from_phi(column({1, 0}), 1);
  const DistillConfig dc{1.0, 1, 1};
  const Vector f = Vector::Constant(1, 3.0);
  const Vector dense = ridge_distill_step_dense(s.phi(), 1, f, dc);
  const Vector spectral = ridge_distill_step_spectral(s, f, dc);
  EXPECT_NEAR(dense(0), 1.5, 1e-15);
  EXPECT_NEAR(dense(1), 0.0, 1e-15);
  EXPECT_LT((spectral - dense).norm(), 1e-15);
}

TEST(RidgeStep, ZeroTargetGivesZero) {
  std::mt19937_64 rng(9);
  const SpectralDecomposition s = from_phi(gaussian(rng, 6, 3), 2);
  EXPECT_EQ(ridge_distill_step(s, Vector::Zero(6), DistillConfig{0.3, 1, 3}).norm(), 0.0);
}

TEST(RidgeStep, PropertyDenseEqualsSpectral) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 60; ++trial) {
    const SpectralDecomposition s = random_spectrum(rng, random_shape(rng));
    const DistillConfig dc{std::exp(std::uniform_real_distribution<double>(-6, 1)(rng)), 1, s.n()};
    const Vector f = gaussian(rng, s.np());
    EXPECT_LT(rel(ridge_distill_step_spectral(s, f, dc), ridge_distill_step_dense(s.phi(), s.p(), f, dc)), 1e-9);
  }
}

TEST(ClosedForm, DropsNullComponentAfterOneRound) {
  const SpectralDecomposition s = from_phi(column({1, 0}), 1);
  const Vector w00(Eigen::Vector2d(3.0, -2.0));
  const DistillState one = closed_form_distill(s, w00, DistillConfig{1.0, 1, 1});
  EXPECT_NEAR(one.w(0), 1.5, 1e-15);
  EXPECT_NEAR(one.w(1), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(one.null_energy, 4.0);

  const DistillState zero = closed_form_distill(s, w00, DistillConfig{1.0, 0, 1});
  EXPECT_EQ(zero.w, w00);
  EXPECT_NEAR(zero.null_part(0), 0.0, 1e-15);
  EXPECT_NEAR(zero.null_part(1), -2.0, 1e-15);
}

TEST(ClosedForm, MatchesThreeRidgeRounds) {
  std::mt19937_64 rng(12);
  const SpectralDecomposition s = from_phi(gaussian(rng, 6, 2), 2);
  const Vector w00 = gaussian(rng, 12);
  const DistillConfig dc{0.2, 3, 2};
  EXPECT_LT(rel(closed_form_distill(s, w00, dc).w, iterate_distill(s, w00, dc)), 1e-9);
}

TEST(ClosedForm, LargeLambdaCollapsesToZero) {
  std::mt19937_64 rng(13);
  const SpectralDecomposition s = from_phi(gaussian(rng, 6, 3), 2);
  const Vector w00 = gaussian(rng, 12);
  EXPECT_LT(closed_form_distill(s, w00, DistillConfig{1e8, 1, 3}).w.norm(), 1e-6 * w00.norm());
}

TEST(ClosedForm, RejectsZeroInitialWeight) {
  const SpectralDecomposition s = from_phi(column({1, 0}), 1);
  EXPECT_EQ(code_of([&] { closed_form_distill(s, Vector::Zero(2), DistillConfig{}); }), ErrorCode::ZeroInitialWeight);
  EXPECT_EQ(code_of([&] { closed_form_distill(s, Vector::Ones(3), DistillConfig{}); }), ErrorCode::DimensionMismatch);
  EXPECT_EQ(code_of([&] { closed_form_distill(s, Vector::Ones(2), DistillConfig{-1.0, 1, 1}); }), ErrorCode::DomainError);
}

TEST(ClosedForm, PropertyOracleAndStructure) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 40; ++trial) {
    const SpectralDecomposition s = random_spectrum(rng, random_shape(rng));
    const Vector w00 = gaussian(rng, s.dp());
    const double lambda = std::exp(std::uniform_real_distribution<double>(-5, 0)(rng));
    const Vector f0 = s.outputs(w00);
    for (int t = 0; t <= 6; ++t) {
      const DistillConfig dc{lambda, t, s.n()};
      const DistillState st = closed_form_distill(s, w00, dc);
      EXPECT_LT(rel(st.w, iterate_distill(s, w00, dc)), 1e-9);
      EXPECT_LT(rel(propagate_teacher(s, f0, t, dc), s.outputs(st.w)), 1e-9);
      if (t >= 1 && s.dp() > s.np()) {
        EXPECT_LT(s.left_coefficients(st.w).tail(s.dp() - s.np()).cwiseAbs().maxCoeff(), 1e-10 * w00.norm());
      }
      for (Index i = 0; i < s.np(); ++i)
        EXPECT_LT(alpha_coefficient(s.sigma(i), s.n(), lambda, t + 1), alpha_coefficient(s.sigma(i), s.n(), lambda, t));
    }
  }
}

TEST(TeacherPropagation, ReferenceValues) {
  std::mt19937_64 rng(15);
  const SpectralDecomposition s = from_phi(gaussian(rng, 5, 3), 2);
  const Vector f0 = gaussian(rng, 6);
  const DistillConfig dc{0.4, 0, 3};
  EXPECT_LT(rel(propagate_teacher(s, f0, 0, dc), f0), 1e-12);

  const SpectralDecomposition scalar = from_phi(Matrix::Constant(1, 1, 1.0), 1);
  EXPECT_NEAR(propagate_teacher(scalar, Vector::Constant(1, 1.0), 3, DistillConfig{1.0, 0, 1})(0), 0.125, 1e-15);
}

// --------------------------------------------------------------- fine-tuning

TEST(MinNormTargets, ScalarAndZero) {
  const SpectralDecomposition s = from_phi(Matrix::Constant(1, 1, 1.0), 1);
  EXPECT_DOUBLE_EQ(min_norm_targets(s, Vector::Constant(1, -0.7))(0), -0.7);
  std::mt19937_64 rng(16);
  const SpectralDecomposition r = from_phi(gaussian(rng, 5, 2), 2);
  EXPECT_EQ(min_norm_targets(r, Vector::Zero(4)).norm(), 0.0);
}

TEST(MinNormTargets, PropertyInterpolatesWithMinimumNorm) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    const SpectralDecomposition s = random_spectrum(rng, random_shape(rng));
    const Vector y = gaussian(rng, s.np());
    const Vector v = s.from_left_coefficients(min_norm_targets(s, y));
    EXPECT_LT((s.outputs(v) - y).norm(), 1e-9 * std::max(1.0, y.norm()));
    // minimum norm: no component in the null space of Z
    EXPECT_LT(null_projection(s, v).norm(), 1e-9 * std::max(1.0, v.norm()));
  }
}

TEST(FlowCoefficient, ReferenceValues) {
  EXPECT_DOUBLE_EQ(flow_coefficient(2.0, -1.0, 1.7, 0.0), -1.0);
  EXPECT_NEAR(flow_coefficient(3.0, 5.0, 1.0, std::log(2.0)), 4.0, 1e-15);
  EXPECT_NEAR(flow_coefficient(3.0, -5.0, 1.0, 100.0), 3.0, 1e-40);
}

TEST(FineTune, ScalarFormula) {
  const SpectralDecomposition s = from_phi(Matrix::Constant(1, 1, 1.0), 1);
  DistillState st = closed_form_distill(s, Vector::Constant(1, 0.8), DistillConfig{1.0, 0, 1});
  FlowConfig fc;
  fc.horizon = 1.3;
  const double y = -0.4;
  const Vector w = finetune_closed_form(s, st, Vector::Constant(1, y), fc).w_final;
  EXPECT_NEAR(w(0), y * (1 - std::exp(-1.3)) + 0.8 * std::exp(-1.3), 1e-15);
}

TEST(FineTune, LongHorizonReachesInterpolant) {
  std::mt19937_64 rng(18);
  const SpectralDecomposition s = from_phi(gaussian(rng, 7, 3), 2);
  const Vector y = gaussian(rng, 6), w00 = gaussian(rng, 14);
  const DistillState st = closed_form_distill(s, w00, DistillConfig{0.1, 2, 3});
  FlowConfig fc;
  fc.horizon = 8.0 / (s.sigma(s.np() - 1) * s.sigma(s.np() - 1));
  const FineTuneTrajectory tr = finetune_closed_form(s, st, y, fc);
  const Vector v = s.from_left_coefficients(tr.q);
  const double bound = std::exp(-8.0) * (tr.c0 - tr.q).norm();
  EXPECT_LE((tr.w_final - v).norm(), bound * (1 + 1e-9) + 1e-14);
}

TEST(FineTune, MatchesEulerOracle) {
  std::mt19937_64 rng(19);
  const SpectralDecomposition s = from_phi(gaussian(rng, 6, 2), 2);
  const Vector y = gaussian(rng, 4), w00 = gaussian(rng, 12);
  const DistillState st = closed_form_distill(s, w00, DistillConfig{0.1, 1, 2});
  FlowConfig fc;
  fc.horizon = 5.0;
  fc.euler_step = 1e-3;
  const Vector closed = finetune_closed_form(s, st, y, fc).w_final;
  EXPECT_LT(rel(closed, euler_oracle(s.phi(), 2, y, st.w, fc).w), 1e-3);
}

TEST(Euler, InterpolatingStartStaysPut) {
  std::mt19937_64 rng(20);
  const SpectralDecomposition s = from_phi(gaussian(rng, 5, 2), 1);
  const Vector w = gaussian(rng, 5);
  FlowConfig fc;
  fc.horizon = 2.0;
  fc.euler_step = default_euler_step(s);
  EXPECT_LT((euler_oracle(s.phi(), 1, s.outputs(w), w, fc).w - w).norm(), 1e-12);
}

TEST(Euler, ScalarExponential) {
  FlowConfig fc;
  fc.horizon = 1.0;
  fc.euler_step = 1e-3;
  const EulerResult r = euler_oracle(Matrix::Constant(1, 1, 1.0), 1, Vector::Constant(1, 1.0), Vector::Zero(1), fc);
  EXPECT_NEAR(r.w(0), 1.0 - std::exp(-1.0), 1e-3);
  EXPECT_EQ(r.steps, 1000);
  EXPECT_TRUE(r.loss_monotone);
}

TEST(Euler, NullSpaceStartWithZeroLabels) {
  std::mt19937_64 rng(21);
  const SpectralDecomposition s = from_phi(gaussian(rng, 6, 2), 2);
  const Vector w = null_projection(s, gaussian(rng, 12));
  FlowConfig fc;
  fc.euler_step = default_euler_step(s);
  EXPECT_LT((euler_oracle(s.phi(), 2, Vector::Zero(4), w, fc).w - w).norm(), 1e-14);
}

TEST(Euler, RejectsUnstableStep) {
  FlowConfig fc;
  fc.euler_step = 0.5;
  EXPECT_EQ(code_of([&] { euler_oracle(Matrix::Constant(1, 1, 2.0), 1, Vector::Ones(1), Vector::Zero(1), fc); }),
            ErrorCode::UnstableStep);
}

TEST(FineTune, PropertyFlowKeepsNullCoordinates) {
  std::mt19937_64 rng(22);
  for (int trial = 0; trial < 15; ++trial) {
    const SpectralDecomposition s = random_spectrum(rng, random_shape(rng, 8, 4, 2));
    if (s.dp() == s.np()) continue;
    const Vector y = gaussian(rng, s.np()), w00 = gaussian(rng, s.dp());
    const DistillState st = closed_form_distill(s, w00, DistillConfig{0.05, 0, s.n()});
    FlowConfig fc;
    fc.horizon = 1.0;
    fc.euler_step = default_euler_step(s, 1e-2);
    const EulerResult e = euler_oracle(s.phi(), s.p(), y, st.w, fc);
    const Index tail = s.dp() - s.np();
    EXPECT_LT((s.left_coefficients(e.w).tail(tail) - s.left_coefficients(st.w).tail(tail)).cwiseAbs().maxCoeff(), 1e-9);
    const Vector closed = finetune_closed_form(s, st, y, fc).w_final;
    EXPECT_LT((s.left_coefficients(closed).tail(tail) - s.left_coefficients(st.w).tail(tail)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_TRUE(e.loss_monotone);
  }
}
