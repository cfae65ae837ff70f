#pragma once

// mode=verify: the invariant suite of every module, one row per check with
// its measured value, bound and margin. Failures are data; the caller turns
// any failure into exit code 3.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "distill_lab/bounds.hpp"
#include "distill_lab/distill.hpp"
#include "distill_lab/experiment/config.hpp"
#include "distill_lab/experiment/family.hpp"
#include "distill_lab/experiment/outcome.hpp"
#include "distill_lab/experiment/theory_runner.hpp"
#include "distill_lab/flow.hpp"
#include "distill_lab/mae/checkpoint.hpp"
#include "distill_lab/mae/data.hpp"
#include "distill_lab/mae/losses.hpp"
#include "distill_lab/mae/model.hpp"
#include "distill_lab/mae/train.hpp"

namespace distill_lab::experiment {

enum class Fault { None, ClosedForm, Flow, Gradient };

inline std::string_view to_string(Fault f) {
  switch (f) {
    case Fault::None: return "none";
    case Fault::ClosedForm: return "closed-form";
    case Fault::Flow: return "flow";
    case Fault::Gradient: return "gradient";
  }
  return "unknown";
}

inline Fault parse_fault(std::string_view name) {
  for (Fault f : {Fault::None, Fault::ClosedForm, Fault::Flow, Fault::Gradient})
    if (to_string(f) == name) return f;
  throw Error(ErrorCode::ConfigError, "unknown fault '" + std::string(name) + "' (closed-form, flow, gradient)");
}

struct CheckResult {
  std::string id;
  std::string module;
  double value = 0.0;
  double bound = 0.0;
  bool strict = false;  // value < bound instead of value <= bound

  bool passed() const { return std::isfinite(value) && (strict ? value < bound : value <= bound); }
  double margin() const { return bound - value; }
};

/// Number of rows every verify report has; the list is in the README.
inline constexpr int kVerifyCheckCount = 42;

namespace verify_detail {

constexpr double kClosedFormFault = 1e-3;
constexpr double kFlowFault = 1e-2;
constexpr int kMaxRound = 10;

inline double worst(double a, double b) { return std::isnan(a) || std::isnan(b) ? std::nan("") : std::max(a, b); }

struct TheoryChecks {
  double reconstruction = 0, left_orth = 0, right_orth = 0, sigma_order = -std::numeric_limits<double>::infinity();
  double null_idempotent = 0, null_annihilated = 0;
  double distill_oracle = 0, dense_vs_spectral = 0, null_zero = 0, teacher = 0, decay_ratio = 0;
  double flow_oracle = 0, flow_null = 0, euler_increase = 0, interpolation = 0;
  double zeta_bad = 0, psi_bad = 0, degenerate_bad = 0, degenerate_drop = 0, drop_identity = 0;
  double zeta_dual = 0, witness = 0, cross_gap = 0, distance_excess = -std::numeric_limits<double>::infinity();
};

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

inline void theory_checks(TheoryChecks& c, const FamilyInstance& f, Fault fault, std::mt19937_64& rng) {
  const TheoryInstance& inst = f.inst;
  const SpectralDecomposition& spec = inst.spec;
  const Index np = spec.np(), dp = spec.dp();

  // spectral_core
  const Matrix k = spec.lifted_matrix();
  const Matrix u = spec.top_left_matrix();
  const Matrix v = spec.right_matrix();
  const Matrix rebuilt = u * spec.sigma().asDiagonal() * v.transpose();
  c.reconstruction = worst(c.reconstruction, (k - rebuilt).norm() / k.norm());
  const Matrix uf = spec.full_left_matrix();
  c.left_orth = worst(c.left_orth, max_abs(uf.transpose() * uf - Matrix::Identity(dp, dp)));
  c.right_orth = worst(c.right_orth, max_abs(v.transpose() * v - Matrix::Identity(np, np)));
  for (Index i = 0; i + 1 < np; ++i) c.sigma_order = worst(c.sigma_order, spec.sigma(i + 1) - spec.sigma(i));
  const Vector w = distill_lab::detail::normal_vector(rng, dp);
  const Vector pw = null_projection(spec, w);
  c.null_idempotent = worst(c.null_idempotent, (null_projection(spec, pw) - pw).norm() / w.norm());
  c.null_annihilated = worst(c.null_annihilated, (k.transpose() * pw).norm() / (k.norm() * w.norm()));

  FlowConfig flow;
  flow.horizon = 5.0;
  flow.euler_step = default_euler_step(spec);
  const Vector f0 = spec.outputs(inst.w00);
  std::vector<BoundReport> reports;
  for (int t = 0; t <= kMaxRound; ++t) {
    DistillConfig dc{f.lambda, t, spec.n()};
    const DistillState state = closed_form_distill(spec, inst.w00, dc);
    Vector closed = state.w;
    if (fault == Fault::ClosedForm) closed *= 1.0 + kClosedFormFault;
    c.distill_oracle = worst(c.distill_oracle, relative_error(closed, iterate_distill(spec, inst.w00, dc, true)));
    if (t >= 1) {
      DistillConfig one{f.lambda, 1, spec.n()};
      const Vector prev = spec.outputs(closed_form_distill(spec, inst.w00, DistillConfig{f.lambda, t - 1, spec.n()}).w);
      const Vector dense = ridge_distill_step_dense(spec.phi(), spec.p(), prev, one);
      c.dense_vs_spectral = worst(c.dense_vs_spectral, relative_error(ridge_distill_step_spectral(spec, prev, one), dense));
      const Vector coeff = spec.left_coefficients(state.w);
      if (dp > np) c.null_zero = worst(c.null_zero, coeff.tail(dp - np).cwiseAbs().maxCoeff());
    }
    c.teacher = worst(c.teacher, relative_error(propagate_teacher(spec, f0, t, dc), spec.outputs(state.w)));
    for (Index i = 0; i < np && t < kMaxRound; ++i)
      c.decay_ratio = worst(c.decay_ratio, alpha_coefficient(spec.sigma(i), spec.n(), f.lambda, t + 1) /
                                               alpha_coefficient(spec.sigma(i), spec.n(), f.lambda, t));

    // finetune_flow, on a few rounds (the Euler oracle is the slow part)
    if (t == 0 || t == 1 || t == 4) {
      Vector closed_final = finetune_closed_form(spec, state, inst.y, flow).w_final;
      if (fault == Fault::Flow) closed_final *= 1.0 + kFlowFault;
      const EulerResult euler = euler_oracle(spec.phi(), spec.p(), inst.y, state.w, flow);
      c.flow_oracle = worst(c.flow_oracle, relative_error(closed_final, euler.w));
      if (dp > np) {
        const Vector before = spec.left_coefficients(state.w).tail(dp - np);
        const Vector after = spec.left_coefficients(euler.w).tail(dp - np);
        c.flow_null = worst(c.flow_null, (after - before).cwiseAbs().maxCoeff());
      }
      c.euler_increase = worst(c.euler_increase, euler.max_loss_increase);
    }
    if (t == 1) {
      FlowConfig long_flow = flow;
      const double s_min = spec.sigma(np - 1);
      long_flow.horizon = 60.0 / (s_min * s_min);
      const Vector w_inf = finetune_closed_form(spec, state, inst.y, long_flow).w_final;
      c.interpolation = worst(c.interpolation, training_loss(spec, w_inf, inst.y) / (1.0 + inst.y.squaredNorm()));
    }

    // bound_lab
    const BoundReport rep = bound_report(spec, state, inst.y, flow, inst.w_init.norm());
    reports.push_back(rep);
    c.zeta_dual = worst(c.zeta_dual, std::abs(rep.zeta - (rep.psi - rep.G2)) / std::max(1.0, rep.zeta));
    const Vector wt = finetune_closed_form(spec, state, inst.y, flow).w_final;
    const Vector witness = tightness_witness(spec, state, inst.y, flow, 0.5);
    const BoundReport rep_w = psi(spec, state, inst.y, flow, witness.norm());
    c.witness = worst(c.witness, std::abs((witness - wt).norm() - rep_w.psi_attained) / rep_w.psi_attained);
    const double root = rep.psi - rep.G2;
    c.cross_gap = worst(c.cross_gap, std::abs(wt.squaredNorm() - root * root - rep.cross) / std::max(1.0, wt.squaredNorm()));
    for (int draw = 0; draw < 3; ++draw) {
      const Vector w_init = distill_lab::detail::normal_vector(rng, dp, 0.5 + draw);
      const double bound = psi(spec, state, inst.y, flow, w_init.norm()).psi_attained;
      c.distance_excess = worst(c.distance_excess, ((w_init - wt).norm() - bound) / bound);
    }
  }
  const MonotonicityReport mono = monotonicity_report(reports);
  for (const PairVerdict& pv : mono.pairs) {
    c.zeta_bad += pv.zeta_trend != Trend::StrictlyDecreasing;
    c.psi_bad += pv.psi_trend != Trend::StrictlyDecreasing;
  }
  const double scale = std::max(1.0, mono.first_drop);
  c.drop_identity = worst(c.drop_identity,
                          std::abs(mono.first_drop - (reports[0].B + reports[0].psi1 - reports[1].psi1)) / scale);

  // degenerate instance: w_{0,0} inside the null space, so ytilde = 0
  if (dp > np) {
    const Vector w00 = null_projection(spec, inst.w00);
    std::vector<BoundReport> deg;
    for (int t = 0; t <= 4; ++t)
      deg.push_back(bound_report(spec, closed_form_distill(spec, w00, DistillConfig{f.lambda, t, spec.n()}), inst.y, flow,
                                 inst.w_init.norm()));
    const MonotonicityReport dm = monotonicity_report(deg);
    for (std::size_t k2 = 1; k2 < dm.pairs.size(); ++k2)
      c.degenerate_bad += dm.pairs[k2].zeta_trend != Trend::Tie || dm.pairs[k2].psi_trend != Trend::Tie;
    c.degenerate_drop =
        worst(c.degenerate_drop, std::abs(dm.first_drop - dm.first_drop_null_share) / std::max(1.0, dm.first_drop));
  }
}

// ------------------------------------------------------------ mae_toy fixtures

struct ToyFixture {
  mae::ToyModelParams student;
  mae::ToyModelParams teacher;
  mae::MaskedBatch batch;
  mae::ToySequenceDataset labeled;
};

inline ToyFixture toy_fixture(mae::DataMode mode, std::uint64_t seed) {
  mae::ToyTaskConfig tc;
  tc.mode = mode;
  tc.K = 4;
  tc.vocab = 12;
  tc.patch_dim = 3;
  tc.classes = 3;
  tc.signature = 3;
  tc.general_topics = 2;
  tc.n_train = 6;
  tc.n_test = 3;
  tc.n_general = 6;
  const mae::ToyTask task = mae::make_toy_task(tc, seed);
  mae::ModelDims dims;
  dims.mode = mode;
  dims.K = tc.K;
  dims.h = 6;
  dims.ffn = 7;
  dims.vocab = tc.vocab;
  dims.patch_dim = tc.patch_dim;
  ToyFixture fx;
  fx.student = mae::init_params(dims, seed + 1);
  fx.teacher = mae::init_params(dims, seed + 2);
  std::mt19937_64 rng(seed + 3);
  const std::vector<Index> rows = {0, 1, 2, 3};
  fx.batch = mae::sample_masked_batch(task.train.subset(rows), 0.4, rng);
  fx.labeled = task.train;
  return fx;
}

inline double gradient_error(const mae::ToyModelParams& params, std::span<const mae::Group> groups,
                             const mae::ModelLoss& loss, Fault fault) {
  const std::vector<mae::Group> grp(groups.begin(), groups.end());
  const mae::LossEvaluator f = [&](const Vector& x, Vector* grad) {
    mae::ToyModelParams p = params;
    mae::unflatten(p, grp, x);
    ad::Tape tape;
    const mae::BoundModel m = mae::bind(tape, p, grad != nullptr);
    const ad::Var value = loss(tape, m);
    if (grad != nullptr) {
      tape.backward(value);
      *grad = mae::flatten(mae::collect_gradients(tape, m), grp);
      if (fault == Fault::Gradient) grad->array() += 1e-3 * (1.0 + grad->array().abs());
    }
    return value.scalar();
  };
  return mae::grad_check(mae::flatten(params, grp), f, 1e-5, 160, 11).max_relative_error;
}

inline constexpr mae::Group kEncDec[] = {mae::Group::Encoder, mae::Group::Decoder};
inline constexpr mae::Group kEncHead[] = {mae::Group::Encoder, mae::Group::Head};

inline double distill_gradient_error(const ToyFixture& fx, mae::Variant v, Fault fault) {
  const mae::ToyModelParams& teacher = fx.teacher;
  const mae::MaskedBatch& batch = fx.batch;
  return gradient_error(fx.student, kEncDec,
                        [&](ad::Tape& tape, const mae::BoundModel& s) {
                          const mae::BoundModel t = mae::bind(tape, teacher, false);
                          return mae::distill_loss_var(tape, s, t, batch, v);
                        },
                        fault);
}

struct ToyChecks {
  double grad_l1_token = 0, grad_l1_patch = 0, grad_repr = 0, grad_pred = 0, grad_wl2 = 0, grad_mars = 0, grad_cls = 0;
  double teacher_grad = 0, decoder_l2 = 0, student_start = 0, none_match = 0, masked_input = 0, checkpoint = 0;
  double empty_masks = 0;
};

inline ToyChecks toy_checks(Fault fault) {
  ToyChecks c;
  const ToyFixture tok = toy_fixture(mae::DataMode::Token, 5);
  const ToyFixture pat = toy_fixture(mae::DataMode::Patch, 6);

  c.grad_l1_token = gradient_error(
      tok.student, kEncDec, [&](ad::Tape& t, const mae::BoundModel& m) { return mae::mae_loss_var(t, m, tok.batch); }, fault);
  c.grad_l1_patch = gradient_error(
      pat.student, kEncDec, [&](ad::Tape& t, const mae::BoundModel& m) { return mae::mae_loss_var(t, m, pat.batch); }, fault);
  c.grad_repr = std::max(distill_gradient_error(tok, mae::Variant::Representation, fault),
                         distill_gradient_error(pat, mae::Variant::Representation, fault));
  c.grad_pred = std::max(distill_gradient_error(tok, mae::Variant::Prediction, fault),
                         distill_gradient_error(pat, mae::Variant::Prediction, fault));
  c.grad_wl2 = distill_gradient_error(tok, mae::Variant::WeightL2, fault);
  c.grad_mars = distill_gradient_error(tok, mae::Variant::WeightMars, fault);
  const mae::ToyModelParams with_head = mae::with_fresh_head(tok.student, tok.labeled.classes, 9);
  c.grad_cls = gradient_error(
      with_head, kEncHead,
      [&](ad::Tape& t, const mae::BoundModel& m) { return mae::classification_loss_var(t, m, tok.labeled); }, fault);

  // teacher leaves bound as variables still receive exactly zero gradient
  for (const ToyFixture* fx : {&tok, &pat}) {
    for (mae::Variant v : {mae::Variant::Representation, mae::Variant::DistillOnly, mae::Variant::Prediction,
                           mae::Variant::WeightL2, mae::Variant::WeightMars}) {
      ad::Tape tape;
      const mae::BoundModel s = mae::bind(tape, fx->student, true);
      const mae::BoundModel t = mae::bind(tape, fx->teacher, true);
      const ad::Var loss = ad::add(mae::mae_loss_var(tape, s, fx->batch), mae::distill_loss_var(tape, s, t, fx->batch, v));
      tape.backward(loss);
      const mae::ToyModelParams g = mae::collect_gradients(tape, t);
      for (mae::Group grp : kEncDec)
        for (const mae::Tensor& x : g.group(grp)) c.teacher_grad = std::max(c.teacher_grad, max_abs(x.value));
    }
  }

  // decoder gradient of a distillation step equals the gradient of L1 alone
  for (const ToyFixture* fx : {&tok, &pat}) {
    ad::Tape tape;
    const mae::BoundModel s = mae::bind(tape, fx->student, true);
    const ad::Var l1 = mae::mae_loss_var(tape, s, fx->batch);
    tape.backward(l1);
    const mae::ToyModelParams only_l1 = mae::collect_gradients(tape, s);
    for (mae::Variant v : {mae::Variant::Representation, mae::Variant::Prediction, mae::Variant::WeightL2,
                           mae::Variant::WeightMars, mae::Variant::DistillOnly}) {
      mae::TrainConfig cfg;
      cfg.variant = v;
      const mae::StepGradients sg = mae::distill_step_gradients(fx->student, fx->teacher, fx->batch, cfg);
      for (std::size_t i = 0; i < sg.grads.decoder.size(); ++i) {
        const Matrix expected = v == mae::Variant::DistillOnly ? Matrix::Zero(only_l1.decoder[i].value.rows(),
                                                                             only_l1.decoder[i].value.cols())
                                                               : only_l1.decoder[i].value;
        c.decoder_l2 = std::max(c.decoder_l2, max_abs(sg.grads.decoder[i].value - expected));
      }
    }
  }

  // every round's student starts at theta_init; variant none is further pre-training
  {
    mae::ToySequenceDataset data = tok.labeled.unlabeled();
    mae::TrainConfig cfg;
    cfg.steps_pretrain = 4;
    cfg.batch = 3;
    cfg.rounds = 2;
    cfg.lr_pretrain = 0.05;
    const mae::ToyModelParams& init = tok.student;
    mae::self_distill(init, data, cfg, [&](int, const mae::ToyModelParams& s) {
      if (!mae::identical(s, init)) c.student_start += 1;
    });
    cfg.variant = mae::Variant::None;
    cfg.rounds = 1;
    const mae::SelfDistillResult sd = mae::self_distill(init, data, cfg);
    c.none_match = mae::identical(sd.rounds[1], mae::further_pretrain(init, data, cfg)) ? 0.0 : 1.0;
  }

  // the encoder never sees the content of masked positions
  {
    mae::ToySequenceDataset altered = tok.batch.original;
    for (std::size_t r = 0; r < tok.batch.mask.size(); ++r)
      if (tok.batch.mask[r]) altered.tokens[r] = (altered.tokens[r] + 1) % static_cast<int>(altered.vocab);
    ad::Tape tape;
    const mae::BoundModel m = mae::bind(tape, tok.student, false);
    const Matrix a = mae::encode(tape, m, tok.batch.original, tok.batch.mask).value();
    const Matrix b = mae::encode(tape, m, altered, tok.batch.mask).value();
    c.masked_input = max_abs(a - b);
  }

  {
    std::stringstream buf;
    const mae::ToyModelParams p = mae::with_fresh_head(pat.student, 3, 4);
    mae::write_checkpoint(buf, p);
    c.checkpoint = mae::identical(mae::read_checkpoint(buf), p) ? 0.0 : 1.0;
  }

  {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 2000; ++i) {
      const auto z = mae::sample_mask(4, 0.05, rng);
      if (std::count(z.begin(), z.end(), 1) == 0) c.empty_masks += 1;
    }
  }
  return c;
}

inline double csv_roundtrip_failures() {
  std::mt19937_64 rng(23);
  double failures = 0;
  for (int i = 0; i < 2000; ++i) {
    const double x = (mae::uniform01(rng) - 0.5) * std::pow(10.0, static_cast<double>(mae::uniform_index(rng, 40)) - 20.0);
    if (std::strtod(format_double(x).c_str(), nullptr) != x) failures += 1;
  }
  return failures;
}

inline double config_rejection_failures() {
  double failures = 0;
  try {
    parse_config_text("mode = theory\nno_such_key = 1\n");
    failures += 1;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::ConfigError || std::string(e.what()).find("line 2") == std::string::npos) failures += 1;
  }
  return failures;
}

inline double stratified_spread() {
  mae::ToyTaskConfig tc;
  tc.n_train = 37;
  const mae::ToyTask task = mae::make_toy_task(tc, 3);
  double spread = 0;
  for (Index n : {4, 7, 10, 23, 37}) {
    const auto rows = mae::stratified_indices(task.train, n, static_cast<std::uint64_t>(n));
    std::vector<Index> counts(static_cast<std::size_t>(task.train.classes), 0);
    for (Index r : rows) ++counts[static_cast<std::size_t>(task.train.labels[static_cast<std::size_t>(r)])];
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    spread = std::max(spread, static_cast<double>(*hi - *lo));
  }
  return spread;
}

}  // namespace verify_detail

/// Runs every check. `instances` random theory instances are drawn from a
/// fixed stream, so the report is reproducible.
inline std::vector<CheckResult> verify_checks(Fault fault = Fault::None, int instances = 12) {
  using namespace verify_detail;
  TheoryChecks t;
  std::mt19937_64 rng(0x7e51f1);
  for (const FamilyInstance& f : instance_family(instances, 0x5eed))
    theory_checks(t, f, fault, rng);
  const ToyChecks m = toy_checks(fault);

  std::vector<CheckResult> r = {
      {"svd_reconstruction", "spectral_core", t.reconstruction, 1e-10},
      {"left_basis_orthonormal", "spectral_core", t.left_orth, 1e-10},
      {"right_basis_orthonormal", "spectral_core", t.right_orth, 1e-10},
      {"singular_values_non_increasing", "spectral_core", t.sigma_order, 0.0},
      {"null_projection_idempotent", "spectral_core", t.null_idempotent, 1e-12},
      {"null_projection_annihilated", "spectral_core", t.null_annihilated, 1e-12},
      {"closed_form_vs_ridge_oracle", "distill_dynamics", t.distill_oracle, 1e-8},
      {"dense_vs_spectral_ridge_step", "distill_dynamics", t.dense_vs_spectral, 1e-8},
      {"null_space_coefficients_zero", "distill_dynamics", t.null_zero, 1e-10},
      {"teacher_propagation", "distill_dynamics", t.teacher, 1e-9},
      {"alpha_strictly_shrinks", "distill_dynamics", t.decay_ratio, 1.0, true},
      {"closed_form_vs_euler_oracle", "finetune_flow", t.flow_oracle, 1e-3},
      {"null_space_unchanged_by_flow", "finetune_flow", t.flow_null, 1e-9},
      {"euler_loss_non_increasing", "finetune_flow", t.euler_increase, 0.0},
      {"long_horizon_interpolates", "finetune_flow", t.interpolation, 1e-12},
      {"zeta_strictly_decreasing", "bound_lab", t.zeta_bad, 0.0},
      {"psi_strictly_decreasing", "bound_lab", t.psi_bad, 0.0},
      {"degenerate_ties_after_round_one", "bound_lab", t.degenerate_bad, 0.0},
      {"degenerate_first_drop_equals_B", "bound_lab", t.degenerate_drop, 1e-10},
      {"first_drop_decomposition", "bound_lab", t.drop_identity, 1e-10},
      {"zeta_equals_psi_minus_G2", "bound_lab", t.zeta_dual, 1e-10},
      {"witness_attains_exact_bound", "bound_lab", t.witness, 1e-10},
      {"psi_gap_is_cross_term", "bound_lab", t.cross_gap, 1e-10},
      {"distance_within_attained_bound", "bound_lab", t.distance_excess, 1e-12},
      {"remainder_reference_value", "bound_lab",
       std::abs(generalization_remainder(1.0, BoundInputs{1.0, 1.0, 2.0 * std::exp(-2.0), 1.0}, 1, 4) - 1.5), 1e-12},
      {"gradient_l1_token", "mae_toy", m.grad_l1_token, 1e-4},
      {"gradient_l1_patch", "mae_toy", m.grad_l1_patch, 1e-4},
      {"gradient_representation", "mae_toy", m.grad_repr, 1e-4},
      {"gradient_prediction", "mae_toy", m.grad_pred, 1e-4},
      {"gradient_weight_l2", "mae_toy", m.grad_wl2, 1e-4},
      {"gradient_weight_mars", "mae_toy", m.grad_mars, 1e-4},
      {"gradient_classification", "mae_toy", m.grad_cls, 1e-4},
      {"teacher_gradient_zero", "mae_toy", m.teacher_grad, 0.0},
      {"decoder_gradient_is_l1_only", "mae_toy", m.decoder_l2, 1e-12},
      {"student_starts_at_init", "mae_toy", m.student_start, 0.0},
      {"variant_none_is_further_pretrain", "mae_toy", m.none_match, 0.0},
      {"masked_content_invisible", "mae_toy", m.masked_input, 0.0},
      {"checkpoint_roundtrip_bitwise", "mae_toy", m.checkpoint, 0.0},
      {"mask_never_empty", "mae_toy", m.empty_masks, 0.0},
      {"csv_float_roundtrip", "exp_cli", csv_roundtrip_failures(), 0.0},
      {"config_unknown_key_rejected", "exp_cli", config_rejection_failures(), 0.0},
      {"stratified_class_spread", "exp_cli", stratified_spread(), 1.0},
  };
  return r;
}

inline const std::vector<std::string>& verify_header() {
  static const std::vector<std::string> h = {"mode", "check", "module", "value", "bound", "comparison", "margin", "status"};
  return h;
}

inline RunOutcome run_verify(const ExperimentConfig&, Fault fault = Fault::None) {
  const std::vector<CheckResult> checks = verify_checks(fault);
  RunOutcome out;
  out.mode = Mode::Verify;
  out.table = CsvTable(verify_header());
  std::ostringstream txt;
  txt << "distill-lab verify: " << checks.size() << " checks";
  if (fault != Fault::None) txt << " (injected fault: " << to_string(fault) << ")";
  txt << "\n";
  for (const CheckResult& c : checks) {
    const char* status = c.passed() ? "PASS" : "FAIL";
    if (!c.passed()) ++out.failed_checks;
    out.table.add_row({"verify", c.id, c.module, format_double(c.value), format_double(c.bound), c.strict ? "<" : "<=",
                       format_double(c.margin()), status});
    char line[256];
    std::snprintf(line, sizeof line, "%s  %-17s %-34s value=%-12.4g bound=%s%.3g\n", status, c.module.c_str(),
                  c.id.c_str(), c.value, c.strict ? "<" : "<=", c.bound);
    txt << line;
  }
  txt << (out.failed_checks == 0 ? "all checks passed\n" : std::to_string(out.failed_checks) + " check(s) failed\n");
  out.text_report = txt.str();
  return out;
}

}  // namespace distill_lab::experiment
