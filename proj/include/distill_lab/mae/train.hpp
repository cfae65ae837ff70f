#pragma once

// Further pre-training, multi-round self-distillation, fine-tuning with a
// task head, and a finite-difference gradient checker. All training is plain
// gradient descent with a fixed step.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "distill_lab/autodiff.hpp"
#include "distill_lab/error.hpp"
#include "distill_lab/mae/data.hpp"
#include "distill_lab/mae/losses.hpp"
#include "distill_lab/mae/model.hpp"

namespace distill_lab::mae {

struct TrainConfig {
  double gamma = 0.3;
  double lr_pretrain = 0.05;
  double lr_finetune = 0.1;
  int steps_pretrain = 300;
  int steps_finetune = 100;
  Index batch = 16;
  int rounds = 1;  // T'
  Variant variant = Variant::Representation;
  double distill_scale = 1.0;  // weight on L2
  std::uint64_t seed = 0;

  void validate() const {
    require(gamma > 0.0 && gamma < 1.0, ErrorCode::DomainError, "gamma must lie in (0, 1)");
    require(lr_pretrain >= 0.0 && lr_finetune >= 0.0, ErrorCode::DomainError, "learning rates must be non-negative");
    require(steps_pretrain >= 0 && steps_finetune >= 0, ErrorCode::DomainError, "step counts must be non-negative");
    require(batch >= 1, ErrorCode::DomainError, "batch size must be positive");
    require(rounds >= 0, ErrorCode::DomainError, "rounds must be non-negative");
    require(distill_scale >= 0.0 && std::isfinite(distill_scale), ErrorCode::DomainError, "distill scale must be finite");
  }
};

/// Rows of one minibatch: all rows in order when B >= n, otherwise B distinct
/// rows from a partial shuffle.
inline std::vector<Index> sample_rows(Index n, Index batch, std::mt19937_64& rng) {
  std::vector<Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), Index{0});
  if (batch >= n) return rows;
  for (Index i = 0; i < batch; ++i) {
    const auto j = static_cast<Index>(i + static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(n - i))));
    std::swap(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(j)]);
  }
  rows.resize(static_cast<std::size_t>(batch));
  return rows;
}

inline MaskedBatch next_batch(const ToySequenceDataset& data, const TrainConfig& cfg, std::mt19937_64& rng) {
  const std::vector<Index> rows = sample_rows(data.size(), cfg.batch, rng);
  return sample_masked_batch(data.subset(rows), cfg.gamma, rng);
}

/// p -= lr * g over the listed groups.
inline void descend(ToyModelParams& p, const ToyModelParams& g, double lr, std::span<const Group> groups) {
  for (Group grp : groups) {
    auto& tensors = p.group(grp);
    const auto& grads = g.group(grp);
    require(tensors.size() == grads.size(), ErrorCode::ShapeMismatch, "gradient layout mismatch");
    for (std::size_t i = 0; i < tensors.size(); ++i) tensors[i].value -= lr * grads[i].value;
  }
}

inline void require_finite_loss(double loss, int step, const char* stage) {
  require(std::isfinite(loss), ErrorCode::NonFiniteLoss,
          std::string(stage) + ": non-finite loss at step " + std::to_string(step));
}

inline constexpr Group kPretrainGroups[] = {Group::Encoder, Group::Decoder};
inline constexpr Group kFinetuneGroups[] = {Group::Encoder, Group::Head};

/// Seed of the minibatch/mask stream; every pre-training stage draws the same
/// sequence of batches and masks.
inline std::uint64_t pretrain_stream(const TrainConfig& cfg) { return cfg.seed * 0x9e3779b97f4a7c15ULL + 0x5eed; }

/// Gradient descent on L1 alone.
inline ToyModelParams further_pretrain(const ToyModelParams& init, const ToySequenceDataset& data,
                                       const TrainConfig& cfg, std::vector<double>* losses = nullptr) {
  cfg.validate();
  data.validate();
  ToyModelParams p = init;
  p.head.clear();
  std::mt19937_64 rng(pretrain_stream(cfg));
  for (int step = 0; step < cfg.steps_pretrain; ++step) {
    const MaskedBatch batch = next_batch(data, cfg, rng);
    ad::Tape tape;
    const BoundModel m = bind(tape, p, true);
    const ad::Var loss = mae_loss_var(tape, m, batch);
    require_finite_loss(loss.scalar(), step, "further_pretrain");
    if (losses != nullptr) losses->push_back(loss.scalar());
    tape.backward(loss);
    descend(p, collect_gradients(tape, m), cfg.lr_pretrain, kPretrainGroups);
  }
  return p;
}

struct StepGradients {
  ToyModelParams grads;  // encoder: d(L1 + s L2)/dtheta, decoder: dL1/dphi
  double l1 = 0.0;
  double l2 = 0.0;  // unscaled distillation loss
};

/// Gradients of one self-distillation step. The decoder only ever sees the
/// gradient of L1; when L2 reaches the decoder (prediction matching) a second
/// reverse sweep over L1 alone supplies it.
inline StepGradients distill_step_gradients(const ToyModelParams& student, const ToyModelParams& teacher,
                                            const MaskedBatch& batch, const TrainConfig& cfg) {
  ad::Tape tape;
  const BoundModel s = bind(tape, student, true);
  const BoundModel t = bind(tape, teacher, false);
  std::vector<ad::Var> terms;
  StepGradients out;
  ad::Var l1;
  if (uses_mae_term(cfg.variant)) {
    l1 = mae_loss_var(tape, s, batch);
    out.l1 = l1.scalar();
    terms.push_back(l1);
  }
  if (uses_distill_term(cfg.variant)) {
    const ad::Var l2 = distill_loss_var(tape, s, t, batch, cfg.variant);
    out.l2 = l2.scalar();
    terms.push_back(ad::scale(l2, cfg.distill_scale));
  }
  const ad::Var total = ad::sum_scalars(terms);
  if (!std::isfinite(total.scalar())) {
    out.l1 = out.l2 = total.scalar();
    return out;
  }
  tape.backward(total);
  out.grads = collect_gradients(tape, s);
  if (cfg.variant == Variant::Prediction) {
    tape.backward(l1);
    const ToyModelParams only_l1 = collect_gradients(tape, s);
    out.grads.decoder = only_l1.decoder;
  } else if (!uses_mae_term(cfg.variant)) {
    for (Tensor& g : out.grads.decoder) g.value.setZero();
  }
  return out;
}

struct SelfDistillResult {
  /// rounds[0] is the further pre-trained teacher, rounds[t] the student of round t.
  std::vector<ToyModelParams> rounds;
  const ToyModelParams& final_params() const { return rounds.back(); }
};

/// Called with (round, student) right before the round's first update.
using RoundObserver = std::function<void(int, const ToyModelParams&)>;

/// Round 0 is further_pretrain from init; each later round restarts the
/// student at init and trains it on L1 + s L2 against the previous round.
inline SelfDistillResult self_distill(const ToyModelParams& init, const ToySequenceDataset& data,
                                      const TrainConfig& cfg, const RoundObserver& observer = {}) {
  cfg.validate();
  require(cfg.rounds >= 1, ErrorCode::DomainError, "self-distillation needs at least one round");
  SelfDistillResult result;
  result.rounds.push_back(further_pretrain(init, data, cfg));
  for (int round = 1; round <= cfg.rounds; ++round) {
    const ToyModelParams& teacher = result.rounds.back();
    ToyModelParams student = init;
    student.head.clear();
    if (observer) observer(round, student);
    std::mt19937_64 rng(pretrain_stream(cfg));
    for (int step = 0; step < cfg.steps_pretrain; ++step) {
      const MaskedBatch batch = next_batch(data, cfg, rng);
      const StepGradients g = distill_step_gradients(student, teacher, batch, cfg);
      require_finite_loss(g.l1 + g.l2, step, "self_distill");
      descend(student, g.grads, cfg.lr_pretrain, kPretrainGroups);
    }
    result.rounds.push_back(std::move(student));
  }
  return result;
}

struct FinetuneMetrics {
  double train_loss = 0.0;
  double test_loss = 0.0;
  double train_accuracy = 0.0;
  double accuracy = 0.0;  // held-out
  double gap = 0.0;       // test_loss - train_loss
};

struct FinetuneResult {
  ToyModelParams params;
  FinetuneMetrics metrics;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

inline Evaluation evaluate_classifier(const ToyModelParams& p, const ToySequenceDataset& data) {
  ad::Tape tape;
  const BoundModel m = bind(tape, p, false);
  const ad::Var logits = classify(m, encode(tape, m, data));
  const std::vector<double> w(data.labels.size(), 1.0 / static_cast<double>(data.size()));
  Evaluation e;
  e.loss = ad::weighted_cross_entropy(logits, data.labels, w).scalar();
  Index correct = 0;
  for (Index j = 0; j < data.size(); ++j) {
    Index best = 0;
    logits.value().row(j).maxCoeff(&best);
    if (best == data.labels[static_cast<std::size_t>(j)]) ++correct;
  }
  e.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  return e;
}

inline std::uint64_t head_seed(const TrainConfig& cfg) { return cfg.seed * 0xd1b54a32d192ed03ULL + 0x4ead; }

/// Full-batch descent on the mean cross-entropy of a fresh head over the encoder.
inline FinetuneResult finetune(const ToyModelParams& pretrained, const ToySequenceDataset& train,
                               const ToySequenceDataset& test, const TrainConfig& cfg) {
  cfg.validate();
  train.validate();
  test.validate();
  require(train.labeled() && test.labeled(), ErrorCode::ShapeMismatch, "fine-tuning needs labeled data");
  FinetuneResult out;
  out.params = with_fresh_head(pretrained, train.classes, head_seed(cfg));
  for (int step = 0; step < cfg.steps_finetune; ++step) {
    ad::Tape tape;
    const BoundModel m = bind(tape, out.params, true);
    const ad::Var loss = classification_loss_var(tape, m, train);
    require_finite_loss(loss.scalar(), step, "finetune");
    tape.backward(loss);
    descend(out.params, collect_gradients(tape, m), cfg.lr_finetune, kFinetuneGroups);
  }
  const Evaluation tr = evaluate_classifier(out.params, train);
  const Evaluation te = evaluate_classifier(out.params, test);
  out.metrics.train_loss = tr.loss;
  out.metrics.train_accuracy = tr.accuracy;
  out.metrics.test_loss = te.loss;
  out.metrics.accuracy = te.accuracy;
  out.metrics.gap = te.loss - tr.loss;
  return out;
}

/// Loss at x; fills *grad with the analytic gradient when grad is non-null.
using LossEvaluator = std::function<double(const Vector& x, Vector* grad)>;

struct GradCheckReport {
  double max_relative_error = 0.0;
  Index checked = 0;
  Index worst_coordinate = -1;
};

/// Denominator floor of the relative error, so coordinates with vanishing
/// gradient are judged on absolute error.
inline constexpr double kGradCheckFloor = 1e-3;

/// Central differences on `samples` random coordinates (all when fewer).
inline GradCheckReport grad_check(const Vector& x, const LossEvaluator& f, double eps, Index samples = 256,
                                  std::uint64_t seed = 1) {
  require(eps >= 1e-6 && eps <= 1e-3, ErrorCode::DomainError, "epsilon must lie in [1e-6, 1e-3]");
  Vector analytic;
  f(x, &analytic);
  require(analytic.size() == x.size(), ErrorCode::ShapeMismatch, "gradient length differs from the parameter count");
  std::vector<Index> coords(static_cast<std::size_t>(x.size()));
  std::iota(coords.begin(), coords.end(), Index{0});
  std::mt19937_64 rng(seed);
  if (samples < x.size()) {
    coords = sample_rows(x.size(), samples, rng);
  }
  GradCheckReport report;
  Vector probe = x;
  for (Index c : coords) {
    const double saved = probe(c);
    probe(c) = saved + eps;
    const double up = f(probe, nullptr);
    probe(c) = saved - eps;
    const double down = f(probe, nullptr);
    probe(c) = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic(c);
    const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
    if (err > report.max_relative_error || report.worst_coordinate < 0) {
      report.max_relative_error = std::max(report.max_relative_error, err);
      report.worst_coordinate = c;
    }
    ++report.checked;
  }
  return report;
}

/// Builds a loss on the tape from bound parameters.
using ModelLoss = std::function<ad::Var(ad::Tape&, const BoundModel&)>;

/// grad_check over the listed groups of a model.
inline GradCheckReport grad_check(const ToyModelParams& params, std::span<const Group> groups, const ModelLoss& loss,
                                  double eps, Index samples = 256, std::uint64_t seed = 1) {
  const std::vector<Group> grp(groups.begin(), groups.end());
  const LossEvaluator f = [&params, &loss, grp](const Vector& x, Vector* grad) {
    ToyModelParams p = params;
    unflatten(p, grp, x);
    ad::Tape tape;
    const BoundModel m = bind(tape, p, grad != nullptr);
    const ad::Var value = loss(tape, m);
    if (grad != nullptr) {
      tape.backward(value);
      *grad = flatten(collect_gradients(tape, m), grp);
    }
    return value.scalar();
  };
  return grad_check(flatten(params, grp), f, eps, samples, seed);
}

}  // namespace distill_lab::mae
