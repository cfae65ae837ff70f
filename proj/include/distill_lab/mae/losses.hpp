#pragma once

// Masking, the masked auto-encoding loss and the distillation losses.

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "distill_lab/autodiff.hpp"
#include "distill_lab/error.hpp"
#include "distill_lab/mae/data.hpp"
#include "distill_lab/mae/model.hpp"

namespace distill_lab::mae {

/// Independent Bernoulli(gamma) mask over K positions, redrawn until at least
/// one position is masked.
inline std::vector<std::uint8_t> sample_mask(Index K, double gamma, std::mt19937_64& rng) {
  require(gamma > 0.0 && gamma < 1.0, ErrorCode::DomainError, "masking probability must lie in (0, 1)");
  require(K >= 1, ErrorCode::ShapeMismatch, "K must be positive");
  std::vector<std::uint8_t> z(static_cast<std::size_t>(K));
  for (;;) {
    int count = 0;
    for (auto& bit : z) {
      bit = uniform01(rng) < gamma ? 1 : 0;
      count += bit;
    }
    if (count > 0) return z;
  }
}

struct MaskedBatch {
  ToySequenceDataset original;
  std::vector<std::uint8_t> mask;  // B*K flags
  std::vector<int> counts;         // Z per item
  ToySequenceDataset masked;       // masked tokens carry id V; masked patches are zero

  Index size() const { return original.size(); }

  void validate() const {
    require(static_cast<Index>(mask.size()) == original.size() * original.K, ErrorCode::ShapeMismatch, "mask size");
    require(static_cast<Index>(counts.size()) == original.size(), ErrorCode::ShapeMismatch, "count size");
    for (int z : counts) require(z >= 1, ErrorCode::ShapeMismatch, "every item needs a masked position");
  }
};

/// Token id used in MaskedBatch::masked for masked positions.
inline int mask_token_id(const ToySequenceDataset& data) { return static_cast<int>(data.vocab); }

inline MaskedBatch make_masked_batch(const ToySequenceDataset& items, std::vector<std::uint8_t> mask) {
  MaskedBatch b;
  b.original = items;
  b.mask = std::move(mask);
  const Index K = items.K;
  require(static_cast<Index>(b.mask.size()) == items.size() * K, ErrorCode::ShapeMismatch, "mask size");
  b.counts.assign(static_cast<std::size_t>(items.size()), 0);
  b.masked = items;
  b.masked.labels.clear();
  for (Index r = 0; r < items.size() * K; ++r) {
    if (!b.mask[static_cast<std::size_t>(r)]) continue;
    ++b.counts[static_cast<std::size_t>(r / K)];
    if (items.mode == DataMode::Token) {
      b.masked.tokens[static_cast<std::size_t>(r)] = mask_token_id(items);
    } else {
      b.masked.patches.row(r).setZero();
    }
  }
  b.validate();
  return b;
}

inline MaskedBatch sample_masked_batch(const ToySequenceDataset& items, double gamma, std::mt19937_64& rng) {
  std::vector<std::uint8_t> mask;
  mask.reserve(static_cast<std::size_t>(items.size() * items.K));
  for (Index j = 0; j < items.size(); ++j) {
    const auto z = sample_mask(items.K, gamma, rng);
    mask.insert(mask.end(), z.begin(), z.end());
  }
  return make_masked_batch(items, std::move(mask));
}

enum class Variant { Representation, Prediction, WeightL2, WeightMars, None, DistillOnly };

inline std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Representation: return "representation";
    case Variant::Prediction: return "prediction";
    case Variant::WeightL2: return "weight-l2";
    case Variant::WeightMars: return "weight-mars";
    case Variant::None: return "none";
    case Variant::DistillOnly: return "distill-only";
  }
  return "unknown";
}

inline Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::Representation, Variant::Prediction, Variant::WeightL2, Variant::WeightMars, Variant::None,
                    Variant::DistillOnly})
    if (to_string(v) == name) return v;
  if (name == "full") return Variant::Representation;
  throw Error(ErrorCode::UnknownVariant, "unknown distillation variant '" + std::string(name) + "'");
}

/// Whether L1 (the MAE term) is part of the objective.
inline bool uses_mae_term(Variant v) { return v != Variant::DistillOnly; }
/// Whether L2 (a distillation term) is part of the objective.
inline bool uses_distill_term(Variant v) { return v != Variant::None; }

/// Per-position weights z_k / (Z * B): averaging over items of the Z-normalised sum.
inline std::vector<double> mae_weights(const MaskedBatch& batch) {
  const Index K = batch.original.K;
  const double B = static_cast<double>(batch.size());
  std::vector<double> w(batch.mask.size(), 0.0);
  for (std::size_t r = 0; r < w.size(); ++r)
    if (batch.mask[r]) w[r] = 1.0 / (static_cast<double>(batch.counts[r / static_cast<std::size_t>(K)]) * B);
  return w;
}

/// L1 on the tape: reconstruction of masked positions from the masked input.
inline ad::Var mae_loss_var(ad::Tape& tape, const BoundModel& m, const MaskedBatch& batch) {
  require(batch.original.mode == m.params->dims.mode, ErrorCode::ModeMismatch, "batch mode does not match the model");
  const ad::Var out = decode(m, encode(tape, m, batch.original, batch.mask));
  const std::vector<double> w = mae_weights(batch);
  if (batch.original.mode == DataMode::Token) return ad::weighted_cross_entropy(out, batch.original.tokens, w);
  return ad::weighted_squared_error(out, batch.original.patches, w);
}

namespace detail {

inline void check_same_shapes(const ToyModelParams& a, const ToyModelParams& b) {
  require(a.dims.mode == b.dims.mode, ErrorCode::ShapeMismatch, "student and teacher differ in mode");
  for (Group g : {Group::Encoder, Group::Decoder}) {
    const auto& ta = a.group(g);
    const auto& tb = b.group(g);
    require(ta.size() == tb.size(), ErrorCode::ShapeMismatch, "student and teacher differ in tensor count");
    for (std::size_t i = 0; i < ta.size(); ++i)
      require(ta[i].name == tb[i].name && ta[i].value.rows() == tb[i].value.rows() &&
                  ta[i].value.cols() == tb[i].value.cols(),
              ErrorCode::ShapeMismatch, "student and teacher differ in tensor '" + ta[i].name + "'");
  }
}

}  // namespace detail

/// L2 on the tape. Every teacher quantity passes through stop_gradient, so
/// the teacher leaves never receive gradient even when bound as variables.
inline ad::Var distill_loss_var(ad::Tape& tape, const BoundModel& student, const BoundModel& teacher,
                                const MaskedBatch& batch, Variant variant) {
  require(variant != Variant::None, ErrorCode::UnknownVariant, "variant 'none' has no distillation loss");
  detail::check_same_shapes(*student.params, *teacher.params);
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  switch (variant) {
    case Variant::Representation:
    case Variant::DistillOnly: {
      const ad::Var hs = encode(tape, student, batch.original);
      const ad::Var ht = ad::stop_gradient(encode(tape, teacher, batch.original));
      // averaged over positions as well, matching the per-position normalisation of L1
      return ad::scale(ad::sum_squared_difference(hs, ht), inv_b / static_cast<double>(batch.original.K));
    }
    case Variant::Prediction: {
      const ad::Var ps = decode(student, encode(tape, student, batch.original, batch.mask));
      const ad::Var pt = ad::stop_gradient(decode(teacher, encode(tape, teacher, batch.original, batch.mask)));
      if (batch.original.mode == DataMode::Token) return ad::scale(ad::kl_rows(pt, ps), inv_b);
      return ad::scale(ad::sum_squared_difference(ps, pt), inv_b);
    }
    case Variant::WeightL2:
    case Variant::WeightMars: {
      std::vector<ad::Var> terms;
      for (std::size_t i = 0; i < student.encoder.size(); ++i) {
        const ad::Var t = ad::stop_gradient(teacher.encoder[i]);
        terms.push_back(variant == Variant::WeightL2 ? ad::sum_squared_difference(student.encoder[i], t)
                                                     : ad::max_abs_row_sum_difference(student.encoder[i], t));
      }
      return ad::sum_scalars(terms);
    }
    case Variant::None: break;
  }
  throw Error(ErrorCode::UnknownVariant, "unhandled variant");
}

inline double mae_loss(const ToyModelParams& params, const MaskedBatch& batch) {
  ad::Tape tape;
  const BoundModel m = bind(tape, params, false);
  return mae_loss_var(tape, m, batch).scalar();
}

inline double distill_loss(const ToyModelParams& student, const ToyModelParams& teacher, const MaskedBatch& batch,
                           Variant variant) {
  ad::Tape tape;
  const BoundModel s = bind(tape, student, false);
  const BoundModel t = bind(tape, teacher, false);
  return distill_loss_var(tape, s, t, batch, variant).scalar();
}

/// Mean cross-entropy of the task head over a labeled set (unmasked input).
inline ad::Var classification_loss_var(ad::Tape& tape, const BoundModel& m, const ToySequenceDataset& data) {
  require(data.labeled(), ErrorCode::ShapeMismatch, "classification needs labels");
  const ad::Var logits = classify(m, encode(tape, m, data));
  const std::vector<double> w(data.labels.size(), 1.0 / static_cast<double>(data.size()));
  return ad::weighted_cross_entropy(logits, data.labels, w);
}

}  // namespace distill_lab::mae
