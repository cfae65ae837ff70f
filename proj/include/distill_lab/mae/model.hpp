#pragma once

// A one-block transformer-style masked autoencoder. Parameters are kept in
// three named groups: encoder (theta), decoder (phi) and task head (omega).
// Matrices multiply from the right: a layer maps X (rows = positions) to X W.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "distill_lab/autodiff.hpp"
#include "distill_lab/error.hpp"
#include "distill_lab/mae/data.hpp"

namespace distill_lab::mae {

using Vector = Eigen::VectorXd;

struct ModelDims {
  DataMode mode = DataMode::Token;
  Index K = 8;
  Index h = 16;
  Index ffn = 32;
  Index vocab = 32;
  Index patch_dim = 4;
};

struct Tensor {
  std::string name;
  Matrix value;
};

enum class Group { Encoder, Decoder, Head };

struct ToyModelParams {
  ModelDims dims;
  std::vector<Tensor> encoder;
  std::vector<Tensor> decoder;
  std::vector<Tensor> head;

  std::vector<Tensor>& group(Group g) { return g == Group::Encoder ? encoder : g == Group::Decoder ? decoder : head; }
  const std::vector<Tensor>& group(Group g) const {
    return g == Group::Encoder ? encoder : g == Group::Decoder ? decoder : head;
  }

  const Matrix& at(Group g, std::string_view name) const {
    for (const Tensor& t : group(g))
      if (t.name == name) return t.value;
    throw Error(ErrorCode::ShapeMismatch, "no tensor named '" + std::string(name) + "'");
  }
  Matrix& at(Group g, std::string_view name) {
    return const_cast<Matrix&>(static_cast<const ToyModelParams&>(*this).at(g, name));
  }

  Index head_classes() const { return head.empty() ? 0 : head.front().value.cols(); }

  bool all_finite() const {
    for (Group g : {Group::Encoder, Group::Decoder, Group::Head})
      for (const Tensor& t : group(g))
        if (!t.value.allFinite()) return false;
    return true;
  }
};

/// Bitwise equality of every tensor (names, shapes and payloads).
inline bool identical(const std::vector<Tensor>& a, const std::vector<Tensor>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Matrix& x = a[i].value;
    const Matrix& y = b[i].value;
    if (a[i].name != b[i].name || x.rows() != y.rows() || x.cols() != y.cols()) return false;
    if (!std::equal(x.data(), x.data() + x.size(), y.data(),
                    [](double u, double v) { return std::bit_cast<std::uint64_t>(u) == std::bit_cast<std::uint64_t>(v); }))
      return false;
  }
  return true;
}

inline bool identical(const ToyModelParams& a, const ToyModelParams& b) {
  return identical(a.encoder, b.encoder) && identical(a.decoder, b.decoder) && identical(a.head, b.head);
}

namespace detail {

inline Matrix normal_matrix(std::mt19937_64& rng, Index rows, Index cols, double scale) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = scale * standard_normal(rng);
  return m;
}

inline double fan_in_scale(Index fan_in) { return 1.0 / std::sqrt(static_cast<double>(fan_in)); }

}  // namespace detail

/// Fresh encoder and decoder; the head is attached later for fine-tuning.
inline ToyModelParams init_params(const ModelDims& dims, std::uint64_t seed) {
  require(dims.K >= 2 && dims.h >= 1 && dims.ffn >= 1, ErrorCode::ShapeMismatch, "bad model dimensions");
  std::mt19937_64 rng(seed);
  ToyModelParams p;
  p.dims = dims;
  const Index h = dims.h;
  auto add = [&](std::vector<Tensor>& grp, std::string name, Matrix m) { grp.push_back(Tensor{std::move(name), std::move(m)}); };
  if (dims.mode == DataMode::Token) {
    require(dims.vocab >= 2, ErrorCode::ShapeMismatch, "vocabulary too small");
    add(p.encoder, "embed", detail::normal_matrix(rng, dims.vocab, h, detail::fan_in_scale(h)));
  } else {
    require(dims.patch_dim >= 1, ErrorCode::ShapeMismatch, "patch dimension must be positive");
    add(p.encoder, "patch_w", detail::normal_matrix(rng, dims.patch_dim, h, detail::fan_in_scale(dims.patch_dim)));
    add(p.encoder, "patch_b", Matrix::Zero(1, h));
  }
  add(p.encoder, "mask_token", detail::normal_matrix(rng, 1, h, detail::fan_in_scale(h)));
  add(p.encoder, "pos", detail::normal_matrix(rng, dims.K, h, detail::fan_in_scale(h)));
  for (const char* name : {"wq", "wk", "wv", "wo"}) add(p.encoder, name, detail::normal_matrix(rng, h, h, detail::fan_in_scale(h)));
  add(p.encoder, "ff1_w", detail::normal_matrix(rng, h, dims.ffn, detail::fan_in_scale(h)));
  add(p.encoder, "ff1_b", Matrix::Zero(1, dims.ffn));
  add(p.encoder, "ff2_w", detail::normal_matrix(rng, dims.ffn, h, detail::fan_in_scale(dims.ffn)));
  add(p.encoder, "ff2_b", Matrix::Zero(1, h));
  const Index out = dims.mode == DataMode::Token ? dims.vocab : dims.patch_dim;
  add(p.decoder, "dec_w", detail::normal_matrix(rng, h, out, detail::fan_in_scale(h)));
  add(p.decoder, "dec_b", Matrix::Zero(1, out));
  return p;
}

/// Drops the decoder and attaches a randomly initialised C-way head.
inline ToyModelParams with_fresh_head(const ToyModelParams& pretrained, Index classes, std::uint64_t seed) {
  require(classes >= 1, ErrorCode::ShapeMismatch, "head needs at least one class");
  ToyModelParams p;
  p.dims = pretrained.dims;
  p.encoder = pretrained.encoder;
  std::mt19937_64 rng(seed);
  p.head.push_back(Tensor{"head_w", detail::normal_matrix(rng, p.dims.h, classes, detail::fan_in_scale(p.dims.h))});
  p.head.push_back(Tensor{"head_b", Matrix::Zero(1, classes)});
  return p;
}

/// Concatenation of all tensors of the listed groups (row-major per tensor).
inline Vector flatten(const ToyModelParams& p, std::span<const Group> groups) {
  Index total = 0;
  for (Group g : groups)
    for (const Tensor& t : p.group(g)) total += t.value.size();
  Vector out(total);
  Index at = 0;
  for (Group g : groups)
    for (const Tensor& t : p.group(g))
      for (Index i = 0; i < t.value.rows(); ++i)
        for (Index j = 0; j < t.value.cols(); ++j) out(at++) = t.value(i, j);
  return out;
}

inline void unflatten(ToyModelParams& p, std::span<const Group> groups, const Vector& flat) {
  Index at = 0;
  for (Group g : groups)
    for (Tensor& t : p.group(g))
      for (Index i = 0; i < t.value.rows(); ++i)
        for (Index j = 0; j < t.value.cols(); ++j) {
          require(at < flat.size(), ErrorCode::ShapeMismatch, "flat vector too short");
          t.value(i, j) = flat(at++);
        }
  require(at == flat.size(), ErrorCode::ShapeMismatch, "flat vector too long");
}

inline constexpr Group kAllGroups[] = {Group::Encoder, Group::Decoder, Group::Head};

/// Parameters placed on a tape.
struct BoundModel {
  const ToyModelParams* params = nullptr;
  std::vector<ad::Var> encoder;
  std::vector<ad::Var> decoder;
  std::vector<ad::Var> head;

  const std::vector<ad::Var>& group(Group g) const {
    return g == Group::Encoder ? encoder : g == Group::Decoder ? decoder : head;
  }

  ad::Var get(Group g, std::string_view name) const {
    const auto& tensors = params->group(g);
    for (std::size_t i = 0; i < tensors.size(); ++i)
      if (tensors[i].name == name) return group(g)[i];
    throw Error(ErrorCode::ShapeMismatch, "no tensor named '" + std::string(name) + "'");
  }
};

inline BoundModel bind(ad::Tape& tape, const ToyModelParams& p, bool requires_grad) {
  BoundModel b;
  b.params = &p;
  for (const Tensor& t : p.encoder) b.encoder.push_back(tape.leaf(t.value, requires_grad));
  for (const Tensor& t : p.decoder) b.decoder.push_back(tape.leaf(t.value, requires_grad));
  for (const Tensor& t : p.head) b.head.push_back(tape.leaf(t.value, requires_grad));
  return b;
}

/// Gradients of the leaves of `b`, laid out like the parameter groups.
inline ToyModelParams collect_gradients(const ad::Tape& tape, const BoundModel& b) {
  ToyModelParams g;
  g.dims = b.params->dims;
  for (Group grp : kAllGroups) {
    const auto& tensors = b.params->group(grp);
    const auto& vars = b.group(grp);
    for (std::size_t i = 0; i < tensors.size(); ++i) g.group(grp).push_back(Tensor{tensors[i].name, tape.grad(vars[i])});
  }
  return g;
}

/// Per-position encoder output f_theta(x), (B*K) x h. Positions flagged in
/// `mask` (when non-empty) are replaced by the learned mask embedding.
inline ad::Var encode(ad::Tape& tape, const BoundModel& m, const ToySequenceDataset& x,
                      std::span<const std::uint8_t> mask = {}) {
  const ModelDims& dims = m.params->dims;
  require(x.mode == dims.mode, ErrorCode::ModeMismatch, "batch mode does not match the model");
  require(x.K == dims.K, ErrorCode::ShapeMismatch, "sequence length does not match the model");
  ad::Var e;
  if (dims.mode == DataMode::Token) {
    e = ad::gather_rows(m.get(Group::Encoder, "embed"), x.tokens);
  } else {
    e = ad::add_row(ad::matmul(tape.constant(x.patches), m.get(Group::Encoder, "patch_w")),
                    m.get(Group::Encoder, "patch_b"));
  }
  if (!mask.empty()) e = ad::replace_rows(e, m.get(Group::Encoder, "mask_token"), mask);
  const ad::Var h0 = ad::add_tiled(e, m.get(Group::Encoder, "pos"));
  const ad::Var q = ad::matmul(h0, m.get(Group::Encoder, "wq"));
  const ad::Var k = ad::matmul(h0, m.get(Group::Encoder, "wk"));
  const ad::Var v = ad::matmul(h0, m.get(Group::Encoder, "wv"));
  const ad::Var att = ad::block_attention(q, k, v, dims.K);
  const ad::Var h1 = ad::add(h0, ad::matmul(att, m.get(Group::Encoder, "wo")));
  const ad::Var hidden = ad::tanh(ad::add_row(ad::matmul(h1, m.get(Group::Encoder, "ff1_w")), m.get(Group::Encoder, "ff1_b")));
  const ad::Var ff = ad::add_row(ad::matmul(hidden, m.get(Group::Encoder, "ff2_w")), m.get(Group::Encoder, "ff2_b"));
  return ad::add(h1, ff);
}

/// Decoder g_phi: vocabulary logits (token) or patch means (patch) per position.
inline ad::Var decode(const BoundModel& m, const ad::Var& hidden) {
  require(!m.decoder.empty(), ErrorCode::ShapeMismatch, "model has no decoder");
  return ad::add_row(ad::matmul(hidden, m.get(Group::Decoder, "dec_w")), m.get(Group::Decoder, "dec_b"));
}

/// Task head h_omega on the mean-pooled representation: B x C logits.
inline ad::Var classify(const BoundModel& m, const ad::Var& hidden) {
  require(!m.head.empty(), ErrorCode::ShapeMismatch, "model has no task head");
  const ad::Var pooled = ad::block_mean_rows(hidden, m.params->dims.K);
  return ad::add_row(ad::matmul(pooled, m.get(Group::Head, "head_w")), m.get(Group::Head, "head_b"));
}

/// Encoder representation as a plain matrix (no gradient bookkeeping).
inline Matrix representation(const ToyModelParams& p, const ToySequenceDataset& x) {
  ad::Tape tape;
  const BoundModel m = bind(tape, p, false);
  return encode(tape, m, x).value();
}

enum class DistanceNorm { L2, Mars };

inline std::string_view to_string(DistanceNorm n) { return n == DistanceNorm::L2 ? "l2" : "mars"; }

/// Maximum absolute row sum of a matrix.
inline double mars_norm(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff(); }

/// Distance over every group present in both parameter sets. l2 is the
/// Euclidean norm of the concatenated difference; mars sums the maximum
/// absolute row sum of each tensor's difference.
inline double weight_distance(const ToyModelParams& a, const ToyModelParams& b, DistanceNorm norm) {
  double sq = 0.0;
  double mars = 0.0;
  bool any = false;
  for (Group g : kAllGroups) {
    const auto& ta = a.group(g);
    const auto& tb = b.group(g);
    if (ta.empty() || tb.empty()) continue;
    require(ta.size() == tb.size(), ErrorCode::ShapeMismatch, "parameter groups differ in tensor count");
    for (std::size_t i = 0; i < ta.size(); ++i) {
      require(ta[i].name == tb[i].name && ta[i].value.rows() == tb[i].value.rows() &&
                  ta[i].value.cols() == tb[i].value.cols(),
              ErrorCode::ShapeMismatch, "tensor '" + ta[i].name + "' differs in shape");
      const Matrix diff = ta[i].value - tb[i].value;
      sq += diff.squaredNorm();
      mars += mars_norm(diff);
    }
    any = true;
  }
  require(any, ErrorCode::ShapeMismatch, "parameter sets share no group");
  return norm == DistanceNorm::L2 ? std::sqrt(sq) : mars;
}

/// Encoder-only distance, the quantity tracked across pipelines.
inline double encoder_distance(const ToyModelParams& a, const ToyModelParams& b, DistanceNorm norm) {
  ToyModelParams ea;
  ToyModelParams eb;
  ea.encoder = a.encoder;
  eb.encoder = b.encoder;
  return weight_distance(ea, eb, norm);
}

}  // namespace distill_lab::mae
