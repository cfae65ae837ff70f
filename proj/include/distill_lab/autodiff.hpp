#pragma once

// Minimal reverse-mode differentiation over dense matrices. A Tape records
// every operation in evaluation order; backward() walks it once in reverse,
// so one gradient costs a constant multiple of one forward pass regardless
// of the parameter count.
//
// Nodes whose inputs are all constants are constants themselves and carry no
// backward closure; stop_gradient() turns any value into such a constant.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "distill_lab/error.hpp"

namespace distill_lab::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

class Tape;

class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  const Matrix& value() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  bool requires_grad() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() { nodes_.reserve(64); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Matrix value, bool requires_grad = true) {
    nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, false, nullptr});
    return Var(this, nodes_.size() - 1);
  }

  Var constant(Matrix value) { return leaf(std::move(value), false); }

  /// Records an op result; `backward` is dropped when no input needs a gradient.
  Var record(Matrix value, bool requires_grad, Backward backward) {
    nodes_.push_back(Node{std::move(value), Matrix(), requires_grad, false,
                          requires_grad ? std::move(backward) : Backward()});
    return Var(this, nodes_.size() - 1);
  }

  const Matrix& value(const Var& v) const { return nodes_.at(v.id()).value; }
  bool requires_grad(const Var& v) const { return nodes_.at(v.id()).requires_grad; }

  /// Gradient of the last backward() root w.r.t. v; zeros when v was not reached.
  Matrix grad(const Var& v) const {
    const Node& node = nodes_.at(v.id());
    if (!node.has_grad) return Matrix::Zero(node.value.rows(), node.value.cols());
    return node.grad;
  }

  /// Adds g into v's gradient buffer (used by op closures).
  template <typename Derived>
  void accumulate(const Var& v, const Eigen::MatrixBase<Derived>& g) {
    Node& node = nodes_[v.id()];
    if (!node.requires_grad) return;
    if (!node.has_grad) {
      node.grad = g;
      node.has_grad = true;
    } else {
      node.grad += g;
    }
  }

  void zero_grad() {
    for (Node& node : nodes_) {
      node.has_grad = false;
      node.grad.resize(0, 0);
    }
  }

  /// Reverse sweep from a 1x1 root. Clears gradients from any earlier sweep.
  void backward(const Var& root) {
    require(root.tape() == this, ErrorCode::ShapeMismatch, "root belongs to another tape");
    require(value(root).size() == 1, ErrorCode::ShapeMismatch, "backward root must be a scalar");
    zero_grad();
    Node& r = nodes_[root.id()];
    if (!r.requires_grad) return;
    r.grad = Matrix::Ones(1, 1);
    r.has_grad = true;
    for (std::size_t i = root.id() + 1; i-- > 0;) {
      Node& node = nodes_[i];
      if (!node.has_grad || !node.backward) continue;
      // Copy: the closure may reallocate nothing, but keeps the buffer stable
      // against accumulate() on this very node in self-referencing ops.
      const Matrix g = node.grad;
      node.backward(*this, g);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad;
    bool has_grad;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

inline const Matrix& Var::value() const { return tape_->value(*this); }
inline bool Var::requires_grad() const { return tape_->requires_grad(*this); }

namespace detail {

inline void same_tape(const Var& a, const Var& b) {
  require(a.tape() != nullptr && a.tape() == b.tape(), ErrorCode::ShapeMismatch, "operands live on different tapes");
}

inline void same_shape(const Var& a, const Var& b, const char* op) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::ShapeMismatch,
          std::string(op) + ": operand shapes differ");
}

/// Row-wise softmax, stabilised by the row maximum.
inline Matrix softmax_rows(const Matrix& logits) {
  Matrix p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp().matrix();
  p.array().colwise() /= p.rowwise().sum().array();
  return p;
}

/// Row-wise log-softmax.
inline Matrix log_softmax_rows(const Matrix& logits) {
  const Eigen::VectorXd mx = logits.rowwise().maxCoeff();
  Matrix shifted = logits.colwise() - mx;
  const Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log().matrix();
  shifted.colwise() -= lse;
  return shifted;
}

}  // namespace detail

inline Var stop_gradient(const Var& a) { return a.tape()->constant(a.value()); }

inline Var matmul(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  require(a.cols() == b.rows(), ErrorCode::ShapeMismatch, "matmul: inner dimensions differ");
  Tape& t = *a.tape();
  return t.record(a.value() * b.value(), a.requires_grad() || b.requires_grad(),
                  [a, b](Tape& tape, const Matrix& g) {
                    if (a.requires_grad()) tape.accumulate(a, g * b.value().transpose());
                    if (b.requires_grad()) tape.accumulate(b, a.value().transpose() * g);
                  });
}

inline Var add(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  detail::same_shape(a, b, "add");
  Tape& t = *a.tape();
  return t.record(a.value() + b.value(), a.requires_grad() || b.requires_grad(),
                  [a, b](Tape& tape, const Matrix& g) {
                    tape.accumulate(a, g);
                    tape.accumulate(b, g);
                  });
}

inline Var sub(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  detail::same_shape(a, b, "sub");
  Tape& t = *a.tape();
  return t.record(a.value() - b.value(), a.requires_grad() || b.requires_grad(),
                  [a, b](Tape& tape, const Matrix& g) {
                    tape.accumulate(a, g);
                    tape.accumulate(b, -g);
                  });
}

inline Var scale(const Var& a, double s) {
  Tape& t = *a.tape();
  return t.record(a.value() * s, a.requires_grad(), [a, s](Tape& tape, const Matrix& g) { tape.accumulate(a, g * s); });
}

/// a (r x c) + row (1 x c) broadcast over rows.
inline Var add_row(const Var& a, const Var& row) {
  detail::same_tape(a, row);
  require(row.rows() == 1 && row.cols() == a.cols(), ErrorCode::ShapeMismatch, "add_row: bias must be 1 x cols");
  Tape& t = *a.tape();
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return t.record(std::move(out), a.requires_grad() || row.requires_grad(), [a, row](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g);
    if (row.requires_grad()) tape.accumulate(row, g.colwise().sum());
  });
}

/// a (B*K x c) + tile (K x c) repeated over the B blocks of K rows.
inline Var add_tiled(const Var& a, const Var& tile) {
  detail::same_tape(a, tile);
  const Index k = tile.rows();
  require(k > 0 && a.rows() % k == 0 && a.cols() == tile.cols(), ErrorCode::ShapeMismatch,
          "add_tiled: rows must be a multiple of the tile height");
  Tape& t = *a.tape();
  Matrix out = a.value();
  for (Index b = 0; b < a.rows() / k; ++b) out.middleRows(b * k, k) += tile.value();
  return t.record(std::move(out), a.requires_grad() || tile.requires_grad(), [a, tile, k](Tape& tape, const Matrix& g) {
    tape.accumulate(a, g);
    if (tile.requires_grad()) {
      Matrix acc = Matrix::Zero(k, g.cols());
      for (Index b = 0; b < g.rows() / k; ++b) acc += g.middleRows(b * k, k);
      tape.accumulate(tile, acc);
    }
  });
}

inline Var tanh(const Var& a) {
  Tape& t = *a.tape();
  Matrix y = a.value().array().tanh().matrix();
  return t.record(y, a.requires_grad(), [a, y](Tape& tape, const Matrix& g) {
    tape.accumulate(a, (g.array() * (1.0 - y.array().square())).matrix());
  });
}

/// out.row(r) = table.row(ids[r]).
inline Var gather_rows(const Var& table, std::span<const int> ids) {
  const Index rows = static_cast<Index>(ids.size());
  Matrix out(rows, table.cols());
  for (Index r = 0; r < rows; ++r) {
    const int id = ids[static_cast<std::size_t>(r)];
    require(id >= 0 && id < table.rows(), ErrorCode::ShapeMismatch, "gather_rows: id out of range");
    out.row(r) = table.value().row(id);
  }
  std::vector<int> idx(ids.begin(), ids.end());
  return table.tape()->record(std::move(out), table.requires_grad(), [table, idx](Tape& tape, const Matrix& g) {
    Matrix acc = Matrix::Zero(table.rows(), table.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) acc.row(idx[r]) += g.row(static_cast<Index>(r));
    tape.accumulate(table, acc);
  });
}

/// out.row(r) = replace[r] ? row : a.row(r).
inline Var replace_rows(const Var& a, const Var& row, std::span<const std::uint8_t> replace) {
  detail::same_tape(a, row);
  require(row.rows() == 1 && row.cols() == a.cols(), ErrorCode::ShapeMismatch, "replace_rows: row must be 1 x cols");
  require(static_cast<Index>(replace.size()) == a.rows(), ErrorCode::ShapeMismatch, "replace_rows: flag count");
  Matrix out = a.value();
  std::vector<std::uint8_t> flags(replace.begin(), replace.end());
  for (Index r = 0; r < out.rows(); ++r)
    if (flags[static_cast<std::size_t>(r)]) out.row(r) = row.value().row(0);
  return a.tape()->record(std::move(out), a.requires_grad() || row.requires_grad(),
                          [a, row, flags](Tape& tape, const Matrix& g) {
                            Matrix ga = g;
                            Matrix grow = Matrix::Zero(1, g.cols());
                            for (Index r = 0; r < g.rows(); ++r) {
                              if (flags[static_cast<std::size_t>(r)]) {
                                grow += g.row(r);
                                ga.row(r).setZero();
                              }
                            }
                            if (a.requires_grad()) tape.accumulate(a, ga);
                            if (row.requires_grad()) tape.accumulate(row, grow);
                          });
}

/// Single-head attention applied independently to each block of `block` rows:
/// out_b = softmax(q_b k_b^T / sqrt(h)) v_b.
inline Var block_attention(const Var& q, const Var& k, const Var& v, Index block) {
  detail::same_tape(q, k);
  detail::same_tape(q, v);
  detail::same_shape(q, k, "block_attention");
  require(v.rows() == q.rows() && block > 0 && q.rows() % block == 0, ErrorCode::ShapeMismatch,
          "block_attention: rows must be a multiple of the block size");
  const double s = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  const Index blocks = q.rows() / block;
  Matrix out(q.rows(), v.cols());
  std::vector<Matrix> probs(static_cast<std::size_t>(blocks));
  for (Index b = 0; b < blocks; ++b) {
    const auto qb = q.value().middleRows(b * block, block);
    const auto kb = k.value().middleRows(b * block, block);
    Matrix& p = probs[static_cast<std::size_t>(b)];
    p = detail::softmax_rows(s * qb * kb.transpose());
    out.middleRows(b * block, block) = p * v.value().middleRows(b * block, block);
  }
  const bool rg = q.requires_grad() || k.requires_grad() || v.requires_grad();
  return q.tape()->record(std::move(out), rg, [q, k, v, block, blocks, s, probs](Tape& tape, const Matrix& g) {
    Matrix gq = Matrix::Zero(q.rows(), q.cols());
    Matrix gk = Matrix::Zero(k.rows(), k.cols());
    Matrix gv = Matrix::Zero(v.rows(), v.cols());
    for (Index b = 0; b < blocks; ++b) {
      const Matrix& p = probs[static_cast<std::size_t>(b)];
      const auto gb = g.middleRows(b * block, block);
      gv.middleRows(b * block, block) = p.transpose() * gb;
      const Matrix gp = gb * v.value().middleRows(b * block, block).transpose();
      const Eigen::VectorXd inner = (gp.array() * p.array()).rowwise().sum();
      const Matrix gs = (p.array() * (gp.colwise() - inner).array()).matrix() * s;
      gq.middleRows(b * block, block) = gs * k.value().middleRows(b * block, block);
      gk.middleRows(b * block, block) = gs.transpose() * q.value().middleRows(b * block, block);
    }
    tape.accumulate(q, gq);
    tape.accumulate(k, gk);
    tape.accumulate(v, gv);
  });
}

/// Mean of each block of `block` rows: (B*K x c) -> (B x c).
inline Var block_mean_rows(const Var& a, Index block) {
  require(block > 0 && a.rows() % block == 0, ErrorCode::ShapeMismatch, "block_mean_rows: bad block size");
  const Index blocks = a.rows() / block;
  Matrix out(blocks, a.cols());
  for (Index b = 0; b < blocks; ++b) out.row(b) = a.value().middleRows(b * block, block).colwise().mean();
  return a.tape()->record(std::move(out), a.requires_grad(), [a, block, blocks](Tape& tape, const Matrix& g) {
    Matrix ga(a.rows(), a.cols());
    for (Index b = 0; b < blocks; ++b)
      ga.middleRows(b * block, block) = g.row(b).replicate(block, 1) / static_cast<double>(block);
    tape.accumulate(a, ga);
  });
}

/// sum_r w_r * (-log softmax(logits_r)[target_r]); rows with w_r = 0 are skipped.
inline Var weighted_cross_entropy(const Var& logits, std::span<const int> targets, std::span<const double> weights) {
  const Index rows = logits.rows();
  require(static_cast<Index>(targets.size()) == rows && static_cast<Index>(weights.size()) == rows,
          ErrorCode::ShapeMismatch, "weighted_cross_entropy: targets/weights must match rows");
  const Matrix logp = detail::log_softmax_rows(logits.value());
  double total = 0.0;
  for (Index r = 0; r < rows; ++r) {
    const double w = weights[static_cast<std::size_t>(r)];
    if (w == 0.0) continue;
    const int target = targets[static_cast<std::size_t>(r)];
    require(target >= 0 && target < logits.cols(), ErrorCode::ShapeMismatch, "cross entropy target out of range");
    total -= w * logp(r, target);
  }
  std::vector<int> tg(targets.begin(), targets.end());
  std::vector<double> wt(weights.begin(), weights.end());
  return logits.tape()->record(Matrix::Constant(1, 1, total), logits.requires_grad(),
                               [logits, logp, tg, wt](Tape& tape, const Matrix& g) {
                                 Matrix gl = Matrix::Zero(logp.rows(), logp.cols());
                                 for (Index r = 0; r < logp.rows(); ++r) {
                                   const double w = wt[static_cast<std::size_t>(r)];
                                   if (w == 0.0) continue;
                                   gl.row(r) = w * logp.row(r).array().exp().matrix();
                                   gl(r, tg[static_cast<std::size_t>(r)]) -= w;
                                 }
                                 tape.accumulate(logits, g(0, 0) * gl);
                               });
}

/// sum_r w_r * ||pred_r - target_r||^2 against a fixed target.
inline Var weighted_squared_error(const Var& pred, const Matrix& target, std::span<const double> weights) {
  require(pred.rows() == target.rows() && pred.cols() == target.cols(), ErrorCode::ShapeMismatch,
          "weighted_squared_error: shapes differ");
  require(static_cast<Index>(weights.size()) == pred.rows(), ErrorCode::ShapeMismatch,
          "weighted_squared_error: weight count");
  const Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Index>(weights.size()));
  const Matrix diff = pred.value() - target;
  const double total = w.dot(diff.rowwise().squaredNorm());
  return pred.tape()->record(Matrix::Constant(1, 1, total), pred.requires_grad(),
                             [pred, diff, wv = Eigen::VectorXd(w)](Tape& tape, const Matrix& g) {
                               tape.accumulate(pred, (2.0 * g(0, 0)) * (diff.array().colwise() * wv.array()).matrix());
                             });
}

/// sum of squared entries of (a - b).
inline Var sum_squared_difference(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  detail::same_shape(a, b, "sum_squared_difference");
  const Matrix diff = a.value() - b.value();
  return a.tape()->record(Matrix::Constant(1, 1, diff.squaredNorm()), a.requires_grad() || b.requires_grad(),
                          [a, b, diff](Tape& tape, const Matrix& g) {
                            tape.accumulate(a, (2.0 * g(0, 0)) * diff);
                            tape.accumulate(b, (-2.0 * g(0, 0)) * diff);
                          });
}

/// sum_r KL(softmax(p_r) || softmax(q_r)) with p the reference logits.
inline Var kl_rows(const Var& reference_logits, const Var& logits) {
  detail::same_tape(reference_logits, logits);
  detail::same_shape(reference_logits, logits, "kl_rows");
  const Matrix logp = detail::log_softmax_rows(reference_logits.value());
  const Matrix logq = detail::log_softmax_rows(logits.value());
  const Matrix p = logp.array().exp().matrix();
  const double total = (p.array() * (logp - logq).array()).sum();
  return logits.tape()->record(
      Matrix::Constant(1, 1, total), reference_logits.requires_grad() || logits.requires_grad(),
      [reference_logits, logits, logp, logq, p](Tape& tape, const Matrix& g) {
        const double s = g(0, 0);
        if (logits.requires_grad()) tape.accumulate(logits, s * (logq.array().exp().matrix() - p));
        if (reference_logits.requires_grad()) {
          // d/dlogits_p of sum p (logp - logq) = p * ((logp - logq) - rowsum(p * (logp - logq)))
          const Matrix diff = logp - logq;
          const Eigen::VectorXd inner = (p.array() * diff.array()).rowwise().sum();
          tape.accumulate(reference_logits, s * (p.array() * (diff.colwise() - inner).array()).matrix());
        }
      });
}

/// max_j sum_i |a_ji - b_ji| (maximum absolute row sum of the difference).
/// The gradient is the sign pattern of the first maximising row.
inline Var max_abs_row_sum_difference(const Var& a, const Var& b) {
  detail::same_tape(a, b);
  detail::same_shape(a, b, "max_abs_row_sum_difference");
  const Matrix diff = a.value() - b.value();
  Index best = 0;
  const double value = diff.cwiseAbs().rowwise().sum().maxCoeff(&best);
  return a.tape()->record(Matrix::Constant(1, 1, value), a.requires_grad() || b.requires_grad(),
                          [a, b, diff, best](Tape& tape, const Matrix& g) {
                            Matrix sg = Matrix::Zero(diff.rows(), diff.cols());
                            sg.row(best) = diff.row(best).array().sign().matrix();
                            tape.accumulate(a, g(0, 0) * sg);
                            tape.accumulate(b, -g(0, 0) * sg);
                          });
}

/// Sum of 1x1 values.
inline Var sum_scalars(std::span<const Var> terms) {
  require(!terms.empty(), ErrorCode::ShapeMismatch, "sum_scalars: no terms");
  double total = 0.0;
  bool rg = false;
  for (const Var& v : terms) {
    require(v.value().size() == 1, ErrorCode::ShapeMismatch, "sum_scalars: terms must be scalars");
    total += v.scalar();
    rg = rg || v.requires_grad();
  }
  std::vector<Var> copy(terms.begin(), terms.end());
  return terms.front().tape()->record(Matrix::Constant(1, 1, total), rg, [copy](Tape& tape, const Matrix& g) {
    for (const Var& v : copy) tape.accumulate(v, g);
  });
}

}  // namespace distill_lab::ad
