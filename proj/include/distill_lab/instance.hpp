#pragma once

// Random instances of the linear theory: a synthetic regression task, a
// frozen random feature map, and the two w_{0,0} generators.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "distill_lab/error.hpp"
#include "distill_lab/spectral.hpp"

namespace distill_lab {

enum class InitialWeightKind { StandardNormal, PretrainRidge };

inline std::string_view to_string(InitialWeightKind kind) {
  return kind == InitialWeightKind::StandardNormal ? "normal" : "pretrain-ridge";
}

inline InitialWeightKind parse_initial_weight_kind(std::string_view name) {
  if (name == "normal") return InitialWeightKind::StandardNormal;
  if (name == "pretrain-ridge") return InitialWeightKind::PretrainRidge;
  throw Error(ErrorCode::DomainError, "unknown w00 generator '" + std::string(name) + "'");
}

struct InstanceParams {
  Index n = 8;
  Index d = 32;
  Index p = 2;
  Index input_dim = 6;
  FeatureKind feature = FeatureKind::RandomTanh;
  /// Scale features by 1/sqrt(d) so that singular values stay O(1) as d grows.
  bool normalize_features = true;
  double label_noise = 0.1;
  double domain_shift = 1.0;
  InitialWeightKind w00_kind = InitialWeightKind::PretrainRidge;
};

struct TheoryInstance {
  SyntheticTask task;
  FeatureMap fmap = FeatureMap::identity(1);
  DesignMatrix design;
  SpectralDecomposition spec;
  Vector y;       // vec of labels, length np
  Vector w00;     // result of further pre-training
  Vector w_init;  // weight before further pre-training
};

namespace detail {

inline Vector normal_vector(std::mt19937_64& rng, Index size, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Vector v(size);
  for (Index i = 0; i < size; ++i) v(i) = normal(rng);
  return v;
}

inline Matrix normal_matrix(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

}  // namespace detail

/// Regression task y = B x + noise on standard-normal inputs, plus a shifted
/// "general domain" pool labelled by a different map.
inline SyntheticTask make_synthetic_task(const InstanceParams& params, std::uint64_t seed) {
  require(params.n >= 1 && params.p >= 1 && params.input_dim >= 1, ErrorCode::DimensionMismatch,
          "instance dimensions must be positive");
  std::mt19937_64 rng(seed);
  SyntheticTask task;
  const Matrix map = detail::normal_matrix(rng, params.p, params.input_dim, 1.0 / std::sqrt(double(params.input_dim)));
  const Matrix pre_map = detail::normal_matrix(rng, params.p, params.input_dim, 1.0 / std::sqrt(double(params.input_dim)));
  Vector shift = detail::normal_vector(rng, params.input_dim);
  shift *= params.domain_shift / std::max(shift.norm(), 1e-12);

  task.labels.resize(params.n, params.p);
  for (Index j = 0; j < params.n; ++j) {
    Vector x = detail::normal_vector(rng, params.input_dim);
    task.labels.row(j) = (map * x + detail::normal_vector(rng, params.p, params.label_noise)).transpose();
    task.inputs.push_back(std::move(x));
  }
  const Index pool = 2 * params.n;
  task.pretrain_labels.resize(pool, params.p);
  for (Index j = 0; j < pool; ++j) {
    Vector x = detail::normal_vector(rng, params.input_dim) + shift;
    task.pretrain_labels.row(j) = (pre_map * x).transpose();
    task.pretrain_inputs.push_back(std::move(x));
  }
  return task;
}

/// Ridge fit of the general-domain pool, used as a generic w_{0,0}.
inline Vector pretrain_ridge_weight(const SyntheticTask& task, const FeatureMap& fmap, double ridge) {
  require(!task.pretrain_inputs.empty(), ErrorCode::DimensionMismatch, "task has no pre-training pool");
  const Index pool = static_cast<Index>(task.pretrain_inputs.size());
  Matrix phi(fmap.d(), pool);
  for (Index j = 0; j < pool; ++j) phi.col(j) = fmap(task.pretrain_inputs[static_cast<std::size_t>(j)]);
  Matrix gram = phi * phi.transpose();
  gram.diagonal().array() += ridge;
  const Matrix w = gram.ldlt().solve(phi * task.pretrain_labels);  // d x p
  return Eigen::Map<const Vector>(w.data(), w.size());
}

inline TheoryInstance make_theory_instance(InstanceParams params, std::uint64_t seed) {
  if (params.feature == FeatureKind::Identity) params.input_dim = params.d;
  require(params.d >= params.n, ErrorCode::DimensionMismatch, "instance needs d >= n");
  TheoryInstance inst{};
  inst.task = make_synthetic_task(params, seed);
  const double scale = params.normalize_features ? 1.0 / std::sqrt(static_cast<double>(params.d)) : 1.0;
  inst.fmap = params.feature == FeatureKind::Identity
                  ? FeatureMap::identity(params.d)
                  : FeatureMap::random(params.feature, params.input_dim, params.d, seed ^ 0x9e3779b97f4a7c15ULL, scale);
  inst.design = build_design_matrix(inst.task, inst.fmap);
  inst.spec = decompose(inst.design, params.p);
  inst.y = inst.task.label_vector();

  std::mt19937_64 rng(seed + 0x51ed2701ULL);
  if (params.w00_kind == InitialWeightKind::StandardNormal) {
    inst.w00 = detail::normal_vector(rng, params.d * params.p);
  } else {
    inst.w00 = pretrain_ridge_weight(inst.task, inst.fmap, 1e-2);
  }
  inst.w_init = detail::normal_vector(rng, params.d * params.p);
  return inst;
}

}  // namespace distill_lab
