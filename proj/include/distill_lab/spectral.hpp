#pragma once

// Feature design matrix and the spectral factorisation of the lifted operator
// [I_p (x) Phi] that the closed-form distillation and fine-tuning rest on.
//
// Vector layout used throughout the theory modules:
//   weight   w = vec[W^T]          in R^{dp}, w[k*d + i] = W(k, i)
//   outputs  vec[f] = vec[F]       in R^{np}, entry k*n + j = f(x_j)_k
// so every length-dp (length-np) vector is a column-major d x p (n x p)
// matrix whose column k belongs to output k.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "distill_lab/error.hpp"

namespace distill_lab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Relative numerical-rank threshold: sigma_i counts iff sigma_i > kRankTolerance * sigma_max.
inline constexpr double kRankTolerance = 1e-9;

struct SyntheticTask {
  std::vector<Vector> inputs;
  Matrix labels;  // n x p, row j is y_j
  std::vector<Vector> pretrain_inputs;
  Matrix pretrain_labels;  // rows match pretrain_inputs, may be empty

  Index n() const { return static_cast<Index>(inputs.size()); }
  Index p() const { return labels.cols(); }

  /// Y = vec[[y_1, ..., y_n]^T]: output-major stacking, entry k*n + j = y_j[k].
  Vector label_vector() const {
    Vector y(labels.size());
    Eigen::Map<Matrix>(y.data(), labels.rows(), labels.cols()) = labels;
    return y;
  }

  void validate() const {
    require(n() >= 1, ErrorCode::DimensionMismatch, "task needs at least one sample");
    require(labels.rows() == n(), ErrorCode::DimensionMismatch, "label rows must equal sample count");
    require(p() >= 1, ErrorCode::DimensionMismatch, "output dimension must be >= 1");
    require(labels.allFinite(), ErrorCode::DomainError, "labels must be finite");
  }
};

enum class FeatureKind { Identity, RandomTanh, RandomFourier };

inline std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::Identity: return "identity";
    case FeatureKind::RandomTanh: return "random-tanh";
    case FeatureKind::RandomFourier: return "random-fourier";
  }
  return "unknown";
}

inline FeatureKind parse_feature_kind(std::string_view name) {
  if (name == "identity") return FeatureKind::Identity;
  if (name == "random-tanh") return FeatureKind::RandomTanh;
  if (name == "random-fourier") return FeatureKind::RandomFourier;
  throw Error(ErrorCode::DomainError, "unknown feature map '" + std::string(name) + "'");
}

/// phi(x) = scale * act(G x + b) with G, b ~ N(0, 1/input_dim), frozen at
/// construction. The identity map copies x and requires d == input_dim.
class FeatureMap {
 public:
  static FeatureMap identity(Index d) {
    FeatureMap map;
    map.kind_ = FeatureKind::Identity;
    map.d_ = d;
    map.input_dim_ = d;
    return map;
  }

  static FeatureMap random(FeatureKind kind, Index input_dim, Index d, std::uint64_t seed,
                           double output_scale = 1.0) {
    if (kind == FeatureKind::Identity) {
      require(input_dim == d, ErrorCode::DimensionMismatch, "identity map needs d == input dim");
      return identity(d);
    }
    require(input_dim >= 1 && d >= 1, ErrorCode::DimensionMismatch, "feature dims must be positive");
    FeatureMap map;
    map.kind_ = kind;
    map.d_ = d;
    map.input_dim_ = input_dim;
    map.seed_ = seed;
    map.scale_ = output_scale;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(input_dim)));
    map.projection_.resize(d, input_dim);
    map.offset_.resize(d);
    for (Index i = 0; i < d; ++i)
      for (Index j = 0; j < input_dim; ++j) map.projection_(i, j) = normal(rng);
    for (Index i = 0; i < d; ++i) map.offset_(i) = normal(rng);
    return map;
  }

  FeatureKind kind() const { return kind_; }
  Index d() const { return d_; }
  Index input_dim() const { return input_dim_; }
  std::uint64_t seed() const { return seed_; }
  double output_scale() const { return scale_; }

  Vector operator()(const Vector& x) const {
    require(x.size() == input_dim_, ErrorCode::DimensionMismatch, "input has wrong dimension for feature map");
    switch (kind_) {
      case FeatureKind::Identity: return x;
      case FeatureKind::RandomTanh: return scale_ * (projection_ * x + offset_).array().tanh().matrix();
      case FeatureKind::RandomFourier: return scale_ * (projection_ * x + offset_).array().cos().matrix();
    }
    return x;
  }

 private:
  FeatureKind kind_ = FeatureKind::Identity;
  Index d_ = 0;
  Index input_dim_ = 0;
  std::uint64_t seed_ = 0;
  double scale_ = 1.0;
  Matrix projection_;
  Vector offset_;
};

struct DesignMatrix {
  Matrix phi;  // d x n, phi(i, j) = phi(x_j)_i
  Index rank = 0;

  Index d() const { return phi.rows(); }
  Index n() const { return phi.cols(); }
};

inline Index numerical_rank(const Vector& singular_values) {
  if (singular_values.size() == 0 || !(singular_values(0) > 0.0)) return 0;
  const double cutoff = kRankTolerance * singular_values(0);
  Index rank = 0;
  for (Index i = 0; i < singular_values.size(); ++i)
    if (singular_values(i) > cutoff) ++rank;
  return rank;
}

/// Wraps a raw d x n matrix, enforcing d >= n, finiteness and full column rank.
inline DesignMatrix make_design_matrix(Matrix phi) {
  require(phi.cols() >= 1, ErrorCode::DimensionMismatch, "design matrix needs at least one column");
  require(phi.rows() >= phi.cols(), ErrorCode::DimensionMismatch,
          "feature dimension d=" + std::to_string(phi.rows()) + " below sample count n=" +
              std::to_string(phi.cols()));
  require(phi.allFinite(), ErrorCode::DomainError, "design matrix has non-finite entries");
  Eigen::JacobiSVD<Matrix> svd(phi);
  const Index rank = numerical_rank(svd.singularValues());
  require(rank == phi.cols(), ErrorCode::RankDeficient,
          "rank " + std::to_string(rank) + " < n=" + std::to_string(phi.cols()));
  return DesignMatrix{std::move(phi), rank};
}

inline DesignMatrix build_design_matrix(const SyntheticTask& task, const FeatureMap& fmap) {
  task.validate();
  require(fmap.d() >= task.n(), ErrorCode::DimensionMismatch,
          "feature dimension d=" + std::to_string(fmap.d()) + " below sample count n=" + std::to_string(task.n()));
  Matrix phi(fmap.d(), task.n());
  for (Index j = 0; j < task.n(); ++j) phi.col(j) = fmap(task.inputs[static_cast<std::size_t>(j)]);
  return make_design_matrix(std::move(phi));
}

/// SVD of [I_p (x) Phi] held in factored form. Only Phi = U_phi S V_phi^T is
/// computed; lifted singular triple i (0-based) is
///   sigma_i = s_{i/p},  u_i = e_{i%p} (x) U_phi[:, i/p],  v_i = e_{i%p} (x) V_phi[:, i/p],
/// which lists the np values non-increasingly. For i >= np the u_i complete
/// an orthonormal basis of R^{dp} (the null space of [I_p (x) Phi]^T).
class SpectralDecomposition {
 public:
  static SpectralDecomposition decompose(const DesignMatrix& design, Index p) {
    require(p >= 1, ErrorCode::DimensionMismatch, "output dimension must be >= 1");
    require(design.d() >= design.n(), ErrorCode::DimensionMismatch, "design matrix must satisfy d >= n");
    SpectralDecomposition out;
    out.phi_ = design.phi;
    out.p_ = p;
    Eigen::JacobiSVD<Matrix> svd(design.phi, Eigen::ComputeFullU | Eigen::ComputeFullV);
    out.u_phi_ = svd.matrixU();
    out.s_phi_ = svd.singularValues();
    out.v_phi_ = svd.matrixV();
    out.rank_phi_ = numerical_rank(out.s_phi_);
    require(out.rank_phi_ == design.n(), ErrorCode::RankDeficient,
            "rank " + std::to_string(out.rank_phi_) + " < n=" + std::to_string(design.n()));
    return out;
  }

  Index d() const { return phi_.rows(); }
  Index n() const { return phi_.cols(); }
  Index p() const { return p_; }
  Index dp() const { return d() * p_; }
  Index np() const { return n() * p_; }
  /// Rank r of the lifted operator (= np for a full-rank Phi).
  Index rank() const { return rank_phi_ * p_; }

  const Matrix& phi() const { return phi_; }
  const Matrix& phi_left() const { return u_phi_; }
  const Vector& phi_singular_values() const { return s_phi_; }
  const Matrix& phi_right() const { return v_phi_; }

  double sigma(Index i) const { return s_phi_(i / p_); }

  Vector sigma() const {
    Vector s(np());
    for (Index i = 0; i < np(); ++i) s(i) = sigma(i);
    return s;
  }

  Vector left_vector(Index i) const {
    Vector u = Vector::Zero(dp());
    u.segment((i % p_) * d(), d()) = u_phi_.col(i / p_);
    return u;
  }

  Vector right_vector(Index i) const {
    Vector v = Vector::Zero(np());
    v.segment((i % p_) * n(), n()) = v_phi_.col(i / p_);
    return v;
  }

  /// Coefficients c_i = u_i^T w for all i < dp.
  Vector left_coefficients(const Vector& w) const {
    check_size(w, dp(), "weight");
    const Matrix c = u_phi_.transpose() * Eigen::Map<const Matrix>(w.data(), d(), p_);
    Vector out(dp());
    for (Index i = 0; i < dp(); ++i) out(i) = c(i / p_, i % p_);
    return out;
  }

  /// w = sum_i c_i u_i; c may have length r (top part only) or dp.
  Vector from_left_coefficients(const Vector& c) const {
    require(c.size() == np() || c.size() == dp(), ErrorCode::DimensionMismatch,
            "coefficient vector must have length np or dp");
    Matrix cm = Matrix::Zero(d(), p_);
    for (Index i = 0; i < c.size(); ++i) cm(i / p_, i % p_) = c(i);
    Vector w(dp());
    Eigen::Map<Matrix>(w.data(), d(), p_) = u_phi_ * cm;
    return w;
  }

  /// (V^T y)_i for i < np.
  Vector right_coefficients(const Vector& y) const {
    check_size(y, np(), "output");
    const Matrix c = v_phi_.transpose() * Eigen::Map<const Matrix>(y.data(), n(), p_);
    Vector out(np());
    for (Index i = 0; i < np(); ++i) out(i) = c(i / p_, i % p_);
    return out;
  }

  Vector from_right_coefficients(const Vector& c) const {
    check_size(c, np(), "coefficient");
    Matrix cm(n(), p_);
    for (Index i = 0; i < np(); ++i) cm(i / p_, i % p_) = c(i);
    Vector y(np());
    Eigen::Map<Matrix>(y.data(), n(), p_) = v_phi_ * cm;
    return y;
  }

  /// Model outputs vec[f] = [I_p (x) Phi]^T w.
  Vector outputs(const Vector& w) const {
    check_size(w, dp(), "weight");
    Vector f(np());
    Eigen::Map<Matrix>(f.data(), n(), p_) = phi_.transpose() * Eigen::Map<const Matrix>(w.data(), d(), p_);
    return f;
  }

  /// [I_p (x) Phi] z for z in R^{np}.
  Vector lift(const Vector& z) const {
    check_size(z, np(), "output");
    Vector w(dp());
    Eigen::Map<Matrix>(w.data(), d(), p_) = phi_ * Eigen::Map<const Matrix>(z.data(), n(), p_);
    return w;
  }

  /// Dense [I_p (x) Phi] (dp x np); small instances only.
  Matrix lifted_matrix() const { return kron_identity(p_, phi_); }

  /// U~ = [u_1 .. u_r] materialised as dp x r.
  Matrix top_left_matrix() const {
    Matrix u(dp(), rank());
    for (Index i = 0; i < rank(); ++i) u.col(i) = left_vector(i);
    return u;
  }

  Matrix full_left_matrix() const {
    Matrix u(dp(), dp());
    for (Index i = 0; i < dp(); ++i) u.col(i) = left_vector(i);
    return u;
  }

  Matrix right_matrix() const {
    Matrix v(np(), np());
    for (Index i = 0; i < np(); ++i) v.col(i) = right_vector(i);
    return v;
  }

  static Matrix kron_identity(Index p, const Matrix& a) {
    Matrix out = Matrix::Zero(p * a.rows(), p * a.cols());
    for (Index k = 0; k < p; ++k) out.block(k * a.rows(), k * a.cols(), a.rows(), a.cols()) = a;
    return out;
  }

 private:
  static void check_size(const Vector& v, Index expected, const char* what) {
    require(v.size() == expected, ErrorCode::DimensionMismatch,
            std::string(what) + " vector has length " + std::to_string(v.size()) + ", expected " +
                std::to_string(expected));
  }

  Matrix phi_;
  Matrix u_phi_;
  Vector s_phi_;
  Matrix v_phi_;
  Index p_ = 1;
  Index rank_phi_ = 0;
};

inline SpectralDecomposition decompose(const DesignMatrix& design, Index p) {
  return SpectralDecomposition::decompose(design, p);
}

/// P_r w = (I - U~ U~^T) w, the component of w outside the span of u_1..u_r.
inline Vector null_projection(const SpectralDecomposition& spec, const Vector& w) {
  require(w.size() == spec.dp(), ErrorCode::DimensionMismatch, "weight vector must have length dp");
  Vector c = spec.left_coefficients(w);
  c.head(spec.rank()).setZero();
  return spec.from_left_coefficients(c);
}

}  // namespace distill_lab
