#pragma once

// Generators and dense reference routines shared by the test suites.

#include <Eigen/Dense>

#include <cstdint>
#include <random>

#include "distill_lab/distill.hpp"
#include "distill_lab/spectral.hpp"

namespace testing_support {

using distill_lab::Index;
using distill_lab::Matrix;
using distill_lab::Vector;

inline Matrix gaussian(std::mt19937_64& rng, Index rows, Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  return m;
}

inline Vector gaussian(std::mt19937_64& rng, Index size) { return gaussian(rng, size, 1); }

inline Index pick(std::mt19937_64& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

// random shape with d >= n, scaled so sigma_1 stays near 1
struct Shape {
  Index d, n, p;
};

inline Shape random_shape(std::mt19937_64& rng, Index max_d = 12, Index max_n = 5, Index max_p = 3) {
  const Index n = pick(rng, 1, max_n);
  return {pick(rng, n, max_d), n, pick(rng, 1, max_p)};
}

inline distill_lab::SpectralDecomposition random_spectrum(std::mt19937_64& rng, const Shape& s) {
  Matrix phi = gaussian(rng, s.d, s.n) / std::sqrt(static_cast<double>(s.d));
  return distill_lab::decompose(distill_lab::make_design_matrix(std::move(phi)), s.p);
}

inline distill_lab::SpectralDecomposition from_phi(Matrix phi, Index p) {
  return distill_lab::decompose(distill_lab::make_design_matrix(std::move(phi)), p);
}

inline Matrix kron_dense(Index p, const Matrix& a) {
  Matrix out = Matrix::Zero(p * a.rows(), p * a.cols());
  for (Index k = 0; k < p; ++k)
    for (Index j = 0; j < a.cols(); ++j)
      for (Index i = 0; i < a.rows(); ++i) out(k * a.rows() + i, k * a.cols() + j) = a(i, j);
  return out;
}

// orthogonal projector onto range(K)^perp, assembled from normal equations only
inline Matrix null_projector(const Matrix& k) {
  const Matrix gram = k.transpose() * k;
  return Matrix::Identity(k.rows(), k.rows()) - k * gram.ldlt().solve(k.transpose());
}

inline double rel(const Vector& a, const Vector& ref) {
  const double s = ref.norm();
  return (a - ref).norm() / (s > 0.0 ? s : 1.0);
}

}  // namespace testing_support
