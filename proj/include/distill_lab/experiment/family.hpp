#pragma once

// Random small linear-theory instances: d <= 32, n <= 8, p <= 4, random tanh
// or Fourier features, a standard normal w_{0,0} and a log-uniform lambda.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "distill_lab/error.hpp"
#include "distill_lab/instance.hpp"
#include "distill_lab/mae/data.hpp"

namespace distill_lab::experiment {

struct FamilyInstance {
  InstanceParams params;
  std::uint64_t seed = 0;
  double lambda = 0.1;
  TheoryInstance inst;
};

struct FamilyLimits {
  Index max_d = 32;
  Index max_n = 8;
  Index max_p = 4;
  double min_lambda = 1e-3;
  double max_lambda = 1.0;
};

/// `count` instances; draws that come out rank deficient are replaced.
inline std::vector<FamilyInstance> instance_family(int count, std::uint64_t seed, const FamilyLimits& limits = {}) {
  std::mt19937_64 rng(seed);
  const auto pick = [&](Index lo, Index hi) { return lo + static_cast<Index>(mae::uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1))); };
  std::vector<FamilyInstance> out;
  int attempts = 0;
  while (static_cast<int>(out.size()) < count) {
    require(++attempts <= 10 * count + 100, ErrorCode::RankDeficient, "could not draw full-rank instances");
    FamilyInstance f;
    f.params.n = pick(1, limits.max_n);
    f.params.p = pick(1, limits.max_p);
    f.params.d = pick(f.params.n, limits.max_d);
    f.params.input_dim = pick(2, 8);
    f.params.feature = mae::uniform01(rng) < 0.5 ? FeatureKind::RandomTanh : FeatureKind::RandomFourier;
    f.params.w00_kind = InitialWeightKind::StandardNormal;
    f.lambda = limits.min_lambda * std::pow(limits.max_lambda / limits.min_lambda, mae::uniform01(rng));
    f.seed = rng();
    try {
      f.inst = make_theory_instance(f.params, f.seed);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::RankDeficient) continue;
      throw;
    }
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace distill_lab::experiment
