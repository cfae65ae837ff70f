#pragma once

// Toy sequence data for the masked autoencoder: token sequences over a small
// vocabulary or sequences of continuous patches, with optional class labels.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "distill_lab/error.hpp"

namespace distill_lab::mae {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

enum class DataMode { Token, Patch };

inline std::string_view to_string(DataMode mode) { return mode == DataMode::Token ? "token" : "patch"; }

inline DataMode parse_data_mode(std::string_view name) {
  if (name == "token") return DataMode::Token;
  if (name == "patch") return DataMode::Patch;
  throw Error(ErrorCode::ConfigError, "unknown data mode '" + std::string(name) + "'");
}

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Uniform integer in [0, bound) by rejection, independent of the standard
/// library's distribution implementations.
inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % bound;
  std::uint64_t x = rng();
  while (x >= limit) x = rng();
  return x % bound;
}

/// Standard normal via Box-Muller on uniform01.
inline double standard_normal(std::mt19937_64& rng) {
  double u = uniform01(rng);
  while (u <= 0.0) u = uniform01(rng);
  const double v = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * 3.14159265358979323846 * v);
}

struct ToySequenceDataset {
  DataMode mode = DataMode::Token;
  Index K = 8;        // sequence length
  Index vocab = 32;   // V, token mode
  Index patch_dim = 4;  // m, patch mode
  Index classes = 2;  // C
  std::vector<int> tokens;  // size() * K, row j*K + k
  Matrix patches;           // (size() * K) x m
  std::vector<int> labels;  // empty for the unlabeled view

  Index size() const {
    return mode == DataMode::Token ? static_cast<Index>(tokens.size()) / K : patches.rows() / K;
  }
  bool labeled() const { return !labels.empty(); }

  void validate() const {
    require(K >= 2, ErrorCode::ShapeMismatch, "sequence length K must be at least 2");
    if (mode == DataMode::Token) {
      require(tokens.size() % static_cast<std::size_t>(K) == 0, ErrorCode::ShapeMismatch, "token count not a multiple of K");
      for (int t : tokens) require(t >= 0 && t < vocab, ErrorCode::ShapeMismatch, "token id out of range");
    } else {
      require(patches.cols() == patch_dim && patches.rows() % K == 0, ErrorCode::ShapeMismatch, "patch matrix shape");
      require(patches.allFinite(), ErrorCode::ShapeMismatch, "non-finite patch entries");
    }
    if (labeled()) {
      require(static_cast<Index>(labels.size()) == size(), ErrorCode::ShapeMismatch, "one label per sequence");
      for (int c : labels) require(c >= 0 && c < classes, ErrorCode::ShapeMismatch, "label out of range");
    }
  }

  /// Same sequences, labels removed.
  ToySequenceDataset unlabeled() const {
    ToySequenceDataset out = *this;
    out.labels.clear();
    return out;
  }

  ToySequenceDataset subset(std::span<const Index> rows) const {
    ToySequenceDataset out = *this;
    const auto count = static_cast<Index>(rows.size());
    out.tokens.clear();
    out.labels.clear();
    if (mode == DataMode::Token) {
      out.tokens.reserve(rows.size() * static_cast<std::size_t>(K));
    } else {
      out.patches.resize(count * K, patch_dim);
    }
    for (Index r = 0; r < count; ++r) {
      const Index j = rows[static_cast<std::size_t>(r)];
      require(j >= 0 && j < size(), ErrorCode::ShapeMismatch, "subset index out of range");
      if (mode == DataMode::Token) {
        const auto begin = tokens.begin() + static_cast<std::ptrdiff_t>(j * K);
        out.tokens.insert(out.tokens.end(), begin, begin + K);
      } else {
        out.patches.middleRows(r * K, K) = patches.middleRows(j * K, K);
      }
      if (labeled()) out.labels.push_back(labels[static_cast<std::size_t>(j)]);
    }
    return out;
  }
};

struct ToyTaskConfig {
  DataMode mode = DataMode::Token;
  Index K = 8;
  Index vocab = 32;
  Index patch_dim = 4;
  Index classes = 4;
  Index n_train = 32;
  Index n_test = 400;
  Index n_general = 512;
  Index general_topics = 4;
  Index signature = 4;        // tokens per class signature
  double signal = 0.5;        // chance a position draws from its class signature
  double patch_noise = 1.0;   // patch mode: noise std around the class mean

  void validate() const {
    require(K >= 2, ErrorCode::ConfigError, "K must be at least 2");
    require(classes >= 1 && general_topics >= 1, ErrorCode::ConfigError, "class counts must be positive");
    require(n_train >= 1 && n_test >= 1 && n_general >= 1, ErrorCode::ConfigError, "dataset sizes must be positive");
    require(signal >= 0.0 && signal <= 1.0, ErrorCode::ConfigError, "signal must lie in [0, 1]");
    if (mode == DataMode::Token) {
      require(signature >= 1 && classes * signature <= vocab && general_topics * signature <= vocab,
              ErrorCode::ConfigError, "class signatures do not fit in the vocabulary");
    } else {
      require(patch_dim >= 1 && patch_noise >= 0.0, ErrorCode::ConfigError, "bad patch settings");
    }
  }
};

struct ToyTask {
  ToySequenceDataset general;  // unlabeled general-domain pool for building theta_init
  ToySequenceDataset train;    // labeled D^tr; D^u is train.unlabeled()
  ToySequenceDataset test;
};

namespace detail {

/// Token signatures. Target class c owns {c*s, ..., c*s + s - 1}; general
/// topic g takes every topics-th token, so each topic mixes all target
/// classes' signature tokens and the general pool teaches the wrong grouping.
inline std::vector<std::vector<int>> target_signatures(const ToyTaskConfig& cfg) {
  std::vector<std::vector<int>> sig(static_cast<std::size_t>(cfg.classes));
  for (Index c = 0; c < cfg.classes; ++c)
    for (Index i = 0; i < cfg.signature; ++i) sig[static_cast<std::size_t>(c)].push_back(static_cast<int>(c * cfg.signature + i));
  return sig;
}

inline std::vector<std::vector<int>> general_signatures(const ToyTaskConfig& cfg) {
  std::vector<std::vector<int>> sig(static_cast<std::size_t>(cfg.general_topics));
  const Index span = cfg.general_topics * cfg.signature;
  for (Index g = 0; g < cfg.general_topics; ++g)
    for (Index i = 0; i < cfg.signature; ++i) {
      const Index tok = (g + i * cfg.general_topics) % span;
      sig[static_cast<std::size_t>(g)].push_back(static_cast<int>(tok));
    }
  return sig;
}

inline void append_token_sequence(ToySequenceDataset& ds, const std::vector<int>& signature, double signal,
                                  std::mt19937_64& rng) {
  for (Index k = 0; k < ds.K; ++k) {
    if (uniform01(rng) < signal) {
      ds.tokens.push_back(signature[uniform_index(rng, signature.size())]);
    } else {
      ds.tokens.push_back(static_cast<int>(uniform_index(rng, static_cast<std::uint64_t>(ds.vocab))));
    }
  }
}

inline ToySequenceDataset token_split(const ToyTaskConfig& cfg, const std::vector<std::vector<int>>& sigs, Index count,
                                      bool labeled, std::mt19937_64& rng) {
  ToySequenceDataset ds;
  ds.mode = DataMode::Token;
  ds.K = cfg.K;
  ds.vocab = cfg.vocab;
  ds.patch_dim = cfg.patch_dim;
  ds.classes = cfg.classes;
  ds.tokens.reserve(static_cast<std::size_t>(count * cfg.K));
  const auto groups = static_cast<Index>(sigs.size());
  for (Index j = 0; j < count; ++j) {
    const Index c = j % groups;  // balanced classes
    append_token_sequence(ds, sigs[static_cast<std::size_t>(c)], cfg.signal, rng);
    if (labeled) ds.labels.push_back(static_cast<int>(c));
  }
  return ds;
}

inline ToySequenceDataset patch_split(const ToyTaskConfig& cfg, const std::vector<Matrix>& means, Index count,
                                      bool labeled, std::mt19937_64& rng) {
  ToySequenceDataset ds;
  ds.mode = DataMode::Patch;
  ds.K = cfg.K;
  ds.vocab = cfg.vocab;
  ds.patch_dim = cfg.patch_dim;
  ds.classes = cfg.classes;
  ds.patches.resize(count * cfg.K, cfg.patch_dim);
  const auto groups = static_cast<Index>(means.size());
  for (Index j = 0; j < count; ++j) {
    const Index c = j % groups;
    for (Index k = 0; k < cfg.K; ++k)
      for (Index i = 0; i < cfg.patch_dim; ++i)
        ds.patches(j * cfg.K + k, i) = means[static_cast<std::size_t>(c)](k, i) + cfg.patch_noise * standard_normal(rng);
    if (labeled) ds.labels.push_back(static_cast<int>(c));
  }
  return ds;
}

}  // namespace detail

/// Class-conditional toy task plus a shifted general-domain pool.
inline ToyTask make_toy_task(const ToyTaskConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  ToyTask task;
  if (cfg.mode == DataMode::Token) {
    const auto target = detail::target_signatures(cfg);
    const auto general = detail::general_signatures(cfg);
    task.general = detail::token_split(cfg, general, cfg.n_general, false, rng);
    task.train = detail::token_split(cfg, target, cfg.n_train, true, rng);
    task.test = detail::token_split(cfg, target, cfg.n_test, true, rng);
  } else {
    auto draw_means = [&](Index groups) {
      std::vector<Matrix> means;
      for (Index c = 0; c < groups; ++c) {
        Matrix m(cfg.K, cfg.patch_dim);
        for (Index k = 0; k < cfg.K; ++k)
          for (Index i = 0; i < cfg.patch_dim; ++i) m(k, i) = standard_normal(rng);
        means.push_back(m);
      }
      return means;
    };
    const auto target = draw_means(cfg.classes);
    const auto general = draw_means(cfg.general_topics);
    task.general = detail::patch_split(cfg, general, cfg.n_general, false, rng);
    task.train = detail::patch_split(cfg, target, cfg.n_train, true, rng);
    task.test = detail::patch_split(cfg, target, cfg.n_test, true, rng);
  }
  task.general.classes = cfg.classes;
  return task;
}

/// Label-stratified subsample of n items: classes are visited round-robin so
/// per-class counts differ by at most one; within a class the order is a
/// seeded shuffle.
inline std::vector<Index> stratified_indices(const ToySequenceDataset& data, Index n, std::uint64_t seed) {
  require(data.labeled(), ErrorCode::ShapeMismatch, "stratified subsampling needs labels");
  require(n >= data.classes, ErrorCode::SubsampleTooSmall,
          "subsample size " + std::to_string(n) + " is smaller than the class count " + std::to_string(data.classes));
  require(n <= data.size(), ErrorCode::SubsampleTooSmall, "subsample larger than the dataset");
  std::mt19937_64 rng(seed);
  std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(data.classes));
  for (Index j = 0; j < data.size(); ++j) by_class[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(j)])].push_back(j);
  for (auto& members : by_class) {
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[uniform_index(rng, i)]);
  }
  std::vector<Index> out;
  std::vector<std::size_t> cursor(by_class.size(), 0);
  while (static_cast<Index>(out.size()) < n) {
    bool progressed = false;
    for (std::size_t c = 0; c < by_class.size() && static_cast<Index>(out.size()) < n; ++c) {
      if (cursor[c] < by_class[c].size()) {
        out.push_back(by_class[c][cursor[c]++]);
        progressed = true;
      }
    }
    require(progressed, ErrorCode::SubsampleTooSmall, "not enough items to stratify");
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace distill_lab::mae
