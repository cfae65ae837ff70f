#pragma once

// key=value experiment configuration. One assignment per line, '#' starts a
// comment, blank lines are ignored, unknown keys are rejected.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "distill_lab/bounds.hpp"
#include "distill_lab/error.hpp"
#include "distill_lab/instance.hpp"
#include "distill_lab/mae/losses.hpp"
#include "distill_lab/mae/pipeline.hpp"

namespace distill_lab::experiment {

enum class Mode { Theory, Mae, Ablate, Lowres, Verify };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::Theory: return "theory";
    case Mode::Mae: return "mae";
    case Mode::Ablate: return "ablate";
    case Mode::Lowres: return "lowres";
    case Mode::Verify: return "verify";
  }
  return "unknown";
}

inline Mode parse_mode(std::string_view name) {
  for (Mode m : {Mode::Theory, Mode::Mae, Mode::Ablate, Mode::Lowres, Mode::Verify})
    if (to_string(m) == name) return m;
  throw Error(ErrorCode::ConfigError, "unknown mode '" + std::string(name) + "'");
}

struct ExperimentConfig {
  Mode mode = Mode::Theory;
  bool mode_given = false;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  std::string out = "results";

  // linear theory
  InstanceParams instance;
  double lambda = 0.01;
  double horizon = 5.0;        // T
  double euler_factor = 1e-3;  // Euler step = factor / sigma_1^2
  int rounds = 3;              // T' (theory rounds and self-distillation rounds)
  BoundInputs bounds;
  bool auto_R = true;  // R = mean feature norm of the instance

  // toy masked autoencoder
  mae::PipelineConfig pipeline;
  std::vector<Index> n_values{8, 16, 32};

  /// Line on which each key was set (absent for defaults).
  std::map<std::string, int> lines;

  int line_of(const std::string& key) const {
    const auto it = lines.find(key);
    return it == lines.end() ? 0 : it->second;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(std::string_view v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size() || !std::isfinite(out))
    throw Error(ErrorCode::ConfigError, "expected a number, got '" + std::string(v) + "'");
  return out;
}

inline long long to_integer(std::string_view v) {
  long long out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    throw Error(ErrorCode::ConfigError, "expected an integer, got '" + std::string(v) + "'");
  return out;
}

inline bool to_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::ConfigError, "expected a boolean, got '" + std::string(v) + "'");
}

template <typename T>
std::vector<T> to_list(std::string_view v) {
  std::vector<T> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    const std::string_view item = trim(v.substr(0, comma));
    const long long x = to_integer(item);
    if (x < 0) throw Error(ErrorCode::ConfigError, "list entries must be non-negative");
    out.push_back(static_cast<T>(x));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) throw Error(ErrorCode::ConfigError, "empty list");
  return out;
}

inline void check(bool ok, const char* what) {
  if (!ok) throw Error(ErrorCode::ConfigError, what);
}

inline Index positive(std::string_view v) {
  const long long x = to_integer(v);
  check(x >= 1, "must be a positive integer");
  return static_cast<Index>(x);
}

inline int non_negative(std::string_view v) {
  const long long x = to_integer(v);
  check(x >= 0 && x <= 1'000'000, "must be a non-negative integer");
  return static_cast<int>(x);
}

inline double positive_real(std::string_view v) {
  const double x = to_double(v);
  check(x > 0.0, "must be positive");
  return x;
}

inline double non_negative_real(std::string_view v) {
  const double x = to_double(v);
  check(x >= 0.0, "must be non-negative");
  return x;
}

using Setter = std::function<void(ExperimentConfig&, std::string_view)>;

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"mode", [](ExperimentConfig& c, std::string_view v) { c.mode = parse_mode(v); c.mode_given = true; }},
      {"seeds", [](ExperimentConfig& c, std::string_view v) { c.seeds = to_list<std::uint64_t>(v); }},
      {"out", [](ExperimentConfig& c, std::string_view v) { check(!v.empty(), "must not be empty"); c.out = std::string(v); }},
      // theory
      {"n", [](ExperimentConfig& c, std::string_view v) { c.instance.n = positive(v); }},
      {"d", [](ExperimentConfig& c, std::string_view v) { c.instance.d = positive(v); }},
      {"p", [](ExperimentConfig& c, std::string_view v) { c.instance.p = positive(v); }},
      {"input_dim", [](ExperimentConfig& c, std::string_view v) { c.instance.input_dim = positive(v); }},
      {"feature", [](ExperimentConfig& c, std::string_view v) { c.instance.feature = parse_feature_kind(v); }},
      {"normalize_features", [](ExperimentConfig& c, std::string_view v) { c.instance.normalize_features = to_bool(v); }},
      {"label_noise", [](ExperimentConfig& c, std::string_view v) { c.instance.label_noise = non_negative_real(v); }},
      {"domain_shift", [](ExperimentConfig& c, std::string_view v) { c.instance.domain_shift = non_negative_real(v); }},
      {"w00", [](ExperimentConfig& c, std::string_view v) { c.instance.w00_kind = parse_initial_weight_kind(v); }},
      {"lambda", [](ExperimentConfig& c, std::string_view v) { c.lambda = positive_real(v); }},
      {"T", [](ExperimentConfig& c, std::string_view v) { c.horizon = positive_real(v); }},
      {"rounds", [](ExperimentConfig& c, std::string_view v) { c.rounds = non_negative(v); }},
      {"euler_factor", [](ExperimentConfig& c, std::string_view v) {
         c.euler_factor = positive_real(v);
         check(c.euler_factor <= 1.0, "must be at most 1 (stability)");
       }},
      {"R", [](ExperimentConfig& c, std::string_view v) {
         if (v == "auto") { c.auto_R = true; return; }
         c.bounds.R = positive_real(v);
         c.auto_R = false;
       }},
      {"M", [](ExperimentConfig& c, std::string_view v) { c.bounds.M = positive_real(v); }},
      {"delta", [](ExperimentConfig& c, std::string_view v) {
         c.bounds.delta = to_double(v);
         check(c.bounds.delta > 0.0 && c.bounds.delta < 1.0, "must lie in (0, 1)");
       }},
      {"c", [](ExperimentConfig& c, std::string_view v) { c.bounds.c = positive_real(v); }},
      // toy masked autoencoder
      {"data_mode", [](ExperimentConfig& c, std::string_view v) { c.pipeline.task.mode = mae::parse_data_mode(v); }},
      {"K", [](ExperimentConfig& c, std::string_view v) { c.pipeline.task.K = positive(v); check(c.pipeline.task.K >= 2, "must be at least 2"); }},
      {"V", [](ExperimentConfig& c, std::string_view v) { c.pipeline.task.vocab = positive(v); }},
      {"m", [](ExperimentConfig& c, std::string_view v) { c.pipeline.task.patch_dim = positive(v); }},
      {"C", [](ExperimentConfig& c, std::string_view v) { c.pipeline.task.classes = positive(v); }},
      {"h", [](ExperimentConfig& c, std::string_view v) { c.pipeline.dims.h = positive(v); }},
      {"ffn", [](ExperimentConfig& c, std::string_view v) { c.pipeline.dims.ffn = positive(v); }},
      {"n_train", [](ExperimentConfig& c, std::string_view v) { c.pipeline.task.n_train = positive(v); }},
      {"n_test", [](ExperimentConfig& c, std::string_view v) { c.pipeline.task.n_test = positive(v); }},
      {"n_general", [](ExperimentConfig& c, std::string_view v) { c.pipeline.task.n_general = positive(v); }},
      {"general_topics", [](ExperimentConfig& c, std::string_view v) { c.pipeline.task.general_topics = positive(v); }},
      {"signature", [](ExperimentConfig& c, std::string_view v) { c.pipeline.task.signature = positive(v); }},
      {"signal", [](ExperimentConfig& c, std::string_view v) {
         c.pipeline.task.signal = to_double(v);
         check(c.pipeline.task.signal >= 0.0 && c.pipeline.task.signal <= 1.0, "must lie in [0, 1]");
       }},
      {"patch_noise", [](ExperimentConfig& c, std::string_view v) { c.pipeline.task.patch_noise = non_negative_real(v); }},
      {"task_seed", [](ExperimentConfig& c, std::string_view v) {
         const long long x = to_integer(v);
         check(x >= 0, "must be non-negative");
         c.pipeline.task_seed = static_cast<std::uint64_t>(x);
       }},
      {"gamma", [](ExperimentConfig& c, std::string_view v) {
         c.pipeline.train.gamma = to_double(v);
         check(c.pipeline.train.gamma > 0.0 && c.pipeline.train.gamma < 1.0, "must lie in (0, 1)");
       }},
      {"lr_pretrain", [](ExperimentConfig& c, std::string_view v) { c.pipeline.train.lr_pretrain = non_negative_real(v); }},
      {"lr_finetune", [](ExperimentConfig& c, std::string_view v) { c.pipeline.train.lr_finetune = non_negative_real(v); }},
      {"steps_pretrain", [](ExperimentConfig& c, std::string_view v) { c.pipeline.train.steps_pretrain = non_negative(v); }},
      {"steps_finetune", [](ExperimentConfig& c, std::string_view v) { c.pipeline.train.steps_finetune = non_negative(v); }},
      {"batch", [](ExperimentConfig& c, std::string_view v) { c.pipeline.train.batch = positive(v); }},
      {"variant", [](ExperimentConfig& c, std::string_view v) {
         try {
           c.pipeline.train.variant = mae::parse_variant(v);
         } catch (const Error& e) {
           throw Error(ErrorCode::ConfigError, e.what());
         }
       }},
      {"distill_scale", [](ExperimentConfig& c, std::string_view v) { c.pipeline.train.distill_scale = non_negative_real(v); }},
      {"general_steps", [](ExperimentConfig& c, std::string_view v) { c.pipeline.general_steps = non_negative(v); }},
      {"general_lr", [](ExperimentConfig& c, std::string_view v) { c.pipeline.general_lr = non_negative_real(v); }},
      {"general_batch", [](ExperimentConfig& c, std::string_view v) { c.pipeline.general_batch = positive(v); }},
      {"n_values", [](ExperimentConfig& c, std::string_view v) { c.n_values = to_list<Index>(v); }},
  };
  return table;
}

[[noreturn]] inline void config_error(int line, const std::string& key, const std::string& what) {
  std::string msg = line > 0 ? "line " + std::to_string(line) + ": " : std::string("default value: ");
  if (!key.empty()) msg += "key '" + key + "': ";
  throw Error(ErrorCode::ConfigError, msg + what);
}

}  // namespace detail

/// Applies one assignment; errors name the key and the line.
inline void apply_setting(ExperimentConfig& cfg, const std::string& key, std::string_view value, int line) {
  const auto& table = detail::setters();
  const auto it = table.find(key);
  if (it == table.end()) detail::config_error(line, key, "unknown key");
  try {
    it->second(cfg, value);
  } catch (const Error& e) {
    detail::config_error(line, key, e.what());
  }
  cfg.lines[key] = line;
}

/// Cross-key checks, reported against the line of the offending key.
inline void validate(const ExperimentConfig& cfg) {
  const auto fail = [&](const char* key, const std::string& what) { detail::config_error(cfg.line_of(key), key, what); };
  if (cfg.instance.feature != FeatureKind::Identity && cfg.instance.d < cfg.instance.n)
    fail("d", "feature dimension d must be at least n");
  if (cfg.instance.feature == FeatureKind::Identity && cfg.instance.d < cfg.instance.n) fail("d", "d must be at least n");
  const mae::ToyTaskConfig& task = cfg.pipeline.task;
  if (task.mode == mae::DataMode::Token && task.classes * task.signature > task.vocab)
    fail("C", "C * signature exceeds the vocabulary V");
  if (task.mode == mae::DataMode::Token && task.general_topics * task.signature > task.vocab)
    fail("general_topics", "general_topics * signature exceeds the vocabulary V");
  if (cfg.mode == Mode::Lowres) {
    for (Index n : cfg.n_values)
      if (n > task.n_train) fail("n_values", "every n must be at most n_train (got " + std::to_string(n) + ")");
  }
  if (cfg.seeds.empty()) fail("seeds", "at least one seed is required");
  std::vector<std::uint64_t> sorted = cfg.seeds;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) fail("seeds", "seeds must be distinct");
}

inline ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string_view text = raw;
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = detail::trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) detail::config_error(line, "", "expected key=value");
    const std::string key(detail::trim(text.substr(0, eq)));
    const std::string_view value = detail::trim(text.substr(eq + 1));
    if (key.empty()) detail::config_error(line, "", "empty key");
    if (cfg.lines.count(key) != 0) detail::config_error(line, key, "duplicate key");
    apply_setting(cfg, key, value, line);
  }
  validate(cfg);
  return cfg;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ConfigError, "cannot open config '" + path + "'");
  return parse_config(in);
}

/// Every key the parser accepts, in sorted order.
inline std::vector<std::string> known_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : detail::setters()) keys.push_back(k);
  return keys;
}

}  // namespace distill_lab::experiment
