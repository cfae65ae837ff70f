#pragma once

// mode=mae, ablate and lowres on the fixed toy task. theta_init is built once
// per seed and shared by every pipeline, variant and subsample of that seed.

#include <cstdint>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "distill_lab/experiment/config.hpp"
#include "distill_lab/experiment/outcome.hpp"
#include "distill_lab/experiment/parallel.hpp"
#include "distill_lab/mae/checkpoint.hpp"
#include "distill_lab/mae/data.hpp"
#include "distill_lab/mae/pipeline.hpp"
#include "distill_lab/mae/train.hpp"

namespace distill_lab::experiment {

inline std::string hex64(std::uint64_t x) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
  return buf;
}

inline std::string pipeline_name(int t) {
  if (t < 0) return "finetune-only";
  if (t == 0) return "further-pretrain";
  return "self-distill";
}

/// Ablation label of a variant; the representation-matching objective is "full".
inline std::string variant_label(mae::Variant v) {
  return v == mae::Variant::Representation ? "full" : std::string(mae::to_string(v));
}

inline const std::vector<mae::Variant>& ablation_variants() {
  static const std::vector<mae::Variant> v = {mae::Variant::Representation, mae::Variant::DistillOnly,
                                              mae::Variant::None,           mae::Variant::Prediction,
                                              mae::Variant::WeightL2,       mae::Variant::WeightMars};
  return v;
}

struct SeedInit {
  std::uint64_t seed = 0;
  mae::ToyModelParams theta_init;
  std::string error;
};

inline mae::TrainConfig train_config(const ExperimentConfig& cfg) {
  mae::TrainConfig t = cfg.pipeline.train;
  t.rounds = cfg.rounds;
  return t;
}

inline std::vector<SeedInit> build_inits(const ExperimentConfig& cfg, const mae::ToyTask& task,
                                         const std::vector<std::uint64_t>& seeds) {
  return parallel_map<SeedInit>(seeds.size(), [&](std::size_t i) {
    SeedInit s;
    s.seed = seeds[i];
    try {
      s.theta_init = mae::build_initial_weights(task.general, cfg.pipeline, s.seed);
    } catch (const std::exception& e) {
      s.error = e.what();
    }
    return s;
  });
}

inline mae::ToyTask config_task(const ExperimentConfig& cfg) {
  cfg.pipeline.task.validate();
  return mae::make_toy_task(cfg.pipeline.task, cfg.pipeline.task_seed);
}

// ---------------------------------------------------------------- mae

inline const std::vector<std::string>& mae_header() {
  static const std::vector<std::string> h = {"mode", "seed", "t", "pipeline", "train_loss", "test_loss",
                                             "train_accuracy", "accuracy", "gap", "distance_l2",
                                             "distance_mars", "init_checksum"};
  return h;
}

struct MaeSeedResult {
  mae::PipelineResult result;
  std::string error;
};

inline RunOutcome run_mae(const ExperimentConfig& cfg) {
  const std::vector<std::uint64_t> seeds = sorted_seeds(cfg.seeds);
  const mae::ToyTask task = config_task(cfg);
  const std::vector<SeedInit> inits = build_inits(cfg, task, seeds);
  const mae::TrainConfig tcfg = train_config(cfg);
  const auto results = parallel_map<MaeSeedResult>(seeds.size(), [&](std::size_t i) {
    MaeSeedResult r;
    r.result.seed = seeds[i];
    if (!inits[i].error.empty()) {
      r.error = inits[i].error;
      return r;
    }
    try {
      r.result = mae::run_pipeline(inits[i].theta_init, task.train, task.test, tcfg, seeds[i]);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    return r;
  });

  RunOutcome out;
  out.mode = Mode::Mae;
  out.table = CsvTable(mae_header());
  std::map<int, std::vector<const mae::PipelinePoint*>> by_t;
  std::vector<Series> gap, acc, dl2, dmars;
  for (const MaeSeedResult& r : results) {
    if (!r.error.empty()) {
      out.log.push_back("seed " + std::to_string(r.result.seed) + ": " + r.error);
      ++out.failed_units;
      continue;
    }
    const std::string name = "seed " + std::to_string(r.result.seed);
    gap.push_back({name, {}, {}});
    acc.push_back({name, {}, {}});
    dl2.push_back({name, {}, {}});
    dmars.push_back({name, {}, {}});
    for (const mae::PipelinePoint& p : r.result.points) {
      const mae::FinetuneMetrics& m = p.metrics;
      out.table.add_row({"mae", std::to_string(r.result.seed), std::to_string(p.t), pipeline_name(p.t),
                         format_double(m.train_loss), format_double(m.test_loss), format_double(m.train_accuracy),
                         format_double(m.accuracy), format_double(m.gap), format_double(p.distance_l2),
                         format_double(p.distance_mars), hex64(r.result.init_checksum)});
      by_t[p.t].push_back(&p);
      gap.back().x.push_back(p.t), gap.back().y.push_back(m.gap);
      acc.back().x.push_back(p.t), acc.back().y.push_back(m.accuracy);
      dl2.back().x.push_back(p.t), dl2.back().y.push_back(p.distance_l2);
      dmars.back().x.push_back(p.t), dmars.back().y.push_back(p.distance_mars);
    }
  }
  Series gap_mean{"mean", {}, {}}, acc_mean{"mean", {}, {}}, dl2_mean{"mean", {}, {}}, dmars_mean{"mean", {}, {}};
  for (const char* stat : {"mean", "sd"}) {
    const bool is_mean = std::string(stat) == "mean";
    for (const auto& [t, pts] : by_t) {
      std::vector<double> cols[7];
      for (const mae::PipelinePoint* p : pts) {
        const double vals[7] = {p->metrics.train_loss, p->metrics.test_loss, p->metrics.train_accuracy,
                                p->metrics.accuracy,   p->metrics.gap,       p->distance_l2,
                                p->distance_mars};
        for (int c = 0; c < 7; ++c) cols[c].push_back(vals[c]);
      }
      std::vector<std::string> row = {"mae", stat, std::to_string(t), pipeline_name(t)};
      for (int c = 0; c < 7; ++c) row.push_back(format_double(is_mean ? mean_of(cols[c]) : sd_of(cols[c])));
      row.push_back("-");
      out.table.add_row(std::move(row));
      if (is_mean) {
        gap_mean.x.push_back(t), gap_mean.y.push_back(mean_of(cols[4]));
        acc_mean.x.push_back(t), acc_mean.y.push_back(mean_of(cols[3]));
        dl2_mean.x.push_back(t), dl2_mean.y.push_back(mean_of(cols[5]));
        dmars_mean.x.push_back(t), dmars_mean.y.push_back(mean_of(cols[6]));
      }
    }
  }
  gap.push_back(gap_mean);
  acc.push_back(acc_mean);
  dl2.push_back(dl2_mean);
  dmars.push_back(dmars_mean);
  const char* x = "pipeline t (-1 fine-tune only, 0 further pre-train)";
  out.charts = {{"mae_gap.svg", "generalisation gap", x, "test - train loss", gap},
                {"mae_accuracy.svg", "held-out accuracy", x, "accuracy", acc},
                {"mae_distance_l2.svg", "encoder distance to theta_init (L2)", x, "distance", dl2},
                {"mae_distance_mars.svg", "encoder distance to theta_init (MARS)", x, "distance", dmars}};
  return out;
}

// ---------------------------------------------------------------- ablate

inline const std::vector<std::string>& ablate_header() {
  static const std::vector<std::string> h = {"mode", "variant", "seed", "t", "train_loss", "test_loss",
                                             "accuracy", "gap", "distance_l2", "distance_mars"};
  return h;
}

/// Fine-tuning from the last self-distillation round of one variant.
inline mae::PipelinePoint ablation_point(const mae::ToyModelParams& theta_init, const mae::ToyTask& task,
                                         mae::TrainConfig tcfg, mae::Variant variant, std::uint64_t seed) {
  tcfg.variant = variant;
  tcfg.seed = seed;
  const mae::SelfDistillResult sd = mae::self_distill(theta_init, task.train.unlabeled(), tcfg);
  return mae::finetune_point(tcfg.rounds, sd.final_params(), theta_init, task.train, task.test, tcfg);
}

struct AblationUnit {
  std::size_t seed_index = 0;
  std::size_t variant_index = 0;
  mae::PipelinePoint point;
  std::string error;
};

inline RunOutcome run_ablate(const ExperimentConfig& cfg) {
  require(cfg.rounds >= 1, ErrorCode::ConfigError, "key 'rounds': ablation needs at least one round");
  const std::vector<std::uint64_t> seeds = sorted_seeds(cfg.seeds);
  const mae::ToyTask task = config_task(cfg);
  const std::vector<SeedInit> inits = build_inits(cfg, task, seeds);
  const mae::TrainConfig tcfg = train_config(cfg);
  const auto& variants = ablation_variants();
  const std::size_t units = variants.size() * seeds.size();
  const auto results = parallel_map<AblationUnit>(units, [&](std::size_t u) {
    AblationUnit a;
    a.variant_index = u / seeds.size();
    a.seed_index = u % seeds.size();
    const SeedInit& init = inits[a.seed_index];
    if (!init.error.empty()) {
      a.error = init.error;
      return a;
    }
    try {
      a.point = ablation_point(init.theta_init, task, tcfg, variants[a.variant_index], init.seed);
    } catch (const std::exception& e) {
      a.error = e.what();
    }
    return a;
  });

  RunOutcome out;
  out.mode = Mode::Ablate;
  out.table = CsvTable(ablate_header());
  for (std::size_t v = 0; v < variants.size(); ++v) {
    const std::string label = variant_label(variants[v]);
    std::vector<double> cols[6];
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const AblationUnit& a = results[v * seeds.size() + s];
      if (!a.error.empty()) {
        out.log.push_back("variant " + label + " seed " + std::to_string(seeds[s]) + ": " + a.error);
        ++out.failed_units;
        continue;
      }
      const mae::FinetuneMetrics& m = a.point.metrics;
      const double vals[6] = {m.train_loss, m.test_loss, m.accuracy, m.gap, a.point.distance_l2, a.point.distance_mars};
      std::vector<std::string> row = {"ablate", label, std::to_string(seeds[s]), std::to_string(a.point.t)};
      for (int c = 0; c < 6; ++c) {
        cols[c].push_back(vals[c]);
        row.push_back(format_double(vals[c]));
      }
      out.table.add_row(std::move(row));
    }
    for (const char* stat : {"mean", "sd"}) {
      std::vector<std::string> row = {"ablate", label, stat, std::to_string(cfg.rounds)};
      for (int c = 0; c < 6; ++c)
        row.push_back(format_double(std::string(stat) == "mean" ? mean_of(cols[c]) : sd_of(cols[c])));
      out.table.add_row(std::move(row));
    }
  }
  return out;
}

// ---------------------------------------------------------------- lowres

inline const std::vector<std::string>& lowres_header() {
  static const std::vector<std::string> h = {"mode", "n", "seed", "accuracy_finetune", "accuracy_further_pretrain",
                                             "accuracy_self_distill", "margin", "gap_self_distill", "class_spread"};
  return h;
}

struct LowresPoint {
  double acc_finetune = 0.0;
  double acc_further = 0.0;
  double acc_distill = 0.0;
  double gap_distill = 0.0;
  Index class_spread = 0;  // max - min per-class count of the subsample

  double margin() const { return acc_distill - acc_finetune; }
};

inline Index class_spread(const mae::ToySequenceDataset& data) {
  std::vector<Index> counts(static_cast<std::size_t>(data.classes), 0);
  for (int c : data.labels) ++counts[static_cast<std::size_t>(c)];
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  return *hi - *lo;
}

/// Both D^tr and D^u are cut down to the same stratified subsample.
inline LowresPoint lowres_point(const mae::ToyModelParams& theta_init, const mae::ToyTask& task,
                                const mae::TrainConfig& tcfg, Index n, std::uint64_t seed) {
  const std::vector<Index> rows = mae::stratified_indices(task.train, n, seed * 0x94d049bb133111ebULL + static_cast<std::uint64_t>(n));
  const mae::ToySequenceDataset train = task.train.subset(rows);
  const mae::PipelineResult r = mae::run_pipeline(theta_init, train, task.test, tcfg, seed);
  LowresPoint p;
  p.acc_finetune = r.at(-1).metrics.accuracy;
  p.acc_further = r.at(0).metrics.accuracy;
  p.acc_distill = r.points.back().metrics.accuracy;
  p.gap_distill = r.points.back().metrics.gap;
  p.class_spread = class_spread(train);
  return p;
}

struct LowresUnit {
  LowresPoint point;
  std::string error;
};

inline RunOutcome run_lowres(const ExperimentConfig& cfg) {
  require(cfg.rounds >= 1, ErrorCode::ConfigError, "key 'rounds': the low-resource study needs at least one round");
  for (Index n : cfg.n_values) {
    require(n <= cfg.pipeline.task.n_train, ErrorCode::ConfigError,
            "key 'n_values': every n must be at most n_train (got " + std::to_string(n) + ")");
    require(n >= cfg.pipeline.task.classes, ErrorCode::SubsampleTooSmall,
            "n = " + std::to_string(n) + " is smaller than the class count C = " +
                std::to_string(cfg.pipeline.task.classes));
  }
  const std::vector<std::uint64_t> seeds = sorted_seeds(cfg.seeds);
  std::vector<Index> ns = cfg.n_values;
  std::sort(ns.begin(), ns.end());
  ns.erase(std::unique(ns.begin(), ns.end()), ns.end());
  const mae::ToyTask task = config_task(cfg);
  const std::vector<SeedInit> inits = build_inits(cfg, task, seeds);
  const mae::TrainConfig tcfg = train_config(cfg);
  const auto results = parallel_map<LowresUnit>(ns.size() * seeds.size(), [&](std::size_t u) {
    LowresUnit r;
    const SeedInit& init = inits[u % seeds.size()];
    if (!init.error.empty()) {
      r.error = init.error;
      return r;
    }
    try {
      r.point = lowres_point(init.theta_init, task, tcfg, ns[u / seeds.size()], init.seed);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    return r;
  });

  RunOutcome out;
  out.mode = Mode::Lowres;
  out.table = CsvTable(lowres_header());
  Series acc_ft{"finetune-only", {}, {}}, acc_fp{"further-pretrain", {}, {}}, acc_sd{"self-distill", {}, {}};
  Series margin{"self-distill - finetune-only", {}, {}};
  for (std::size_t k = 0; k < ns.size(); ++k) {
    std::vector<double> cols[5];
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const LowresUnit& r = results[k * seeds.size() + s];
      if (!r.error.empty()) {
        out.log.push_back("n " + std::to_string(ns[k]) + " seed " + std::to_string(seeds[s]) + ": " + r.error);
        ++out.failed_units;
        continue;
      }
      const LowresPoint& p = r.point;
      const double vals[5] = {p.acc_finetune, p.acc_further, p.acc_distill, p.margin(), p.gap_distill};
      std::vector<std::string> row = {"lowres", std::to_string(ns[k]), std::to_string(seeds[s])};
      for (int c = 0; c < 5; ++c) {
        cols[c].push_back(vals[c]);
        row.push_back(format_double(vals[c]));
      }
      row.push_back(std::to_string(p.class_spread));
      out.table.add_row(std::move(row));
    }
    std::vector<std::string> row = {"lowres", std::to_string(ns[k]), "mean"};
    for (int c = 0; c < 5; ++c) row.push_back(format_double(mean_of(cols[c])));
    row.push_back("-");
    out.table.add_row(std::move(row));
    const double x = static_cast<double>(ns[k]);
    acc_ft.x.push_back(x), acc_ft.y.push_back(mean_of(cols[0]));
    acc_fp.x.push_back(x), acc_fp.y.push_back(mean_of(cols[1]));
    acc_sd.x.push_back(x), acc_sd.y.push_back(mean_of(cols[2]));
    margin.x.push_back(x), margin.y.push_back(mean_of(cols[3]));
  }
  out.charts = {{"lowres_accuracy.svg", "held-out accuracy vs n", "n", "mean accuracy", {acc_ft, acc_fp, acc_sd}},
                {"lowres_margin.svg", "self-distillation margin vs n", "n", "accuracy margin", {margin}}};
  return out;
}

}  // namespace distill_lab::experiment
