#pragma once

// One seed of the full toy pipeline: build theta_init on the general pool,
// then compare fine-tuning from theta_init, from the further pre-trained
// weights, and from each self-distillation round.

#include <cstdint>
#include <vector>

#include "distill_lab/mae/checkpoint.hpp"
#include "distill_lab/mae/data.hpp"
#include "distill_lab/mae/model.hpp"
#include "distill_lab/mae/train.hpp"

namespace distill_lab::mae {

struct PipelineConfig {
  ToyTaskConfig task;
  std::uint64_t task_seed = 7;
  ModelDims dims;
  TrainConfig train;
  int general_steps = 300;
  double general_lr = 0.1;
  Index general_batch = 32;
};

inline ModelDims dims_for(const ToyTaskConfig& task, ModelDims dims) {
  dims.mode = task.mode;
  dims.K = task.K;
  dims.vocab = task.vocab;
  dims.patch_dim = task.patch_dim;
  return dims;
}

/// theta_init and phi_init: a fresh model trained on the general-domain pool.
inline ToyModelParams build_initial_weights(const ToySequenceDataset& general, const PipelineConfig& cfg,
                                            std::uint64_t seed) {
  const ToyModelParams fresh = init_params(dims_for(cfg.task, cfg.dims), seed * 0x2545f4914f6cdd1dULL + 11);
  TrainConfig pre = cfg.train;
  pre.steps_pretrain = cfg.general_steps;
  pre.lr_pretrain = cfg.general_lr;
  pre.batch = cfg.general_batch;
  pre.seed = seed + 0x9e37;
  return further_pretrain(fresh, general, pre);
}

struct PipelinePoint {
  int t = 0;  // -1 fine-tune only, 0 further pre-training, t >= 1 self-distillation round t
  FinetuneMetrics metrics;
  double distance_l2 = 0.0;    // ||theta_init - theta_{t,T}||_2, encoder
  double distance_mars = 0.0;  // same in the MARS norm
};

struct PipelineResult {
  std::uint64_t seed = 0;
  std::uint64_t init_checksum = 0;
  std::vector<PipelinePoint> points;  // t = -1, 0, 1, ..., T'

  const PipelinePoint& at(int t) const { return points.at(static_cast<std::size_t>(t + 1)); }
};

inline PipelinePoint finetune_point(int t, const ToyModelParams& start, const ToyModelParams& theta_init,
                                    const ToySequenceDataset& train, const ToySequenceDataset& test,
                                    const TrainConfig& cfg) {
  const FinetuneResult ft = finetune(start, train, test, cfg);
  PipelinePoint pt;
  pt.t = t;
  pt.metrics = ft.metrics;
  pt.distance_l2 = encoder_distance(theta_init, ft.params, DistanceNorm::L2);
  pt.distance_mars = encoder_distance(theta_init, ft.params, DistanceNorm::Mars);
  return pt;
}

/// Runs every pipeline for one seed on a labeled training split; D^u is the
/// same split without labels. `theta_init` is shared by all pipelines.
inline PipelineResult run_pipeline(const ToyModelParams& theta_init, const ToySequenceDataset& train,
                                   const ToySequenceDataset& test, TrainConfig cfg, std::uint64_t seed) {
  cfg.seed = seed;
  PipelineResult out;
  out.seed = seed;
  out.init_checksum = checksum(theta_init);
  const ToySequenceDataset unlabeled = train.unlabeled();
  out.points.push_back(finetune_point(-1, theta_init, theta_init, train, test, cfg));
  if (cfg.rounds == 0) {
    out.points.push_back(finetune_point(0, further_pretrain(theta_init, unlabeled, cfg), theta_init, train, test, cfg));
    return out;
  }
  const SelfDistillResult sd = self_distill(theta_init, unlabeled, cfg);
  for (std::size_t t = 0; t < sd.rounds.size(); ++t)
    out.points.push_back(finetune_point(static_cast<int>(t), sd.rounds[t], theta_init, train, test, cfg));
  return out;
}

}  // namespace distill_lab::mae
