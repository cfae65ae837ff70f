#pragma once

#include "distill_lab/experiment/config.hpp"
#include "distill_lab/experiment/mae_runner.hpp"
#include "distill_lab/experiment/outcome.hpp"
#include "distill_lab/experiment/theory_runner.hpp"
#include "distill_lab/experiment/verify.hpp"

namespace distill_lab::experiment {

inline RunOutcome run_mode(const ExperimentConfig& cfg, Fault fault = Fault::None) {
  switch (cfg.mode) {
    case Mode::Theory: return run_theory(cfg);
    case Mode::Mae: return run_mae(cfg);
    case Mode::Ablate: return run_ablate(cfg);
    case Mode::Lowres: return run_lowres(cfg);
    case Mode::Verify: return run_verify(cfg, fault);
  }
  throw Error(ErrorCode::ConfigError, "unknown mode");
}

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitInvariant = 3, kExitRuntime = 4 };

/// Codes raised by a bad configuration rather than by a failed computation.
inline bool is_config_error(ErrorCode code) {
  return code == ErrorCode::ConfigError || code == ErrorCode::UnknownVariant || code == ErrorCode::SubsampleTooSmall;
}

}  // namespace distill_lab::experiment
