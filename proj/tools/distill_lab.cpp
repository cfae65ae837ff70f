// distill-lab <mode> --config <path> [--out <dir>] [--seeds a,b,c] [--rounds T'] [--inject-fault <name>]

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "distill_lab/experiment/config.hpp"
#include "distill_lab/experiment/run.hpp"

namespace ex = distill_lab::experiment;
using distill_lab::Error;
using distill_lab::ErrorCode;

namespace {

ex::ExperimentConfig resolve_config(const std::string& mode_name, const std::string& config_path,
                                    const std::string& out, const std::string& seeds, int rounds) {
  ex::ExperimentConfig cfg = config_path.empty() ? ex::ExperimentConfig{} : ex::load_config(config_path);
  const ex::Mode mode = ex::parse_mode(mode_name);
  if (cfg.mode_given && cfg.mode != mode)
    throw Error(ErrorCode::ConfigError, "line " + std::to_string(cfg.line_of("mode")) + ": key 'mode': config says '" +
                                            std::string(ex::to_string(cfg.mode)) + "' but the command line asks for '" +
                                            mode_name + "'");
  cfg.mode = mode;
  if (!out.empty()) ex::apply_setting(cfg, "out", out, 0);
  if (!seeds.empty()) ex::apply_setting(cfg, "seeds", seeds, 0);
  if (rounds >= 0) ex::apply_setting(cfg, "rounds", std::to_string(rounds), 0);
  ex::validate(cfg);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distill-lab: self-distillation theory and toy masked-autoencoder experiments"};
  std::string mode_name, config_path, out, seeds, fault_name = "none";
  int rounds = -1;
  app.add_option("mode", mode_name, "theory | mae | ablate | lowres | verify")->required();
  app.add_option("--config", config_path, "key=value configuration file");
  app.add_option("--out", out, "output directory (overrides the config)");
  app.add_option("--seeds", seeds, "comma-separated seed list (overrides the config)");
  app.add_option("--rounds", rounds, "number of self-distillation rounds T' (overrides the config)")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--inject-fault", fault_name, "verify only: closed-form | flow | gradient");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ex::kExitOk : ex::kExitConfig;
  }

  ex::ExperimentConfig cfg;
  ex::Fault fault = ex::Fault::None;
  try {
    cfg = resolve_config(mode_name, config_path, out, seeds, rounds);
    fault = ex::parse_fault(fault_name);
    if (fault != ex::Fault::None && cfg.mode != ex::Mode::Verify)
      throw Error(ErrorCode::ConfigError, "--inject-fault only applies to verify");
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return ex::kExitConfig;
  }

  try {
    ex::RunOutcome outcome = ex::run_mode(cfg, fault);
    ex::write_outcome(outcome, cfg.out);
    for (const std::string& line : outcome.log) std::cerr << "warning: " << line << "\n";
    if (!outcome.text_report.empty()) std::cout << outcome.text_report;
    std::cout << "wrote " << outcome.table.rows().size() << " rows to " << cfg.out << "/" << ex::to_string(cfg.mode)
              << ".csv\n";
    if (outcome.failed_checks > 0) return ex::kExitInvariant;
    if (outcome.failed_units > 0) return ex::kExitRuntime;
    return ex::kExitOk;
  } catch (const Error& e) {
    std::cerr << (ex::is_config_error(e.code()) ? "config error: " : "error: ") << e.what() << "\n";
    return ex::is_config_error(e.code()) ? ex::kExitConfig : ex::kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ex::kExitRuntime;
  }
}
