#pragma once

// mode=theory: per seed, the bound quantities and the actual fine-tuning
// distance for rounds t = 0..T', with both oracle residuals.

#include <cstdint>
#include <string>
#include <vector>

#include "distill_lab/bounds.hpp"
#include "distill_lab/distill.hpp"
#include "distill_lab/experiment/config.hpp"
#include "distill_lab/experiment/outcome.hpp"
#include "distill_lab/experiment/parallel.hpp"
#include "distill_lab/flow.hpp"
#include "distill_lab/instance.hpp"

namespace distill_lab::experiment {

inline const std::vector<std::string>& theory_header() {
  static const std::vector<std::string> h = {
      "mode", "seed", "t", "zeta", "psi", "G1", "psi1", "B", "G2", "bound_rhs", "cross", "psi_attained", "distance",
      "zeta_trend", "psi_trend", "oracle_residual_distill", "oracle_residual_flow", "teacher_residual"};
  return h;
}

struct TheoryPoint {
  BoundReport report;
  double distance = 0.0;  // ||w_init - w_{t,T}||
  double residual_distill = 0.0;
  double residual_flow = 0.0;
  double residual_teacher = 0.0;
};

inline double relative_error(const Vector& a, const Vector& reference) {
  const double scale = reference.norm();
  return (a - reference).norm() / (scale > 0.0 ? scale : 1.0);
}

/// Rounds 0..rounds for one seed of the configured instance.
inline std::vector<TheoryPoint> theory_points(const ExperimentConfig& cfg, std::uint64_t seed) {
  const TheoryInstance inst = make_theory_instance(cfg.instance, seed);
  const SpectralDecomposition& spec = inst.spec;
  FlowConfig flow;
  flow.horizon = cfg.horizon;
  flow.euler_step = default_euler_step(spec, cfg.euler_factor);
  BoundInputs bounds = cfg.bounds;
  if (cfg.auto_R) bounds.R = empirical_feature_bound(inst.design);
  const Vector f0 = spec.outputs(inst.w00);

  std::vector<TheoryPoint> points;
  for (int t = 0; t <= cfg.rounds; ++t) {
    DistillConfig dc;
    dc.lambda = cfg.lambda;
    dc.rounds = t;
    dc.n = spec.n();
    const DistillState state = closed_form_distill(spec, inst.w00, dc);
    TheoryPoint pt;
    pt.report = bound_report(spec, state, inst.y, flow, inst.w_init.norm(), &bounds);
    const FineTuneTrajectory traj = finetune_closed_form(spec, state, inst.y, flow);
    pt.distance = (inst.w_init - traj.w_final).norm();
    pt.residual_distill = relative_error(state.w, iterate_distill(spec, inst.w00, dc));
    pt.residual_flow = relative_error(traj.w_final, euler_oracle(spec.phi(), spec.p(), inst.y, state.w, flow).w);
    pt.residual_teacher = relative_error(propagate_teacher(spec, f0, t, dc), spec.outputs(state.w));
    points.push_back(pt);
  }
  return points;
}

struct TheorySeedResult {
  std::uint64_t seed = 0;
  std::vector<TheoryPoint> points;
  std::string error;
};

inline RunOutcome run_theory(const ExperimentConfig& cfg) {
  const std::vector<std::uint64_t> seeds = sorted_seeds(cfg.seeds);
  const auto results = parallel_map<TheorySeedResult>(seeds.size(), [&](std::size_t i) {
    TheorySeedResult r;
    r.seed = seeds[i];
    try {
      r.points = theory_points(cfg, r.seed);
    } catch (const std::exception& e) {
      r.error = e.what();
    }
    return r;
  });

  RunOutcome out;
  out.mode = Mode::Theory;
  out.table = CsvTable(theory_header());
  std::vector<Series> zeta, psi, distance, rhs;
  for (const TheorySeedResult& r : results) {
    if (!r.error.empty()) {
      out.log.push_back("seed " + std::to_string(r.seed) + ": " + r.error);
      ++out.failed_units;
      continue;
    }
    const std::string name = "seed " + std::to_string(r.seed);
    zeta.push_back({name, {}, {}});
    psi.push_back({name, {}, {}});
    distance.push_back({name, {}, {}});
    rhs.push_back({name, {}, {}});
    for (std::size_t k = 0; k < r.points.size(); ++k) {
      const TheoryPoint& p = r.points[k];
      const BoundReport& b = p.report;
      std::string zt = "-", pt = "-";
      if (k > 0) {
        zt = to_string(classify_step(r.points[k - 1].report.zeta, b.zeta));
        const BoundReport& a = r.points[k - 1].report;
        pt = to_string(classify_step(a.psi, b.psi, std::max(a.psi - a.G2, b.psi - b.G2)));
      }
      out.table.add_row({"theory", std::to_string(r.seed), std::to_string(b.t), format_double(b.zeta),
                         format_double(b.psi), format_double(b.G1), format_double(b.psi1), format_double(b.B),
                         format_double(b.G2), format_double(b.bound_rhs), format_double(b.cross),
                         format_double(b.psi_attained), format_double(p.distance), zt, pt,
                         format_double(p.residual_distill), format_double(p.residual_flow),
                         format_double(p.residual_teacher)});
      const double t = b.t;
      zeta.back().x.push_back(t), zeta.back().y.push_back(b.zeta);
      psi.back().x.push_back(t), psi.back().y.push_back(b.psi);
      distance.back().x.push_back(t), distance.back().y.push_back(p.distance);
      rhs.back().x.push_back(t), rhs.back().y.push_back(b.bound_rhs);
    }
  }
  out.charts = {{"theory_zeta.svg", "weight-norm bound zeta(t)", "round t", "zeta", zeta},
                {"theory_psi.svg", "distance bound psi(t)", "round t", "psi", psi},
                {"theory_distance.svg", "||w_init - w_t,T||", "round t", "distance", distance},
                {"theory_bound_rhs.svg", "bound remainder", "round t", "remainder", rhs}};
  return out;
}

}  // namespace distill_lab::experiment
