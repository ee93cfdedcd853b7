#pragma once

#include <string>
#include <vector>

#include "dsr/blocks.hpp"
#include "dsr/feeder.hpp"
#include "dsr/formulation.hpp"
#include "dsr/plan.hpp"
#include "dsr/solver.hpp"

namespace dsr {

struct CheckIssue {
  int t = -1;
  std::string rule;    // short machine-readable tag
  std::string detail;  // human-readable explanation
};

struct ValidationReport {
  std::vector<CheckIssue> issues;
  /// Blocks with a mix of served and shed loads, per step; always zero under
  /// the block-level shedding kinds.
  std::vector<int> partial_blocks_per_step;
  int partial_block_total = 0;
  double max_power_balance_residual_kw = 0.0;
  double delivered_mwh = 0.0;      // unweighted served energy
  double objective_check_kwh = 0.0;  // priority-weighted, recomputed from the plan

  bool ok() const { return issues.empty(); }
};

struct ValidationOptions {
  double tol = 1e-5;  // per-unit feasibility tolerance
};

/// Re-derives every physical and logical requirement from the plan alone and
/// reports violations; trusts nothing but the feeder description.
ValidationReport check_plan(const FeederModel& model,
                            const BlockPartition& partition,
                            const RestorationPlan& plan,
                            const FormulationOptions& fopts = {},
                            const ValidationOptions& vopts = {});

/// Served energy in MWh over the horizon, optionally priority-weighted.
double delivered_energy_mwh(const FeederModel& model, const RestorationPlan& plan,
                            bool weighted = false);

struct OracleResult {
  bool found = false;
  double objective_kwh = 0.0;
  int configs_enumerated = 0;
  int lps_solved = 0;
};

/// Exhaustive reference optimum: enumerates every admissible switching and
/// shedding trajectory, ranks by objective, and accepts the best one whose
/// continuous dispatch subproblem is feasible. Exponential; refuses feeders
/// beyond a small size guard. Independent of build_dsr by construction.
OracleResult brute_force_optimum(const FeederModel& model,
                                 const BlockPartition& partition,
                                 FormulationKind kind,
                                 const FormulationOptions& opts = {},
                                 const SolverConfig& solver = {});

}  // namespace dsr
