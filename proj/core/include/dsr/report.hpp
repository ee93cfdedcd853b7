#pragma once

#include <string>
#include <vector>

#include "dsr/blocks.hpp"
#include "dsr/feeder.hpp"
#include "dsr/formulation.hpp"
#include "dsr/plan.hpp"

namespace dsr {

/// One solved case, for side-by-side comparison across formulation kinds.
struct RunRecord {
  std::string case_name;
  FormulationKind kind = FormulationKind::traditional;
  int binary_vars = 0;
  int continuous_vars = 0;
  int constraints = 0;
  double solve_seconds = 0.0;
  double objective_kwh = 0.0;
  double gap = 0.0;
  int loads_shed = 0;   // load-timestep pairs with zero service
  int blocks_shed = 0;  // block-timestep pairs with no served load
  double delivered_mwh = 0.0;
};

/// Fills the size/outcome columns of a record from a solved case.
RunRecord summarize_run(const std::string& case_name, const FeederModel& model,
                        const BlockPartition& partition, const BuildResult& build,
                        const RestorationPlan& plan, double solve_seconds);

std::string format_stats_table(const std::vector<RunRecord>& rows);
std::string format_stats_csv(const std::vector<RunRecord>& rows);

/// Graphviz rendering of the block structure; with a plan, block fill and
/// switch styling reflect the state at step t (default: the final step).
std::string emit_dot(const FeederModel& model, const BlockPartition& partition,
                     const RestorationPlan* plan = nullptr, int t = -1);

}  // namespace dsr
