#pragma once

#include <map>
#include <string>
#include <vector>

#include "dsr/blocks.hpp"
#include "dsr/feeder.hpp"
#include "dsr/formulation.hpp"
#include "dsr/milp.hpp"

namespace dsr {

/// Full operating point for one timestep, in physical units (kW, kWh; bus
/// voltages as squared magnitude in per-unit).
struct TimestepState {
  std::map<std::string, int> switch_closed;
  std::vector<int> block_energized;  // by block id; empty under per-load shedding
  std::map<std::string, int> load_energized;
  std::map<std::string, int> grid_forming;  // capable DGs only
  std::map<std::string, std::map<char, Complex>> dg_output_kw;
  std::map<std::string, std::map<char, Complex>> load_served_kw;
  std::map<std::string, std::map<char, Complex>> line_flow_kw;
  std::map<std::string, std::map<char, double>> bus_w;
  std::map<std::string, double> battery_energy_kwh;
  std::map<std::string, double> battery_rate_kw;
};

struct RestorationPlan {
  std::string feeder;
  FormulationKind kind = FormulationKind::traditional;
  SolverStatus status = SolverStatus::infeasible;
  double objective_kwh = 0.0;
  double gap = 0.0;
  std::vector<TimestepState> steps;
};

/// Reads a solved assignment back into physical quantities. Binary values
/// farther than the integrality tolerance from 0/1 raise ModelError.
RestorationPlan extract_plan(const FeederModel& model,
                             const BlockPartition& partition,
                             FormulationKind kind, const BuildResult& build,
                             const Assignment& assignment);

std::string plan_to_json(const RestorationPlan& plan);
RestorationPlan plan_from_json(const std::string& text);

}  // namespace dsr
