#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "dsr/milp.hpp"

namespace dsr {

class SolveError : public std::runtime_error {
 public:
  explicit SolveError(const std::string& msg) : std::runtime_error(msg) {}
};

/// External-solver invocation. `command` is a shell template with the
/// placeholders {lp}, {sol}, {time_limit}, {gap}. Resolution order when
/// empty: the DSR_SOLVER_CMD environment variable, then the built-in
/// adapter (a bundled python script backed by scipy's HiGHS interface).
struct SolverConfig {
  std::string command;
  double time_limit_s = 3000.0;
  double rel_gap = 1e-4;
  bool keep_artifacts = false;
  std::string artifact_dir;  // empty: a fresh temp directory per call
};

/// Named command templates: "scipy" (built-in), "scip", "cbc".
SolverConfig solver_preset(const std::string& name);

struct SolveStats {
  double wall_seconds = 0.0;
  std::string lp_path;
  std::string sol_path;
};

Assignment solve(const MilpModel& model, const SolverConfig& config = {},
                 SolveStats* stats = nullptr);

/// Solves many models in one solver process when the built-in adapter is in
/// use (amortizes interpreter startup); falls back to sequential calls for
/// custom commands.
std::vector<Assignment> solve_batch(const std::vector<const MilpModel*>& models,
                                    const SolverConfig& config = {});

}  // namespace dsr
