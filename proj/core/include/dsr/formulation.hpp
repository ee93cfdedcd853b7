#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dsr/blocks.hpp"
#include "dsr/feeder.hpp"
#include "dsr/milp.hpp"

namespace dsr {

class BuildError : public std::runtime_error {
 public:
  explicit BuildError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class FormulationKind { traditional, block, block_gfm };

std::string to_string(FormulationKind k);
FormulationKind formulation_kind_from_string(const std::string& s);

struct FormulationOptions {
  int switch_closures_per_step = 1;
  bool monotone_restoration = true;
  /// Big-M for decoupling voltage drop across open switches; <= 0 selects
  /// the per-line default vmax^2 - vmin^2 over the endpoints.
  double big_m_voltage = 0.0;
  int thermal_polygon_sides = 8;  // one of 4, 8, 16
  bool enforce_radiality = true;
};

/// Map from (symbol, object, phase, timestep) to MILP variable ids. Phase -1
/// marks phase-free symbols. Names follow <symbol>_<object>_<phase?>_t<step>,
/// so the index is reconstructible from names alone.
class VarIndex {
 public:
  struct Entry {
    std::string symbol;
    std::string object;
    int phase = -1;  // ordinal of Phase, or -1
    int t = 0;
    VarId var = -1;
  };

  void insert(const std::string& symbol, const std::string& object, int phase,
              int t, VarId var);
  VarId at(const std::string& symbol, const std::string& object, int phase,
           int t) const;
  std::optional<VarId> find(const std::string& symbol, const std::string& object,
                            int phase, int t) const;
  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
  std::map<std::string, VarId> by_key_;
  static std::string key(const std::string& symbol, const std::string& object,
                         int phase, int t);
};

struct GroupCounts {
  int constraints = 0;
  int variables = 0;
  int binaries = 0;
  int continuous = 0;
};

/// Per-group variable/constraint tallies; group sums equal model totals.
struct ConstraintGroupReport {
  std::map<std::string, GroupCounts> groups;
  int total_constraints = 0;
  int total_variables = 0;
  int total_binaries = 0;
  int total_continuous = 0;
};

struct BuildResult {
  MilpModel model;
  VarIndex index;
  ConstraintGroupReport report;
};

/// Translates a feeder + block partition into the restoration MILP for the
/// requested formulation kind.
BuildResult build_dsr(const FeederModel& model, const BlockPartition& partition,
                      FormulationKind kind, const FormulationOptions& opts = {});

/// Closed-form binary-variable count for a build; build_dsr's output matches
/// this exactly.
int expected_binary_count(const FeederModel& model, const BlockPartition& partition,
                          FormulationKind kind, const FormulationOptions& opts = {});

/// Multiphase LinDistFlow coefficient matrices for one line: row-major n x n
/// M_P and M_Q with w_to = w_from - (M_P p + M_Q q) per phase row.
/// M_P = 2 Re(G o conj(Z)), M_Q = -2 Im(G o conj(Z)), G_{pq} = a^(n(p)-n(q)),
/// a = exp(-j 2 pi / 3).
void lindistflow_coefficients(const LineParams& line, std::vector<double>& mp,
                              std::vector<double>& mq);

/// Half-plane cuts approximating |S| <= limit: ux*p + uy*q <= scale*limit.
/// The polygon is balanced between inscribed and circumscribed, so points may
/// exceed the circle by at most a factor sec(pi/sides)*scale.
struct PolygonCut {
  double ux = 0.0;
  double uy = 0.0;
  double scale = 1.0;
};
std::vector<PolygonCut> thermal_polygon_cuts(int sides);

/// Objective coefficient that lands on the energization binary of `load` at
/// step t: kappa * dt * sum_phi Re(demand) (kW h).
double objective_coefficient(const FeederModel& model, const std::string& load_id,
                             int t);

std::string lp_safe(const std::string& id);

}  // namespace dsr
