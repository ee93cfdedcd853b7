#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace dsr {

class ModelError : public std::runtime_error {
 public:
  explicit ModelError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class VarKind { continuous, binary };

using VarId = int;

struct VariableSpec {
  std::string name;  // unique, LP-safe: [A-Za-z_][A-Za-z0-9_]*
  VarKind kind = VarKind::continuous;
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
};

struct LinearTerm {
  double coef = 0.0;
  VarId var = -1;
};

enum class Sense { le, eq, ge };

struct LinearConstraint {
  std::string name;
  std::vector<LinearTerm> terms;  // duplicate variables pre-merged
  Sense sense = Sense::le;
  double rhs = 0.0;
};

/// Generic mixed-integer linear model with a maximization objective.
class MilpModel {
 public:
  VarId add_variable(VariableSpec spec);
  void add_constraint(LinearConstraint c);
  void add_objective_term(double coef, VarId var);

  int n_variables() const { return static_cast<int>(vars_.size()); }
  int n_constraints() const { return static_cast<int>(cons_.size()); }
  int n_binary() const { return n_binary_; }
  int n_continuous() const { return n_variables() - n_binary_; }

  const VariableSpec& variable(VarId id) const { return vars_.at(id); }
  VariableSpec& mutable_variable(VarId id) { return vars_.at(id); }
  const std::vector<VariableSpec>& variables() const { return vars_; }
  const std::vector<LinearConstraint>& constraints() const { return cons_; }
  const std::vector<LinearTerm>& objective() const { return objective_; }

  VarId find_variable(const std::string& name) const;  // -1 if absent
  const LinearConstraint* find_constraint(const std::string& name) const;

  /// Pins a variable to a constant by collapsing its bounds.
  void fix_variable(VarId id, double value);

 private:
  std::vector<VariableSpec> vars_;
  std::unordered_map<std::string, VarId> by_name_;
  std::vector<LinearConstraint> cons_;
  std::vector<LinearTerm> objective_;
  int n_binary_ = 0;
};

enum class SolverStatus { optimal, feasible, infeasible, timeout };

std::string to_string(SolverStatus s);

/// Integrality tolerance when interpreting binary values.
inline constexpr double kIntegralityTol = 1e-6;

struct Assignment {
  std::vector<double> values;  // indexed by VarId; absent names default to 0
  double objective_value = 0.0;
  double gap = 0.0;
  SolverStatus status = SolverStatus::infeasible;

  double value(VarId id) const { return values.at(id); }
  bool feasible() const {
    return status == SolverStatus::optimal || status == SolverStatus::feasible;
  }
};

/// CPLEX-LP-format text, deterministic: insertion order, 17 significant
/// digits on every coefficient.
std::string write_lp(const MilpModel& model);

/// Parses a solver solution file: a status/objective header plus "name value"
/// lines. SCIP- and CBC-style solution files are accepted too.
Assignment read_solution(const std::string& text, const MilpModel& model);

}  // namespace dsr
