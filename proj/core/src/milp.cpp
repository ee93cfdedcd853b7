#include "dsr/milp.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

namespace dsr {

namespace {

bool lp_safe_name(const std::string& s) {
  if (s.empty()) return false;
  if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_';
  });
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string to_string(SolverStatus s) {
  switch (s) {
    case SolverStatus::optimal: return "optimal";
    case SolverStatus::feasible: return "feasible";
    case SolverStatus::infeasible: return "infeasible";
    case SolverStatus::timeout: return "timeout";
  }
  return "unknown";
}

VarId MilpModel::add_variable(VariableSpec spec) {
  if (!lp_safe_name(spec.name))
    throw ModelError("variable name is not LP-safe: \"" + spec.name + "\"");
  if (by_name_.count(spec.name))
    throw ModelError("duplicate variable name: " + spec.name);
  if (spec.kind == VarKind::binary) {
    spec.lower = std::max(spec.lower, 0.0);
    spec.upper = std::min(spec.upper, 1.0);
    ++n_binary_;
  }
  if (spec.lower > spec.upper)
    throw ModelError("lower bound exceeds upper bound for " + spec.name);
  VarId id = static_cast<VarId>(vars_.size());
  by_name_.emplace(spec.name, id);
  vars_.push_back(std::move(spec));
  return id;
}

void MilpModel::add_constraint(LinearConstraint c) {
  // Merge duplicate variables so stored constraints are canonical.
  std::map<VarId, double> merged;
  for (const auto& t : c.terms) {
    if (t.var < 0 || t.var >= n_variables())
      throw ModelError("constraint " + c.name + " references undeclared variable");
    if (!std::isfinite(t.coef))
      throw ModelError("constraint " + c.name + " has a non-finite coefficient");
    merged[t.var] += t.coef;
  }
  c.terms.clear();
  for (const auto& [var, coef] : merged) c.terms.push_back({coef, var});
  cons_.push_back(std::move(c));
}

void MilpModel::add_objective_term(double coef, VarId var) {
  if (var < 0 || var >= n_variables())
    throw ModelError("objective references undeclared variable");
  for (auto& t : objective_) {
    if (t.var == var) {
      t.coef += coef;
      return;
    }
  }
  objective_.push_back({coef, var});
}

VarId MilpModel::find_variable(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? -1 : it->second;
}

const LinearConstraint* MilpModel::find_constraint(const std::string& name) const {
  for (const auto& c : cons_)
    if (c.name == name) return &c;
  return nullptr;
}

void MilpModel::fix_variable(VarId id, double value) {
  VariableSpec& v = vars_.at(id);
  v.lower = value;
  v.upper = value;
}

std::string write_lp(const MilpModel& model) {
  if (model.n_variables() == 0) throw ModelError("cannot write an empty model");

  std::ostringstream os;
  auto terms = [&](const std::vector<LinearTerm>& ts) {
    bool first = true;
    for (const auto& t : ts) {
      const std::string& name = model.variable(t.var).name;
      if (first) {
        os << fmt(t.coef) << ' ' << name;
        first = false;
      } else if (t.coef < 0) {
        os << " - " << fmt(-t.coef) << ' ' << name;
      } else {
        os << " + " << fmt(t.coef) << ' ' << name;
      }
    }
    return !first;
  };

  os << "Maximize\n obj: ";
  if (!terms(model.objective())) {
    // Zero-coefficient anchor keeps the section well-formed.
    os << "0 " << model.variable(0).name;
  }
  os << "\nSubject To\n";
  for (const auto& c : model.constraints()) {
    os << ' ' << c.name << ": ";
    if (!terms(c.terms)) os << "0 " << model.variable(0).name;
    switch (c.sense) {
      case Sense::le: os << " <= "; break;
      case Sense::eq: os << " = "; break;
      case Sense::ge: os << " >= "; break;
    }
    os << fmt(c.rhs) << '\n';
  }

  os << "Bounds\n";
  const double inf = std::numeric_limits<double>::infinity();
  for (const auto& v : model.variables()) {
    if (v.kind == VarKind::binary) continue;
    if (v.lower == -inf && v.upper == inf) {
      os << ' ' << v.name << " free\n";
    } else if (v.lower == -inf) {
      os << ' ' << v.name << " <= " << fmt(v.upper) << '\n';
    } else if (v.upper == inf) {
      os << ' ' << v.name << " >= " << fmt(v.lower) << '\n';
    } else if (v.lower == v.upper) {
      os << ' ' << v.name << " = " << fmt(v.lower) << '\n';
    } else {
      os << ' ' << fmt(v.lower) << " <= " << v.name << " <= " << fmt(v.upper) << '\n';
    }
  }

  if (model.n_binary() > 0) {
    os << "Binary\n";
    for (const auto& v : model.variables())
      if (v.kind == VarKind::binary) os << ' ' << v.name << '\n';
  }
  os << "End\n";
  return os.str();
}

namespace {

bool parse_number(const std::string& tok, double& out) {
  try {
    size_t pos = 0;
    out = std::stod(tok, &pos);
    return pos == tok.size();
  } catch (...) {
    return false;
  }
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return s;
}

}  // namespace

Assignment read_solution(const std::string& text, const MilpModel& model) {
  Assignment a;
  a.values.assign(model.n_variables(), 0.0);
  a.status = SolverStatus::optimal;  // bare "name value" files imply a solution
  bool saw_any = false;
  bool declared_infeasible = false;

  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (!line.empty() && (line[0] == '#' || line[0] == '\\')) continue;
    std::istringstream ls(line);
    std::vector<std::string> toks;
    std::string t;
    while (ls >> t) toks.push_back(t);
    if (toks.empty()) continue;

    std::string head = lower(toks[0]);
    if (head == "status" && toks.size() >= 2) {
      std::string s = lower(toks[1]);
      if (s == "optimal") a.status = SolverStatus::optimal;
      else if (s == "feasible") a.status = SolverStatus::feasible;
      else if (s == "infeasible") declared_infeasible = true;
      else if (s == "timeout" || s == "time_limit") a.status = SolverStatus::timeout;
      else throw ModelError("unrecognized solver status: " + toks[1]);
      continue;
    }
    if (head == "objective" || head == "gap") {
      double v = 0;
      if (toks.size() >= 2 && parse_number(toks[1], v) && head == "gap") a.gap = v;
      continue;
    }
    // SCIP: "solution status: optimal" / "objective value: 12.5"
    if ((head == "solution" || head == "objective") && toks.size() >= 2) {
      if (head == "solution" && toks.size() >= 3 &&
          lower(toks[2]).find("infeasible") != std::string::npos)
        declared_infeasible = true;
      continue;
    }
    // CBC: "Optimal - objective value 12.5", "Infeasible - ..."
    if (head == "optimal" || head == "infeasible" || head == "unbounded" ||
        head == "stopped") {
      if (head == "infeasible") declared_infeasible = true;
      if (head == "unbounded") throw ModelError("solver reports an unbounded model");
      continue;
    }

    // Value row. CBC prefixes a row index; SCIP appends "(obj:...)".
    size_t name_pos = 0;
    double ignored;
    if (toks.size() >= 3 && parse_number(toks[0], ignored)) name_pos = 1;
    if (name_pos + 1 >= toks.size())
      throw ModelError("unparseable solution line: " + line);
    const std::string& name = toks[name_pos];
    double value;
    if (!parse_number(toks[name_pos + 1], value))
      throw ModelError("unparseable solution line: " + line);
    VarId id = model.find_variable(name);
    if (id < 0) throw ModelError("solution references unknown variable: " + name);
    a.values[id] = value;
    saw_any = true;
  }

  if (declared_infeasible) {
    a.status = SolverStatus::infeasible;
    a.values.assign(model.n_variables(), 0.0);
    a.objective_value = 0.0;
    return a;
  }
  if (!saw_any && a.status != SolverStatus::timeout)
    throw ModelError("solution file contains no variable values");

  a.objective_value = 0.0;
  for (const auto& t : model.objective()) a.objective_value += t.coef * a.values[t.var];
  return a;
}

}  // namespace dsr
