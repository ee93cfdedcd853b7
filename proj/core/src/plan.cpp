#include "dsr/plan.hpp"

#include <cmath>

#include "json.hpp"

namespace dsr {

namespace {

using nlohmann::json;

int as_round(double v) { return v > 0.5 ? 1 : 0; }

SolverStatus status_from_string(const std::string& s) {
  if (s == "optimal") return SolverStatus::optimal;
  if (s == "feasible") return SolverStatus::feasible;
  if (s == "infeasible") return SolverStatus::infeasible;
  if (s == "timeout") return SolverStatus::timeout;
  throw ParseError("unknown plan status: " + s);
}

json phase_map_to_json(const std::map<char, Complex>& m) {
  json out = json::object();
  for (const auto& [ph, v] : m) out[std::string(1, ph)] = {v.real(), v.imag()};
  return out;
}

std::map<char, Complex> phase_map_from_json(const json& j) {
  std::map<char, Complex> out;
  for (auto it = j.begin(); it != j.end(); ++it)
    out[it.key().at(0)] = Complex(it.value().at(0).get<double>(),
                                  it.value().at(1).get<double>());
  return out;
}

}  // namespace

RestorationPlan extract_plan(const FeederModel& model,
                             const BlockPartition& partition,
                             FormulationKind kind, const BuildResult& build,
                             const Assignment& assignment) {
  RestorationPlan plan;
  plan.feeder = model.name;
  plan.kind = kind;
  plan.status = assignment.status;
  plan.gap = assignment.gap;
  if (!assignment.feasible()) return plan;
  plan.objective_kwh = assignment.objective_value;

  for (VarId id = 0; id < build.model.n_variables(); ++id) {
    const VariableSpec& v = build.model.variable(id);
    if (v.kind != VarKind::binary) continue;
    double val = assignment.value(id);
    if (std::abs(val - std::round(val)) > kIntegralityTol)
      throw ModelError("binary " + v.name + " is fractional: " +
                       std::to_string(val));
  }

  // The index stores LP-safe ids; recover the originals.
  std::map<std::string, std::string> orig;
  auto learn = [&](const std::string& id) {
    auto [it, fresh] = orig.emplace(lp_safe(id), id);
    if (!fresh && it->second != id)
      throw ModelError("object ids collide after LP mangling: " + id + " vs " +
                       it->second);
  };
  for (const auto& b : model.buses) learn(b.id);
  for (const auto& l : model.lines) learn(l.id);
  for (const auto& d : model.loads) learn(d.id);
  for (const auto& g : model.dgs) learn(g.id);

  plan.steps.resize(model.horizon.n_steps);
  if (kind != FormulationKind::traditional)
    for (auto& s : plan.steps) s.block_energized.assign(partition.size(), 0);

  const double kva = model.base_kva;
  for (const auto& e : build.index.entries()) {
    TimestepState& s = plan.steps.at(e.t);
    double val = assignment.value(e.var);
    char ph = e.phase >= 0 ? phase_char(static_cast<Phase>(e.phase)) : '?';

    if (e.symbol == "gamma") {
      s.switch_closed[orig.at(e.object)] = as_round(val);
    } else if (e.symbol == "z") {
      if (kind == FormulationKind::traditional) {
        s.load_energized[orig.at(e.object)] = as_round(val);
      } else {
        s.block_energized.at(std::stoi(e.object.substr(3))) = as_round(val);
      }
    } else if (e.symbol == "x") {
      s.grid_forming[orig.at(e.object)] = as_round(val);
    } else if (e.symbol == "pg") {
      s.dg_output_kw[orig.at(e.object)][ph] += Complex(val * kva, 0);
    } else if (e.symbol == "qg") {
      s.dg_output_kw[orig.at(e.object)][ph] += Complex(0, val * kva);
    } else if (e.symbol == "pl") {
      s.load_served_kw[orig.at(e.object)][ph] += Complex(val * kva, 0);
    } else if (e.symbol == "ql") {
      s.load_served_kw[orig.at(e.object)][ph] += Complex(0, val * kva);
    } else if (e.symbol == "p") {
      s.line_flow_kw[orig.at(e.object)][ph] += Complex(val * kva, 0);
    } else if (e.symbol == "q") {
      s.line_flow_kw[orig.at(e.object)][ph] += Complex(0, val * kva);
    } else if (e.symbol == "w") {
      s.bus_w[orig.at(e.object)][ph] = val;
    } else if (e.symbol == "psi") {
      s.battery_energy_kwh[orig.at(e.object)] = val * kva;
    } else if (e.symbol == "rate") {
      s.battery_rate_kw[orig.at(e.object)] = val * kva;
    }
    // omega/rho/ft/ftr/y/f/u/cl are certificates, not part of the plan
  }

  if (kind != FormulationKind::traditional) {
    for (auto& s : plan.steps)
      for (const auto& d : model.loads)
        s.load_energized[d.id] = s.block_energized.at(partition.block_of(d.bus));
  }
  return plan;
}

std::string plan_to_json(const RestorationPlan& plan) {
  json j;
  j["feeder"] = plan.feeder;
  j["kind"] = to_string(plan.kind);
  j["status"] = to_string(plan.status);
  j["objective_kwh"] = plan.objective_kwh;
  j["gap"] = plan.gap;
  j["steps"] = json::array();
  for (const auto& s : plan.steps) {
    json st;
    st["switches"] = s.switch_closed;
    st["blocks_energized"] = s.block_energized;
    st["loads_energized"] = s.load_energized;
    st["grid_formers"] = s.grid_forming;
    st["dg_output_kw"] = json::object();
    for (const auto& [id, m] : s.dg_output_kw)
      st["dg_output_kw"][id] = phase_map_to_json(m);
    st["load_served_kw"] = json::object();
    for (const auto& [id, m] : s.load_served_kw)
      st["load_served_kw"][id] = phase_map_to_json(m);
    st["line_flow_kw"] = json::object();
    for (const auto& [id, m] : s.line_flow_kw)
      st["line_flow_kw"][id] = phase_map_to_json(m);
    st["bus_w"] = json::object();
    for (const auto& [id, m] : s.bus_w) {
      json& o = st["bus_w"][id] = json::object();
      for (const auto& [ph, v] : m) o[std::string(1, ph)] = v;
    }
    st["battery_energy_kwh"] = s.battery_energy_kwh;
    st["battery_rate_kw"] = s.battery_rate_kw;
    j["steps"].push_back(std::move(st));
  }
  return j.dump(2) + "\n";
}

RestorationPlan plan_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("plan syntax error: ") + e.what());
  }
  try {
    RestorationPlan plan;
    plan.feeder = j.value("feeder", "");
    plan.kind = formulation_kind_from_string(j.at("kind").get<std::string>());
    plan.status = status_from_string(j.at("status").get<std::string>());
    plan.objective_kwh = j.value("objective_kwh", 0.0);
    plan.gap = j.value("gap", 0.0);
    for (const auto& st : j.value("steps", json::array())) {
      TimestepState s;
      s.switch_closed = st.value("switches", std::map<std::string, int>{});
      s.block_energized = st.value("blocks_energized", std::vector<int>{});
      s.load_energized = st.value("loads_energized", std::map<std::string, int>{});
      s.grid_forming = st.value("grid_formers", std::map<std::string, int>{});
      if (st.contains("dg_output_kw"))
        for (const auto& [id, m] : st.at("dg_output_kw").items())
          s.dg_output_kw[id] = phase_map_from_json(m);
      if (st.contains("load_served_kw"))
        for (const auto& [id, m] : st.at("load_served_kw").items())
          s.load_served_kw[id] = phase_map_from_json(m);
      if (st.contains("line_flow_kw"))
        for (const auto& [id, m] : st.at("line_flow_kw").items())
          s.line_flow_kw[id] = phase_map_from_json(m);
      if (st.contains("bus_w"))
        for (const auto& [id, m] : st.at("bus_w").items())
          for (const auto& [ph, v] : m.items())
            s.bus_w[id][ph.at(0)] = v.get<double>();
      s.battery_energy_kwh =
          st.value("battery_energy_kwh", std::map<std::string, double>{});
      s.battery_rate_kw =
          st.value("battery_rate_kw", std::map<std::string, double>{});
      plan.steps.push_back(std::move(s));
    }
    return plan;
  } catch (const json::exception& e) {
    throw ParseError(std::string("plan schema error: ") + e.what());
  } catch (const BuildError& e) {
    throw ParseError(e.what());
  }
}

}  // namespace dsr
