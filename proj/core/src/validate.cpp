#include "dsr/validate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <deque>
#include <numbers>
#include <numeric>
#include <queue>
#include <sstream>

namespace dsr {

namespace {

Complex phase_value(const std::map<std::string, std::map<char, Complex>>& m,
                    const std::string& id, char ph) {
  auto it = m.find(id);
  if (it == m.end()) return {};
  auto jt = it->second.find(ph);
  return jt == it->second.end() ? Complex{} : jt->second;
}

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  bool unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    parent[a] = b;
    return true;
  }
};

// Independent re-derivation of the multiphase voltage-drop coupling; the
// validator must not trust the builder's coefficients.
void coupling(const LineParams& line, std::vector<double>& mp,
              std::vector<double>& mq) {
  const auto phases = line.phases.list();
  const int n = static_cast<int>(phases.size());
  mp.assign(n * n, 0.0);
  mq.assign(n * n, 0.0);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      int rot = phase_ordinal(phases[r]) - phase_ordinal(phases[c]);
      Complex g = std::polar(1.0, -2.0 * std::numbers::pi / 3.0 * rot);
      Complex gz = g * std::conj(line.z(r, c));
      mp[r * n + c] = 2.0 * gz.real();
      mq[r * n + c] = -2.0 * gz.imag();
    }
  }
}

std::vector<int> islands_of(const BlockGraph& graph,
                            const std::map<std::string, int>& closed) {
  const int nz = graph.partition.size();
  UnionFind uf(nz);
  for (const auto& [id, e] : graph.switch_edges) {
    auto it = closed.find(id);
    if (it != closed.end() && it->second && !e.degenerate)
      uf.unite(e.from_block, e.to_block);
  }
  std::vector<int> island(nz);
  std::map<int, int> renum;
  for (int z = 0; z < nz; ++z) {
    int root = uf.find(z);
    auto [it, fresh] = renum.emplace(root, static_cast<int>(renum.size()));
    island[z] = it->second;
  }
  return island;
}

double battery_loss_cap_kw(const BatterySpec& bat) {
  double cap = 0.0;
  for (const auto& [slope, icept] : bat.loss_segments) {
    cap = std::max(cap, (1.0 - slope) * bat.rate_max - icept);
    cap = std::max(cap, (1.0 - slope) * bat.rate_min - icept);
  }
  return cap;
}

}  // namespace

double delivered_energy_mwh(const FeederModel& model, const RestorationPlan& plan,
                            bool weighted) {
  double kwh = 0.0;
  for (int t = 0; t < static_cast<int>(plan.steps.size()); ++t) {
    for (const auto& d : model.loads) {
      auto it = plan.steps[t].load_energized.find(d.id);
      if (it == plan.steps[t].load_energized.end() || !it->second) continue;
      double p = 0.0;
      for (Phase ph : d.phases.list()) p += demand_at(model, d.id, ph, t).real();
      kwh += (weighted ? d.priority : 1.0) * p * model.horizon.dt_hours;
    }
  }
  return weighted ? kwh : kwh / 1000.0;
}

ValidationReport check_plan(const FeederModel& model,
                            const BlockPartition& partition,
                            const RestorationPlan& plan,
                            const FormulationOptions& fopts,
                            const ValidationOptions& vopts) {
  ValidationReport rep;
  auto issue = [&](int t, const std::string& rule, const std::string& detail) {
    rep.issues.push_back({t, rule, detail});
  };

  const double tol = vopts.tol;
  const double kva = model.base_kva;
  const bool block_kind = plan.kind != FormulationKind::traditional;
  const bool gfm = plan.kind == FormulationKind::block_gfm;
  const BlockGraph graph = build_block_graph(partition, model);
  const int nz = partition.size();

  if (plan.status == SolverStatus::infeasible) {
    issue(-1, "status", "plan carries no feasible solution");
    return rep;
  }
  if (static_cast<int>(plan.steps.size()) != model.horizon.n_steps) {
    issue(-1, "horizon", "plan has " + std::to_string(plan.steps.size()) +
                             " steps, feeder horizon has " +
                             std::to_string(model.horizon.n_steps));
    return rep;
  }

  const double circle_slack = 1.0 / std::cos(std::numbers::pi /
                                             fopts.thermal_polygon_sides);

  for (int t = 0; t < static_cast<int>(plan.steps.size()); ++t) {
    const TimestepState& s = plan.steps[t];

    // Switch states: every switch present, non-dispatchable ones untouched.
    std::map<std::string, int> closed;
    for (const auto& l : model.lines) {
      if (!l.is_switch()) continue;
      auto it = s.switch_closed.find(l.id);
      if (it == s.switch_closed.end()) {
        issue(t, "switch_state", "no recorded state for switch " + l.id);
        closed[l.id] = 0;
        continue;
      }
      closed[l.id] = it->second ? 1 : 0;
      if (!l.switch_info->dispatchable &&
          (it->second != 0) != l.switch_info->initially_closed)
        issue(t, "switch_state", "non-dispatchable switch " + l.id + " moved");
    }

    // Load energization flags.
    std::map<std::string, int> zload;
    for (const auto& d : model.loads) {
      auto it = s.load_energized.find(d.id);
      if (it == s.load_energized.end()) {
        issue(t, "load_state", "no energization flag for load " + d.id);
        zload[d.id] = 0;
      } else {
        zload[d.id] = it->second ? 1 : 0;
      }
    }

    // Power balance per bus and phase.
    for (int bi = 0; bi < static_cast<int>(model.buses.size()); ++bi) {
      const Bus& bus = model.buses[bi];
      for (Phase ph : bus.phases.list()) {
        char pc = phase_char(ph);
        Complex net;
        for (int gi : model.dgs_at[bi])
          if (model.dgs[gi].phases.contains(ph))
            net += phase_value(s.dg_output_kw, model.dgs[gi].id, pc);
        for (int li : model.loads_at[bi])
          if (model.loads[li].phases.contains(ph))
            net -= phase_value(s.load_served_kw, model.loads[li].id, pc);
        for (int li : model.lines_from[bi])
          if (model.lines[li].phases.contains(ph))
            net -= phase_value(s.line_flow_kw, model.lines[li].id, pc);
        for (int li : model.lines_to[bi])
          if (model.lines[li].phases.contains(ph))
            net += phase_value(s.line_flow_kw, model.lines[li].id, pc);
        double res = std::max(std::abs(net.real()), std::abs(net.imag()));
        rep.max_power_balance_residual_kw =
            std::max(rep.max_power_balance_residual_kw, res);
        if (res > tol * kva)
          issue(t, "power_balance",
                "bus " + bus.id + " phase " + pc + " residual " +
                    std::to_string(res) + " kW");
      }
    }

    // Voltage bounds.
    for (const auto& bus : model.buses) {
      for (Phase ph : bus.phases.list()) {
        char pc = phase_char(ph);
        auto it = s.bus_w.find(bus.id);
        if (it == s.bus_w.end() || !it->second.count(pc)) {
          issue(t, "voltage", "no voltage recorded at " + bus.id);
          continue;
        }
        double w = it->second.at(pc);
        if (w < bus.vmin * bus.vmin - tol || w > bus.vmax * bus.vmax + tol)
          issue(t, "voltage", "bus " + bus.id + " phase " + pc +
                                  " w=" + std::to_string(w) + " out of range");
      }
    }

    // Per-line checks: voltage drop, thermal circle, open-switch isolation.
    for (const auto& l : model.lines) {
      bool is_open = l.is_switch() && !closed[l.id];
      const auto phases = l.phases.list();
      std::vector<double> mp, mq;
      coupling(l, mp, mq);
      const int n = static_cast<int>(phases.size());

      for (int r = 0; r < n; ++r) {
        char pc = phase_char(phases[r]);
        Complex flow = phase_value(s.line_flow_kw, l.id, pc) / kva;

        if (is_open) {
          if (std::abs(flow.real()) > tol || std::abs(flow.imag()) > tol)
            issue(t, "open_switch", "open switch " + l.id + " carries flow");
          continue;
        }

        double mag = std::abs(flow);
        if (mag > circle_slack * l.thermal_limit[r] + tol)
          issue(t, "thermal", "line " + l.id + " phase " + pc + " |S|=" +
                                  std::to_string(mag * kva) + " kVA over limit");

        double drop = 0.0;
        for (int c = 0; c < n; ++c) {
          Complex fc = phase_value(s.line_flow_kw, l.id, phase_char(phases[c])) / kva;
          drop += mp[r * n + c] * fc.real() + mq[r * n + c] * fc.imag();
        }
        double wf = 0, wt = 0;
        auto fi = s.bus_w.find(l.from_bus);
        auto ti = s.bus_w.find(l.to_bus);
        if (fi != s.bus_w.end() && fi->second.count(pc)) wf = fi->second.at(pc);
        if (ti != s.bus_w.end() && ti->second.count(pc)) wt = ti->second.at(pc);
        if (std::abs(wt - wf + drop) > tol * 10)
          issue(t, "voltage_drop", "line " + l.id + " phase " + pc +
                                       " drop mismatch " +
                                       std::to_string(wt - wf + drop));
      }
    }

    // DG output limits and shedding gates.
    for (const auto& g : model.dgs) {
      const auto phases = g.phases.list();
      double total = 0.0;
      for (int i = 0; i < static_cast<int>(phases.size()); ++i) {
        char pc = phase_char(phases[i]);
        Complex out = phase_value(s.dg_output_kw, g.id, pc);
        total += std::abs(out.real()) + std::abs(out.imag());
        if (out.real() < g.smin[i].real() - tol * kva ||
            out.real() > g.smax[i].real() + tol * kva ||
            out.imag() < g.smin[i].imag() - tol * kva ||
            out.imag() > g.smax[i].imag() + tol * kva)
          issue(t, "dg_limits", "generator " + g.id + " phase " + pc +
                                    " output outside its dispatch box");
      }
      if (block_kind) {
        int z = partition.block_of(g.bus);
        bool energized = z < static_cast<int>(s.block_energized.size()) &&
                         s.block_energized[z];
        if (!energized && total > tol * kva)
          issue(t, "block_dg", "generator " + g.id +
                                   " produces inside a de-energized block");
      }
    }

    // Load service matches the energization flag exactly: no partial loads.
    for (const auto& d : model.loads) {
      for (Phase ph : d.phases.list()) {
        char pc = phase_char(ph);
        Complex want = zload[d.id] ? demand_at(model, d.id, ph, t) : Complex{};
        Complex got = phase_value(s.load_served_kw, d.id, pc);
        if (std::abs(got.real() - want.real()) > tol * kva ||
            std::abs(got.imag() - want.imag()) > tol * kva)
          issue(t, "load_service", "load " + d.id + " phase " + pc +
                                       " served power does not match its flag");
      }
    }

    // Block-level semantics.
    const std::vector<int> island = islands_of(graph, closed);
    if (block_kind) {
      if (static_cast<int>(s.block_energized.size()) != nz) {
        issue(t, "block_state", "plan records " +
                                    std::to_string(s.block_energized.size()) +
                                    " blocks, partition has " + std::to_string(nz));
      } else {
        for (const auto& d : model.loads) {
          int z = partition.block_of(d.bus);
          if (zload[d.id] != (s.block_energized[z] ? 1 : 0))
            issue(t, "block_uniform",
                  "load " + d.id + " disagrees with its block flag");
        }
        std::map<int, int> island_z;
        for (int z = 0; z < nz; ++z) {
          auto [it, fresh] = island_z.emplace(island[z], s.block_energized[z]);
          if (!fresh && it->second != s.block_energized[z])
            issue(t, "island_uniform",
                  "island contains both energized and shed blocks (block " +
                      std::to_string(z) + ")");
        }
      }
    }

    if (gfm && static_cast<int>(s.block_energized.size()) == nz) {
      std::map<int, int> formers;
      for (const auto& [dg_id, active] : s.grid_forming) {
        if (!active) continue;
        const DgSpec& g = model.dg(dg_id);
        if (!g.grid_forming_capable) {
          issue(t, "gfm", "non-capable generator " + dg_id + " marked as former");
          continue;
        }
        ++formers[island[partition.block_of(g.bus)]];
      }
      for (int z = 0; z < nz; ++z) {
        if (!s.block_energized[z]) continue;
        if (formers[island[z]] != 1) {
          issue(t, "gfm", "energized island of block " + std::to_string(z) +
                              " has " + std::to_string(formers[island[z]]) +
                              " active grid-formers, wants exactly 1");
          formers[island[z]] = 1;  // report each island once
        }
      }
    }

    // Radial operation: closed switches may not create loops between blocks.
    if (fopts.enforce_radiality) {
      UnionFind uf(nz);
      for (const auto& [id, e] : graph.switch_edges) {
        if (!closed[id]) continue;
        if (e.degenerate || !uf.unite(e.from_block, e.to_block))
          issue(t, "radiality", "closed switch " + id + " creates a loop");
      }
    }

    // Battery recursion and envelope.
    for (const auto& bat : model.batteries) {
      const DgSpec& g = model.dg(bat.dg_id);
      auto ei = s.battery_energy_kwh.find(bat.dg_id);
      auto ri = s.battery_rate_kw.find(bat.dg_id);
      if (ei == s.battery_energy_kwh.end() || ri == s.battery_rate_kw.end()) {
        issue(t, "storage", "no state recorded for battery " + bat.dg_id);
        continue;
      }
      double psi = ei->second;
      double rate = ri->second;
      double prev = t == 0 ? bat.initial_energy
                           : plan.steps[t - 1].battery_energy_kwh.count(bat.dg_id)
                                 ? plan.steps[t - 1].battery_energy_kwh.at(bat.dg_id)
                                 : 0.0;
      if (std::abs(psi - (prev - rate * model.horizon.dt_hours)) > tol * kva)
        issue(t, "storage", "battery " + bat.dg_id + " energy recursion broken");
      if (psi < -tol * kva || psi > bat.energy_cap + tol * kva)
        issue(t, "storage", "battery " + bat.dg_id + " energy out of bounds");
      if (rate < bat.rate_min - tol * kva || rate > bat.rate_max + tol * kva)
        issue(t, "storage", "battery " + bat.dg_id + " rate out of bounds");

      double out = 0.0;
      for (Phase ph : g.phases.list())
        out += phase_value(s.dg_output_kw, g.id, phase_char(ph)).real();
      for (const auto& [slope, icept] : bat.loss_segments)
        if (out > slope * rate + icept + tol * kva)
          issue(t, "storage", "battery " + bat.dg_id + " output above its "
                              "loss envelope");
      if (out < rate - battery_loss_cap_kw(bat) - tol * kva)
        issue(t, "storage", "battery " + bat.dg_id +
                                " extracts energy without delivering it");
      if (block_kind) {
        int z = partition.block_of(g.bus);
        bool energized = z < static_cast<int>(s.block_energized.size()) &&
                         s.block_energized[z];
        if (!energized && std::abs(rate) > tol * kva)
          issue(t, "storage", "battery " + bat.dg_id +
                                  " cycles inside a de-energized block");
      }
    }

    // Operational rules.
    int closures = 0;
    for (const auto& l : model.lines) {
      if (!l.is_switch()) continue;
      bool was = t == 0 ? l.switch_info->initially_closed
                        : plan.steps[t - 1].switch_closed.count(l.id) &&
                              plan.steps[t - 1].switch_closed.at(l.id);
      if (closed[l.id] && !was) ++closures;
    }
    if (closures > fopts.switch_closures_per_step)
      issue(t, "closure_budget",
            std::to_string(closures) + " closures in one step, budget " +
                std::to_string(fopts.switch_closures_per_step));

    if (fopts.monotone_restoration && t > 0) {
      const TimestepState& prev = plan.steps[t - 1];
      if (block_kind) {
        for (int z = 0; z < std::min(nz, static_cast<int>(s.block_energized.size()));
             ++z)
          if (z < static_cast<int>(prev.block_energized.size()) &&
              prev.block_energized[z] && !s.block_energized[z])
            issue(t, "monotone", "block " + std::to_string(z) + " lost service");
      } else {
        for (const auto& d : model.loads) {
          bool before = prev.load_energized.count(d.id) &&
                        prev.load_energized.at(d.id);
          if (before && !zload[d.id])
            issue(t, "monotone", "load " + d.id + " lost service");
        }
      }
    }

    // Partial-block diagnostics.
    int partial = 0;
    for (const auto& blk : partition.blocks) {
      int on = 0, off = 0;
      for (const auto& lid : blk.loads) (zload[lid] ? on : off) += 1;
      if (on > 0 && off > 0) ++partial;
    }
    rep.partial_blocks_per_step.push_back(partial);
    rep.partial_block_total += partial;
  }

  rep.delivered_mwh = delivered_energy_mwh(model, plan, false);
  rep.objective_check_kwh = delivered_energy_mwh(model, plan, true);
  if (std::abs(rep.objective_check_kwh - plan.objective_kwh) >
      1e-4 * (1.0 + std::abs(rep.objective_check_kwh)))
    issue(-1, "objective",
          "recorded objective " + std::to_string(plan.objective_kwh) +
              " kWh disagrees with recomputed " +
              std::to_string(rep.objective_check_kwh));

  return rep;
}

// ---------------------------------------------------------------------------
// Brute-force reference optimum.

namespace {

struct OracleContext {
  const FeederModel& m;
  const BlockPartition& part;
  FormulationKind kind;
  const FormulationOptions& opts;

  struct Sw {
    int line_idx;
    int from_block, to_block;
    bool degenerate, dispatchable, initially_closed;
  };
  std::vector<Sw> switches;
  std::vector<int> dispatchable_idx;
  std::vector<bool> block_has_capable;
  int T = 0;

  double pu(double kw) const { return kw / m.base_kva; }
};

// A (switching, shedding) trajectory plus its objective value.
struct Config {
  std::vector<uint32_t> gamma;           // closed-switch bitmask per step
  std::vector<std::vector<int>> z;       // per step: per block, or per load
  double objective = 0.0;
};

std::vector<int> oracle_islands(const OracleContext& ctx, uint32_t mask) {
  UnionFind uf(ctx.part.size());
  for (size_t i = 0; i < ctx.switches.size(); ++i)
    if ((mask >> i) & 1u && !ctx.switches[i].degenerate)
      uf.unite(ctx.switches[i].from_block, ctx.switches[i].to_block);
  std::vector<int> out(ctx.part.size());
  for (int z = 0; z < ctx.part.size(); ++z) out[z] = uf.find(z);
  return out;
}

bool mask_radial(const OracleContext& ctx, uint32_t mask) {
  UnionFind uf(ctx.part.size());
  for (size_t i = 0; i < ctx.switches.size(); ++i) {
    if (!((mask >> i) & 1u)) continue;
    if (ctx.switches[i].degenerate) return false;
    if (!uf.unite(ctx.switches[i].from_block, ctx.switches[i].to_block))
      return false;
  }
  return true;
}

// Continuous dispatch subproblem for a fixed trajectory; rebuilt from the
// feeder description with no code shared with the MILP builder.
MilpModel dispatch_lp(const OracleContext& ctx, const Config& cfg) {
  const FeederModel& m = ctx.m;
  MilpModel lp;
  const double inf = std::numeric_limits<double>::infinity();
  std::map<std::string, VarId> vars;
  auto mk = [&](const std::string& name, double lo, double hi) {
    VarId id = lp.add_variable({name, VarKind::continuous, lo, hi});
    vars[name] = id;
    return id;
  };
  auto get = [&](const std::string& name) { return vars.at(name); };

  auto zvalue = [&](int t, const LoadSpec& d) {
    if (ctx.kind == FormulationKind::traditional) {
      int li = m.load_index.at(d.id);
      return cfg.z[t][li];
    }
    return cfg.z[t][ctx.part.block_of(d.bus)];
  };

  std::map<int, bool> sw_closed_by_line;
  const int sides = ctx.opts.thermal_polygon_sides;
  const double poly_scale = 2.0 / (1.0 + 1.0 / std::cos(std::numbers::pi / sides));

  for (int t = 0; t < ctx.T; ++t) {
    std::string tt = "_t" + std::to_string(t);
    sw_closed_by_line.clear();
    for (size_t i = 0; i < ctx.switches.size(); ++i)
      sw_closed_by_line[ctx.switches[i].line_idx] = (cfg.gamma[t] >> i) & 1u;

    for (int li = 0; li < static_cast<int>(m.lines.size()); ++li) {
      const LineParams& l = m.lines[li];
      bool open = l.is_switch() && !sw_closed_by_line[li];
      const auto phases = l.phases.list();
      for (int r = 0; r < static_cast<int>(phases.size()); ++r) {
        double cap = open ? 0.0 : l.thermal_limit[r];
        std::string sfx = std::to_string(li) + "_" + std::to_string(r) + tt;
        mk("p" + sfx, -cap, cap);
        mk("q" + sfx, -cap, cap);
      }
    }
    for (int bi = 0; bi < static_cast<int>(m.buses.size()); ++bi) {
      const Bus& b = m.buses[bi];
      for (Phase ph : b.phases.list())
        mk("w" + std::to_string(bi) + "_" + std::to_string(phase_ordinal(ph)) + tt,
           b.vmin * b.vmin, b.vmax * b.vmax);
    }
    for (int gi = 0; gi < static_cast<int>(m.dgs.size()); ++gi) {
      const DgSpec& g = m.dgs[gi];
      bool gated = ctx.kind != FormulationKind::traditional &&
                   !cfg.z[t][ctx.part.block_of(g.bus)];
      const auto phases = g.phases.list();
      for (int i = 0; i < static_cast<int>(phases.size()); ++i) {
        std::string sfx = std::to_string(gi) + "_" + std::to_string(i) + tt;
        if (gated) {
          mk("pg" + sfx, 0, 0);
          mk("qg" + sfx, 0, 0);
        } else {
          mk("pg" + sfx, ctx.pu(g.smin[i].real()), ctx.pu(g.smax[i].real()));
          mk("qg" + sfx, ctx.pu(g.smin[i].imag()), ctx.pu(g.smax[i].imag()));
        }
      }
    }
    for (int bi = 0; bi < static_cast<int>(m.batteries.size()); ++bi) {
      const BatterySpec& bat = m.batteries[bi];
      bool gated = ctx.kind != FormulationKind::traditional &&
                   !cfg.z[t][ctx.part.block_of(m.dg(bat.dg_id).bus)];
      std::string sfx = std::to_string(bi) + tt;
      mk("psi" + sfx, 0, ctx.pu(bat.energy_cap));
      if (gated)
        mk("rate" + sfx, 0, 0);
      else
        mk("rate" + sfx, ctx.pu(bat.rate_min), ctx.pu(bat.rate_max));
    }
  }

  for (int t = 0; t < ctx.T; ++t) {
    std::string tt = "_t" + std::to_string(t);
    sw_closed_by_line.clear();
    for (size_t i = 0; i < ctx.switches.size(); ++i)
      sw_closed_by_line[ctx.switches[i].line_idx] = (cfg.gamma[t] >> i) & 1u;

    // Bus power balance; served loads become constants on the rhs.
    for (int bi = 0; bi < static_cast<int>(m.buses.size()); ++bi) {
      const Bus& b = m.buses[bi];
      for (Phase ph : b.phases.list()) {
        std::vector<LinearTerm> pt, qt;
        Complex rhs;
        for (int gi : m.dgs_at[bi]) {
          const DgSpec& g = m.dgs[gi];
          int pos = g.phases.index_of(ph);
          if (pos < 0) continue;
          std::string sfx = std::to_string(gi) + "_" + std::to_string(pos) + tt;
          pt.push_back({1.0, get("pg" + sfx)});
          qt.push_back({1.0, get("qg" + sfx)});
        }
        for (int li : m.loads_at[bi]) {
          const LoadSpec& d = m.loads[li];
          if (!d.phases.contains(ph)) continue;
          if (zvalue(t, d)) rhs += demand_at(m, d.id, ph, t) / m.base_kva;
        }
        for (int li : m.lines_from[bi]) {
          const LineParams& l = m.lines[li];
          int pos = l.phases.index_of(ph);
          if (pos < 0) continue;
          std::string sfx = std::to_string(li) + "_" + std::to_string(pos) + tt;
          pt.push_back({-1.0, get("p" + sfx)});
          qt.push_back({-1.0, get("q" + sfx)});
        }
        for (int li : m.lines_to[bi]) {
          const LineParams& l = m.lines[li];
          int pos = l.phases.index_of(ph);
          if (pos < 0) continue;
          std::string sfx = std::to_string(li) + "_" + std::to_string(pos) + tt;
          pt.push_back({1.0, get("p" + sfx)});
          qt.push_back({1.0, get("q" + sfx)});
        }
        std::string cn = std::to_string(bi) + "_" +
                         std::to_string(phase_ordinal(ph)) + tt;
        lp.add_constraint({"bp" + cn, std::move(pt), Sense::eq, rhs.real()});
        lp.add_constraint({"bq" + cn, std::move(qt), Sense::eq, rhs.imag()});
      }
    }

    // Voltage drop across in-service lines; thermal polygon on every line.
    for (int li = 0; li < static_cast<int>(m.lines.size()); ++li) {
      const LineParams& l = m.lines[li];
      bool open = l.is_switch() && !sw_closed_by_line[li];
      const auto phases = l.phases.list();
      const int n = static_cast<int>(phases.size());
      std::vector<double> mp, mq;
      coupling(l, mp, mq);
      int fb = m.bus_index.at(l.from_bus);
      int tb = m.bus_index.at(l.to_bus);
      for (int r = 0; r < n; ++r) {
        std::string sfx = std::to_string(li) + "_" + std::to_string(r) + tt;
        if (!open) {
          std::vector<LinearTerm> terms;
          terms.push_back(
              {1.0, get("w" + std::to_string(tb) + "_" +
                        std::to_string(phase_ordinal(phases[r])) + tt)});
          terms.push_back(
              {-1.0, get("w" + std::to_string(fb) + "_" +
                         std::to_string(phase_ordinal(phases[r])) + tt)});
          for (int c = 0; c < n; ++c) {
            std::string csfx = std::to_string(li) + "_" + std::to_string(c) + tt;
            terms.push_back({mp[r * n + c], get("p" + csfx)});
            terms.push_back({mq[r * n + c], get("q" + csfx)});
          }
          lp.add_constraint({"vd" + sfx, std::move(terms), Sense::eq, 0.0});
        }
        for (int cut = 0; cut < sides; ++cut) {
          double th = 2.0 * std::numbers::pi * cut / sides;
          lp.add_constraint({"th" + sfx + "_m" + std::to_string(cut),
                             {{std::cos(th), get("p" + sfx)},
                              {std::sin(th), get("q" + sfx)}},
                             Sense::le, poly_scale * l.thermal_limit[r]});
        }
      }
    }

    // Battery recursion and loss envelope.
    for (int bi = 0; bi < static_cast<int>(m.batteries.size()); ++bi) {
      const BatterySpec& bat = m.batteries[bi];
      const DgSpec& g = m.dg(bat.dg_id);
      int gi = m.dg_index.at(bat.dg_id);
      std::string sfx = std::to_string(bi) + tt;
      double dt = m.horizon.dt_hours;
      if (t == 0) {
        lp.add_constraint({"se" + sfx,
                           {{1.0, get("psi" + sfx)}, {dt, get("rate" + sfx)}},
                           Sense::eq, ctx.pu(bat.initial_energy)});
      } else {
        lp.add_constraint(
            {"se" + sfx,
             {{1.0, get("psi" + sfx)},
              {-1.0, get("psi" + std::to_string(bi) + "_t" + std::to_string(t - 1))},
              {dt, get("rate" + sfx)}},
             Sense::eq, 0.0});
      }
      std::vector<LinearTerm> psum;
      const auto phases = g.phases.list();
      for (int i = 0; i < static_cast<int>(phases.size()); ++i)
        psum.push_back(
            {1.0, get("pg" + std::to_string(gi) + "_" + std::to_string(i) + tt)});
      for (int seg = 0; seg < static_cast<int>(bat.loss_segments.size()); ++seg) {
        auto terms = psum;
        terms.push_back({-bat.loss_segments[seg].first, get("rate" + sfx)});
        lp.add_constraint({"sl" + sfx + "_s" + std::to_string(seg),
                           std::move(terms), Sense::le,
                           ctx.pu(bat.loss_segments[seg].second)});
      }
      auto terms = psum;
      terms.push_back({-1.0, get("rate" + sfx)});
      lp.add_constraint({"sf" + sfx, std::move(terms), Sense::ge,
                         -ctx.pu(battery_loss_cap_kw(bat))});
    }
  }
  (void)inf;
  return lp;
}

}  // namespace

OracleResult brute_force_optimum(const FeederModel& model,
                                 const BlockPartition& partition,
                                 FormulationKind kind,
                                 const FormulationOptions& opts,
                                 const SolverConfig& solver) {
  OracleContext ctx{model, partition, kind, opts, {}, {}, {},
                    model.horizon.n_steps};
  for (int li = 0; li < static_cast<int>(model.lines.size()); ++li) {
    const LineParams& l = model.lines[li];
    if (!l.is_switch()) continue;
    int fb = partition.block_of(l.from_bus);
    int tb = partition.block_of(l.to_bus);
    if (l.switch_info->dispatchable)
      ctx.dispatchable_idx.push_back(static_cast<int>(ctx.switches.size()));
    ctx.switches.push_back({li, fb, tb, fb == tb, l.switch_info->dispatchable,
                            l.switch_info->initially_closed});
  }
  ctx.block_has_capable.assign(partition.size(), false);
  for (const auto& g : model.dgs)
    if (g.grid_forming_capable)
      ctx.block_has_capable[partition.block_of(g.bus)] = true;

  const int nsw = static_cast<int>(ctx.switches.size());
  const int nz = partition.size();
  const bool traditional = kind == FormulationKind::traditional;
  if (nsw > 8 || ctx.T > 3 ||
      (traditional && model.loads.size() > 6) ||
      (!traditional && nz > 8))
    throw ModelError("feeder is too large for the exhaustive reference oracle");

  uint32_t initial_mask = 0;
  for (int i = 0; i < nsw; ++i)
    if (ctx.switches[i].initially_closed) initial_mask |= 1u << i;

  // Admissible switch masks for a single step.
  std::vector<uint32_t> masks;
  const int nd = static_cast<int>(ctx.dispatchable_idx.size());
  for (uint32_t pick = 0; pick < (1u << nd); ++pick) {
    uint32_t mask = initial_mask;
    for (int j = 0; j < nd; ++j) {
      uint32_t bit = 1u << ctx.dispatchable_idx[j];
      if ((pick >> j) & 1u) mask |= bit;
      else mask &= ~bit;
    }
    if (opts.enforce_radiality && !mask_radial(ctx, mask)) continue;
    if (std::find(masks.begin(), masks.end(), mask) == masks.end())
      masks.push_back(mask);
  }

  // Mask sequences within the closure budget.
  std::vector<std::vector<uint32_t>> gamma_seqs;
  std::vector<uint32_t> cur;
  auto dfs_masks = [&](auto&& self, uint32_t prev) -> void {
    if (static_cast<int>(cur.size()) == ctx.T) {
      gamma_seqs.push_back(cur);
      return;
    }
    for (uint32_t mask : masks) {
      if (std::popcount(mask & ~prev) > opts.switch_closures_per_step) continue;
      cur.push_back(mask);
      self(self, mask);
      cur.pop_back();
    }
  };
  dfs_masks(dfs_masks, initial_mask);

  // Shedding trajectories per switch sequence.
  std::vector<Config> configs;
  const size_t config_cap = 500000;
  auto objective_of = [&](const std::vector<std::vector<int>>& z) {
    double obj = 0.0;
    for (int t = 0; t < ctx.T; ++t) {
      for (int li = 0; li < static_cast<int>(model.loads.size()); ++li) {
        const LoadSpec& d = model.loads[li];
        int flag = traditional ? z[t][li] : z[t][partition.block_of(d.bus)];
        if (flag) obj += objective_coefficient(model, d.id, t);
      }
    }
    return obj;
  };

  for (const auto& gseq : gamma_seqs) {
    std::vector<std::vector<std::vector<int>>> step_choices(ctx.T);
    if (traditional) {
      const int nl = static_cast<int>(model.loads.size());
      for (int t = 0; t < ctx.T; ++t)
        for (uint32_t pick = 0; pick < (1u << nl); ++pick) {
          std::vector<int> z(nl);
          for (int i = 0; i < nl; ++i) z[i] = (pick >> i) & 1u;
          step_choices[t].push_back(std::move(z));
        }
    } else {
      for (int t = 0; t < ctx.T; ++t) {
        std::vector<int> island = oracle_islands(ctx, gseq[t]);
        std::vector<int> roots;
        for (int z = 0; z < nz; ++z)
          if (std::find(roots.begin(), roots.end(), island[z]) == roots.end())
            roots.push_back(island[z]);
        std::vector<bool> capable(roots.size(), false);
        for (int z = 0; z < nz; ++z)
          if (ctx.block_has_capable[z])
            capable[std::find(roots.begin(), roots.end(), island[z]) -
                    roots.begin()] = true;
        for (uint32_t pick = 0; pick < (1u << roots.size()); ++pick) {
          bool ok = true;
          if (kind == FormulationKind::block_gfm)
            for (size_t i = 0; i < roots.size(); ++i)
              if (((pick >> i) & 1u) && !capable[i]) ok = false;
          if (!ok) continue;
          std::vector<int> z(nz);
          for (int b = 0; b < nz; ++b) {
            size_t i = std::find(roots.begin(), roots.end(), island[b]) -
                       roots.begin();
            z[b] = (pick >> i) & 1u;
          }
          step_choices[t].push_back(std::move(z));
        }
      }
    }

    std::vector<std::vector<int>> zcur;
    auto dfs_z = [&](auto&& self, int t) -> void {
      if (t == ctx.T) {
        Config c;
        c.gamma = gseq;
        c.z = zcur;
        c.objective = objective_of(zcur);
        configs.push_back(std::move(c));
        if (configs.size() > config_cap)
          throw ModelError("reference oracle enumeration exceeds its cap");
        return;
      }
      for (const auto& z : step_choices[t]) {
        if (opts.monotone_restoration && t > 0) {
          bool mono = true;
          for (size_t i = 0; i < z.size(); ++i)
            if (zcur[t - 1][i] && !z[i]) mono = false;
          if (!mono) continue;
        }
        zcur.push_back(z);
        self(self, t + 1);
        zcur.pop_back();
      }
    };
    dfs_z(dfs_z, 0);
  }

  std::stable_sort(configs.begin(), configs.end(),
                   [](const Config& a, const Config& b) {
                     return a.objective > b.objective;
                   });

  OracleResult result;
  result.configs_enumerated = static_cast<int>(configs.size());
  const size_t chunk = 64;
  for (size_t base = 0; base < configs.size(); base += chunk) {
    size_t end = std::min(configs.size(), base + chunk);
    std::deque<MilpModel> lps;
    std::vector<const MilpModel*> ptrs;
    for (size_t i = base; i < end; ++i) {
      lps.push_back(dispatch_lp(ctx, configs[i]));
      ptrs.push_back(&lps.back());
    }
    std::vector<Assignment> sols = solve_batch(ptrs, solver);
    result.lps_solved += static_cast<int>(sols.size());
    for (size_t i = 0; i < sols.size(); ++i) {
      if (sols[i].feasible()) {
        result.found = true;
        result.objective_kwh = configs[base + i].objective;
        return result;
      }
    }
  }
  return result;
}

}  // namespace dsr
