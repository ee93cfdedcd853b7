#include "dsr/formulation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

namespace dsr {

std::string to_string(FormulationKind k) {
  switch (k) {
    case FormulationKind::traditional: return "traditional";
    case FormulationKind::block: return "block";
    case FormulationKind::block_gfm: return "block_gfm";
  }
  return "?";
}

FormulationKind formulation_kind_from_string(const std::string& s) {
  if (s == "traditional") return FormulationKind::traditional;
  if (s == "block") return FormulationKind::block;
  if (s == "block_gfm" || s == "block-gfm") return FormulationKind::block_gfm;
  throw BuildError("unknown formulation kind: " + s);
}

std::string lp_safe(const std::string& id) {
  std::string out = id;
  for (char& c : out)
    if (!std::isalnum(static_cast<unsigned char>(c))) c = '_';
  if (out.empty() || std::isdigit(static_cast<unsigned char>(out[0])))
    out.insert(out.begin(), '_');
  return out;
}

std::string VarIndex::key(const std::string& symbol, const std::string& object,
                          int phase, int t) {
  return symbol + '|' + object + '|' + std::to_string(phase) + '|' + std::to_string(t);
}

void VarIndex::insert(const std::string& symbol, const std::string& object,
                      int phase, int t, VarId var) {
  if (!by_key_.emplace(key(symbol, object, phase, t), var).second)
    throw BuildError("duplicate variable index entry: " + symbol + " " + object);
  entries_.push_back({symbol, object, phase, t, var});
}

VarId VarIndex::at(const std::string& symbol, const std::string& object,
                   int phase, int t) const {
  auto it = by_key_.find(key(symbol, object, phase, t));
  if (it == by_key_.end())
    throw BuildError("variable index has no entry " + symbol + "/" + object +
                     "/" + std::to_string(phase) + "/t" + std::to_string(t));
  return it->second;
}

std::optional<VarId> VarIndex::find(const std::string& symbol,
                                    const std::string& object, int phase,
                                    int t) const {
  auto it = by_key_.find(key(symbol, object, phase, t));
  if (it == by_key_.end()) return std::nullopt;
  return it->second;
}

void lindistflow_coefficients(const LineParams& line, std::vector<double>& mp,
                              std::vector<double>& mq) {
  const auto phases = line.phases.list();
  const int n = static_cast<int>(phases.size());
  mp.assign(n * n, 0.0);
  mq.assign(n * n, 0.0);
  const Complex a = std::polar(1.0, -2.0 * std::numbers::pi / 3.0);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      int rot = phase_ordinal(phases[r]) - phase_ordinal(phases[c]);
      Complex g = std::pow(a, rot);
      Complex gz = g * std::conj(line.z(r, c));
      mp[r * n + c] = 2.0 * gz.real();
      mq[r * n + c] = -2.0 * gz.imag();
    }
  }
}

std::vector<PolygonCut> thermal_polygon_cuts(int sides) {
  if (sides != 4 && sides != 8 && sides != 16)
    throw BuildError("thermal_polygon_sides must be 4, 8 or 16");
  // Balanced between inscribed and circumscribed: radial error is
  // symmetric and stays below sec(pi/n) - 1 of the limit on either side.
  const double scale = 2.0 / (1.0 + 1.0 / std::cos(std::numbers::pi / sides));
  std::vector<PolygonCut> cuts;
  for (int m = 0; m < sides; ++m) {
    double theta = 2.0 * std::numbers::pi * m / sides;
    cuts.push_back({std::cos(theta), std::sin(theta), scale});
  }
  return cuts;
}

double objective_coefficient(const FeederModel& model, const std::string& load_id,
                             int t) {
  const LoadSpec& d = model.load(load_id);
  double p_kw = 0.0;
  for (Phase ph : d.phases.list()) p_kw += demand_at(model, load_id, ph, t).real();
  return d.priority * model.horizon.dt_hours * p_kw;
}

namespace {

struct SwitchView {
  int line_idx;
  std::string id;     // lp-safe
  int from_block;
  int to_block;
  bool degenerate;
  bool dispatchable;
  bool initially_closed;
};

class Builder {
 public:
  Builder(const FeederModel& m, const BlockPartition& part, FormulationKind kind,
          const FormulationOptions& opts)
      : m_(m), part_(part), kind_(kind), opts_(opts) {}

  BuildResult run();

 private:
  const FeederModel& m_;
  const BlockPartition& part_;
  FormulationKind kind_;
  FormulationOptions opts_;

  BuildResult out_;
  std::string group_;
  std::vector<SwitchView> switches_;
  std::vector<std::vector<int>> block_switches_;  // non-degenerate, per block
  int nz_ = 0;
  int T_ = 0;
  double dt_ = 1.0;

  bool block_kind() const { return kind_ != FormulationKind::traditional; }

  void set_group(const std::string& g) { group_ = g; }

  VarId var(const std::string& symbol, const std::string& object, int phase,
            int t, VarKind vk, double lo, double up) {
    std::string name = symbol + '_' + object;
    if (phase >= 0) name += std::string("_") + phase_char(static_cast<Phase>(phase));
    name += "_t" + std::to_string(t);
    VarId id = out_.model.add_variable({lp_safe(name), vk, lo, up});
    out_.index.insert(symbol, object, phase, t, id);
    GroupCounts& g = out_.report.groups[group_];
    ++g.variables;
    if (vk == VarKind::binary) ++g.binaries;
    else ++g.continuous;
    return id;
  }

  void con(const std::string& name, std::vector<LinearTerm> terms, Sense s,
           double rhs) {
    out_.model.add_constraint({name, std::move(terms), s, rhs});
    ++out_.report.groups[group_].constraints;
  }

  double pu(double kw) const { return kw / m_.base_kva; }

  Complex demand_pu(const LoadSpec& d, Phase ph, int t) const {
    return demand_at(m_, d.id, ph, t) / m_.base_kva;
  }

  void collect_switches();
  void check_bounds();
  void make_variables();
  void add_power_balance();
  void add_voltage_drop();
  void add_limits();
  void add_switching();
  void add_storage();
  void add_radiality();
  void add_shedding();
  void add_gfm_coloring();
  void add_operational();
  void add_objective();
  void finalize_report();

  // Lookup helpers for frequently used ids.
  VarId v(const std::string& sym, const std::string& obj, int ph, int t) const {
    return out_.index.at(sym, obj, ph, t);
  }
  std::string blk(int z) const { return "blk" + std::to_string(z); }
  std::string zobj(const LoadSpec& d) const {
    return block_kind() ? blk(part_.block_of(d.bus)) : lp_safe(d.id);
  }
};

void Builder::collect_switches() {
  BlockGraph graph = build_block_graph(part_, m_);
  block_switches_.assign(nz_, {});
  for (int i = 0; i < static_cast<int>(m_.lines.size()); ++i) {
    const LineParams& l = m_.lines[i];
    if (!l.is_switch()) continue;
    const SwitchEdge& e = graph.switch_edges.at(l.id);
    SwitchView sv{i,
                  lp_safe(l.id),
                  e.from_block,
                  e.to_block,
                  e.degenerate,
                  l.switch_info->dispatchable,
                  l.switch_info->initially_closed};
    int si = static_cast<int>(switches_.size());
    if (!sv.degenerate) {
      block_switches_[sv.from_block].push_back(si);
      block_switches_[sv.to_block].push_back(si);
    }
    switches_.push_back(std::move(sv));
  }
}

void Builder::check_bounds() {
  for (const auto& b : m_.buses) {
    if (b.vmin * b.vmin > b.vmax * b.vmax || b.vmin > b.vmax)
      throw BuildError("bus " + b.id + ": infeasible voltage bounds");
  }
  for (const auto& g : m_.dgs)
    for (size_t i = 0; i < g.smin.size(); ++i)
      if (g.smin[i].real() > g.smax[i].real() || g.smin[i].imag() > g.smax[i].imag())
        throw BuildError("generator " + g.id + ": infeasible dispatch bounds");
}

void Builder::make_variables() {
  const double inf = std::numeric_limits<double>::infinity();
  for (int t = 0; t < T_; ++t) {
    set_group("power_balance");
    for (const auto& l : m_.lines) {
      const std::string obj = lp_safe(l.id);
      const auto phases = l.phases.list();
      for (int r = 0; r < static_cast<int>(phases.size()); ++r) {
        double cap = l.thermal_limit[r];
        var("p", obj, phase_ordinal(phases[r]), t, VarKind::continuous, -cap, cap);
        var("q", obj, phase_ordinal(phases[r]), t, VarKind::continuous, -cap, cap);
      }
    }

    set_group("voltage_drop");
    for (const auto& b : m_.buses)
      for (Phase ph : b.phases.list())
        var("w", lp_safe(b.id), phase_ordinal(ph), t, VarKind::continuous,
            b.vmin * b.vmin, b.vmax * b.vmax);

    set_group("limits");
    for (const auto& g : m_.dgs) {
      const std::string obj = lp_safe(g.id);
      const auto phases = g.phases.list();
      for (int i = 0; i < static_cast<int>(phases.size()); ++i) {
        int ph = phase_ordinal(phases[i]);
        var("pg", obj, ph, t, VarKind::continuous, pu(g.smin[i].real()),
            pu(g.smax[i].real()));
        var("qg", obj, ph, t, VarKind::continuous, pu(g.smin[i].imag()),
            pu(g.smax[i].imag()));
      }
    }
    for (const auto& d : m_.loads) {
      const std::string obj = lp_safe(d.id);
      for (Phase ph : d.phases.list()) {
        double pmin = 0, pmax = 0, qmin = 0, qmax = 0;
        for (int s = 0; s < T_; ++s) {
          Complex dem = demand_pu(d, ph, s);
          pmin = std::min(pmin, dem.real());
          pmax = std::max(pmax, dem.real());
          qmin = std::min(qmin, dem.imag());
          qmax = std::max(qmax, dem.imag());
        }
        var("pl", obj, phase_ordinal(ph), t, VarKind::continuous, pmin, pmax);
        var("ql", obj, phase_ordinal(ph), t, VarKind::continuous, qmin, qmax);
      }
    }

    set_group("switching");
    for (const auto& sw : switches_) {
      VarId g = var("gamma", sw.id, -1, t, VarKind::binary, 0, 1);
      if (!sw.dispatchable)
        out_.model.fix_variable(g, sw.initially_closed ? 1.0 : 0.0);
    }

    set_group("shedding");
    if (block_kind()) {
      for (int z = 0; z < nz_; ++z) var("z", blk(z), -1, t, VarKind::binary, 0, 1);
    } else {
      for (const auto& d : m_.loads) var("z", lp_safe(d.id), -1, t, VarKind::binary, 0, 1);
    }

    set_group("storage");
    for (const auto& bat : m_.batteries) {
      const std::string obj = lp_safe(bat.dg_id);
      var("psi", obj, -1, t, VarKind::continuous, 0, pu(bat.energy_cap));
      var("rate", obj, -1, t, VarKind::continuous, pu(bat.rate_min), pu(bat.rate_max));
    }

    if (opts_.enforce_radiality && !switches_.empty()) {
      set_group("radiality");
      for (const auto& sw : switches_) {
        VarId om = var("omega", sw.id, -1, t, VarKind::binary, 0, 1);
        if (sw.degenerate) out_.model.fix_variable(om, 0.0);  // never a tree edge
        var("ft", sw.id, -1, t, VarKind::continuous, -double(nz_), double(nz_));
      }
      for (int z = 0; z < nz_; ++z) {
        var("rho", blk(z), -1, t, VarKind::binary, 0, 1);
        var("ftr", blk(z), -1, t, VarKind::continuous, 0, double(nz_));
      }
    }

    if (kind_ == FormulationKind::block_gfm) {
      set_group("gfm_coloring");
      for (const auto& g : m_.dgs)
        if (g.grid_forming_capable)
          var("x", lp_safe(g.id), -1, t, VarKind::binary, 0, 1);
      for (const auto& sw : switches_) {
        for (int c = 0; c < nz_; ++c) {
          var("y", sw.id + "/c" + std::to_string(c), -1, t, VarKind::binary, 0, 1);
          var("f", sw.id + "/c" + std::to_string(c), -1, t, VarKind::continuous,
              -double(nz_), double(nz_));
        }
      }
      if (!switches_.empty()) {
        for (int c = 0; c < nz_; ++c)
          for (int a = 0; a < nz_; ++a)
            for (int b = 0; b < nz_; ++b)
              if (a != b)
                var("u",
                    "c" + std::to_string(c) + "/" + std::to_string(a) + "/" +
                        std::to_string(b),
                    -1, t, VarKind::continuous, 0, 1);
      }
    }

    if (!switches_.empty()) {
      set_group("operational");
      for (const auto& sw : switches_)
        var("cl", sw.id, -1, t, VarKind::continuous, 0, 1);
    }
  }
  (void)inf;
}

void Builder::add_power_balance() {
  set_group("power_balance");
  for (int t = 0; t < T_; ++t) {
    for (int bi = 0; bi < static_cast<int>(m_.buses.size()); ++bi) {
      const Bus& bus = m_.buses[bi];
      const std::string bobj = lp_safe(bus.id);
      for (Phase ph : bus.phases.list()) {
        int po = phase_ordinal(ph);
        std::vector<LinearTerm> pt, qt;
        for (int gi : m_.dgs_at[bi]) {
          const DgSpec& g = m_.dgs[gi];
          if (!g.phases.contains(ph)) continue;
          pt.push_back({1.0, v("pg", lp_safe(g.id), po, t)});
          qt.push_back({1.0, v("qg", lp_safe(g.id), po, t)});
        }
        for (int li : m_.loads_at[bi]) {
          const LoadSpec& d = m_.loads[li];
          if (!d.phases.contains(ph)) continue;
          pt.push_back({-1.0, v("pl", lp_safe(d.id), po, t)});
          qt.push_back({-1.0, v("ql", lp_safe(d.id), po, t)});
        }
        for (int li : m_.lines_from[bi]) {
          const LineParams& l = m_.lines[li];
          if (!l.phases.contains(ph)) continue;
          pt.push_back({-1.0, v("p", lp_safe(l.id), po, t)});
          qt.push_back({-1.0, v("q", lp_safe(l.id), po, t)});
        }
        for (int li : m_.lines_to[bi]) {
          const LineParams& l = m_.lines[li];
          if (!l.phases.contains(ph)) continue;
          pt.push_back({1.0, v("p", lp_safe(l.id), po, t)});
          qt.push_back({1.0, v("q", lp_safe(l.id), po, t)});
        }
        std::string suffix = "_" + bobj + "_" + phase_char(ph) + "_t" + std::to_string(t);
        con("pbp" + suffix, std::move(pt), Sense::eq, 0.0);
        con("pbq" + suffix, std::move(qt), Sense::eq, 0.0);
      }
    }
  }
}

void Builder::add_voltage_drop() {
  set_group("voltage_drop");
  for (int t = 0; t < T_; ++t) {
    for (const auto& l : m_.lines) {
      const Bus& from = m_.bus(l.from_bus);
      const Bus& to = m_.bus(l.to_bus);
      if (!l.phases.subset_of(from.phases) || !l.phases.subset_of(to.phases))
        throw BuildError("line " + l.id + ": phases not present at both endpoints");

      std::vector<double> mp, mq;
      lindistflow_coefficients(l, mp, mq);
      const auto phases = l.phases.list();
      const int n = static_cast<int>(phases.size());
      const std::string obj = lp_safe(l.id);

      double big_m = opts_.big_m_voltage;
      if (big_m <= 0) {
        big_m = std::max(from.vmax * from.vmax, to.vmax * to.vmax) -
                std::min(from.vmin * from.vmin, to.vmin * to.vmin);
      }

      for (int r = 0; r < n; ++r) {
        int po = phase_ordinal(phases[r]);
        std::vector<LinearTerm> terms;
        terms.push_back({1.0, v("w", lp_safe(to.id), po, t)});
        terms.push_back({-1.0, v("w", lp_safe(from.id), po, t)});
        for (int c = 0; c < n; ++c) {
          int pc = phase_ordinal(phases[c]);
          terms.push_back({mp[r * n + c], v("p", obj, pc, t)});
          terms.push_back({mq[r * n + c], v("q", obj, pc, t)});
        }
        std::string suffix =
            "_" + obj + "_" + phase_char(phases[r]) + "_t" + std::to_string(t);
        if (!l.is_switch()) {
          con("vd" + suffix, std::move(terms), Sense::eq, 0.0);
        } else {
          VarId g = v("gamma", obj, -1, t);
          auto hi = terms;
          hi.push_back({big_m, g});
          con("vdhi" + suffix, std::move(hi), Sense::le, big_m);
          terms.push_back({-big_m, g});
          con("vdlo" + suffix, std::move(terms), Sense::ge, -big_m);
        }
      }
    }
  }
}

void Builder::add_limits() {
  set_group("limits");
  const auto cuts = thermal_polygon_cuts(opts_.thermal_polygon_sides);
  for (int t = 0; t < T_; ++t) {
    for (const auto& l : m_.lines) {
      const std::string obj = lp_safe(l.id);
      const auto phases = l.phases.list();
      for (int r = 0; r < static_cast<int>(phases.size()); ++r) {
        int po = phase_ordinal(phases[r]);
        VarId pvar = v("p", obj, po, t);
        VarId qvar = v("q", obj, po, t);
        for (int m = 0; m < static_cast<int>(cuts.size()); ++m) {
          con("th_" + obj + "_" + std::string(1, phase_char(phases[r])) + "_m" +
                  std::to_string(m) + "_t" + std::to_string(t),
              {{cuts[m].ux, pvar}, {cuts[m].uy, qvar}}, Sense::le,
              cuts[m].scale * l.thermal_limit[r]);
        }
      }
    }
  }
}

void Builder::add_switching() {
  set_group("switching");
  for (int t = 0; t < T_; ++t) {
    for (const auto& sw : switches_) {
      const LineParams& l = m_.lines[sw.line_idx];
      VarId g = v("gamma", sw.id, -1, t);
      const auto phases = l.phases.list();
      for (int r = 0; r < static_cast<int>(phases.size()); ++r) {
        int po = phase_ordinal(phases[r]);
        double cap = l.thermal_limit[r];
        std::string sfx = "_" + sw.id + "_" + std::string(1, phase_char(phases[r])) +
                          "_t" + std::to_string(t);
        con("scphi" + sfx, {{1.0, v("p", sw.id, po, t)}, {-cap, g}}, Sense::le, 0.0);
        con("scplo" + sfx, {{1.0, v("p", sw.id, po, t)}, {cap, g}}, Sense::ge, 0.0);
        con("scqhi" + sfx, {{1.0, v("q", sw.id, po, t)}, {-cap, g}}, Sense::le, 0.0);
        con("scqlo" + sfx, {{1.0, v("q", sw.id, po, t)}, {cap, g}}, Sense::ge, 0.0);
      }
    }
  }
}

void Builder::add_storage() {
  set_group("storage");
  for (int t = 0; t < T_; ++t) {
    for (const auto& bat : m_.batteries) {
      const std::string obj = lp_safe(bat.dg_id);
      const DgSpec& g = m_.dg(bat.dg_id);
      std::string sfx = "_" + obj + "_t" + std::to_string(t);

      // psi_t = psi_{t-1} - rate_t * dt
      if (t == 0) {
        con("streq" + sfx, {{1.0, v("psi", obj, -1, 0)}, {dt_, v("rate", obj, -1, 0)}},
            Sense::eq, pu(bat.initial_energy));
      } else {
        con("streq" + sfx,
            {{1.0, v("psi", obj, -1, t)},
             {-1.0, v("psi", obj, -1, t - 1)},
             {dt_, v("rate", obj, -1, t)}},
            Sense::eq, 0.0);
      }

      // Output envelope: sum_phi pg <= l * rate + l' per segment.
      std::vector<LinearTerm> psum;
      for (Phase ph : g.phases.list())
        psum.push_back({1.0, v("pg", obj, phase_ordinal(ph), t)});
      for (int s = 0; s < static_cast<int>(bat.loss_segments.size()); ++s) {
        auto terms = psum;
        terms.push_back({-bat.loss_segments[s].first, v("rate", obj, -1, t)});
        con("stseg" + std::to_string(s) + sfx, std::move(terms), Sense::le,
            pu(bat.loss_segments[s].second));
      }

      // sum_phi pg >= rate - L keeps the output tied to the extraction rate.
      double loss_cap = 0.0;
      for (const auto& [slope, icept] : bat.loss_segments) {
        loss_cap = std::max(loss_cap, (1.0 - slope) * pu(bat.rate_max) - pu(icept));
        loss_cap = std::max(loss_cap, (1.0 - slope) * pu(bat.rate_min) - pu(icept));
      }
      {
        auto terms = psum;
        terms.push_back({-1.0, v("rate", obj, -1, t)});
        con("stlo" + sfx, std::move(terms), Sense::ge, -loss_cap);
      }

      if (block_kind()) {
        VarId zv = v("z", blk(part_.block_of(g.bus)), -1, t);
        double hi = std::max(pu(bat.rate_max), 0.0);
        double lo = std::min(pu(bat.rate_min), 0.0);
        con("stratehi" + sfx, {{1.0, v("rate", obj, -1, t)}, {-hi, zv}}, Sense::le, 0.0);
        con("stratelo" + sfx, {{1.0, v("rate", obj, -1, t)}, {-lo, zv}}, Sense::ge, 0.0);
      }
    }
  }
}

void Builder::add_radiality() {
  if (!opts_.enforce_radiality || switches_.empty()) return;
  set_group("radiality");
  const double B = static_cast<double>(nz_);
  for (int t = 0; t < T_; ++t) {
    std::string tt = "_t" + std::to_string(t);
    for (const auto& sw : switches_) {
      VarId om = v("omega", sw.id, -1, t);
      // gamma may only close edges of the virtual spanning tree.
      con("radsub_" + sw.id + tt, {{1.0, v("gamma", sw.id, -1, t)}, {-1.0, om}},
          Sense::le, 0.0);
      VarId ft = v("ft", sw.id, -1, t);
      con("radcaphi_" + sw.id + tt, {{1.0, ft}, {-B, om}}, Sense::le, 0.0);
      con("radcaplo_" + sw.id + tt, {{1.0, ft}, {B, om}}, Sense::ge, 0.0);
    }
    std::vector<LinearTerm> count;
    for (int z = 0; z < nz_; ++z) {
      VarId rho = v("rho", blk(z), -1, t);
      VarId ftr = v("ftr", blk(z), -1, t);
      con("radtie_" + blk(z) + tt, {{1.0, ftr}, {-B, rho}}, Sense::le, 0.0);
      // Every block consumes one unit of flow shipped from the virtual root.
      std::vector<LinearTerm> bal{{1.0, ftr}};
      for (int si : block_switches_[z]) {
        const SwitchView& sw = switches_[si];
        bal.push_back({sw.to_block == z ? 1.0 : -1.0, v("ft", sw.id, -1, t)});
      }
      con("radbal_" + blk(z) + tt, std::move(bal), Sense::eq, 1.0);
      count.push_back({1.0, rho});
    }
    for (const auto& sw : switches_) count.push_back({1.0, v("omega", sw.id, -1, t)});
    con("radcount" + tt, std::move(count), Sense::eq, B);
  }
}

void Builder::add_shedding() {
  set_group("shedding");
  for (int t = 0; t < T_; ++t) {
    std::string tt = "_t" + std::to_string(t);

    // Load service: served power equals z times demand.
    for (const auto& d : m_.loads) {
      const std::string obj = lp_safe(d.id);
      VarId zv = v("z", zobj(d), -1, t);
      for (Phase ph : d.phases.list()) {
        Complex dem = demand_pu(d, ph, t);
        int po = phase_ordinal(ph);
        std::string sfx = "_" + obj + "_" + std::string(1, phase_char(ph)) + tt;
        con("shldp" + sfx, {{1.0, v("pl", obj, po, t)}, {-dem.real(), zv}},
            Sense::eq, 0.0);
        con("shldq" + sfx, {{1.0, v("ql", obj, po, t)}, {-dem.imag(), zv}},
            Sense::eq, 0.0);
      }
    }

    if (!block_kind()) continue;

    // A producing DG forces its block energized; a dead block silences DGs.
    for (const auto& g : m_.dgs) {
      const std::string obj = lp_safe(g.id);
      VarId zv = v("z", blk(part_.block_of(g.bus)), -1, t);
      const auto phases = g.phases.list();
      for (int i = 0; i < static_cast<int>(phases.size()); ++i) {
        int po = phase_ordinal(phases[i]);
        std::string sfx = "_" + obj + "_" + std::string(1, phase_char(phases[i])) + tt;
        double phi = std::max(pu(g.smax[i].real()), 0.0);
        double plo = std::min(pu(g.smin[i].real()), 0.0);
        double qhi = std::max(pu(g.smax[i].imag()), 0.0);
        double qlo = std::min(pu(g.smin[i].imag()), 0.0);
        con("shdgphi" + sfx, {{1.0, v("pg", obj, po, t)}, {-phi, zv}}, Sense::le, 0.0);
        con("shdgplo" + sfx, {{1.0, v("pg", obj, po, t)}, {-plo, zv}}, Sense::ge, 0.0);
        con("shdgqhi" + sfx, {{1.0, v("qg", obj, po, t)}, {-qhi, zv}}, Sense::le, 0.0);
        con("shdgqlo" + sfx, {{1.0, v("qg", obj, po, t)}, {-qlo, zv}}, Sense::ge, 0.0);
      }
    }

    // Closed switches force equal energization on both sides.
    for (const auto& sw : switches_) {
      if (sw.degenerate) continue;
      VarId za = v("z", blk(sw.from_block), -1, t);
      VarId zb = v("z", blk(sw.to_block), -1, t);
      VarId g = v("gamma", sw.id, -1, t);
      con("shnb1_" + sw.id + tt, {{1.0, za}, {-1.0, zb}, {1.0, g}}, Sense::le, 1.0);
      con("shnb2_" + sw.id + tt, {{1.0, zb}, {-1.0, za}, {1.0, g}}, Sense::le, 1.0);
    }
  }
}

void Builder::add_gfm_coloring() {
  if (kind_ != FormulationKind::block_gfm) return;
  set_group("gfm_coloring");

  // Capable DGs per block, for the sum-of-x terms.
  std::vector<std::vector<std::string>> capable(nz_);
  for (const auto& g : m_.dgs)
    if (g.grid_forming_capable)
      capable[part_.block_of(g.bus)].push_back(lp_safe(g.id));

  auto x_terms = [&](int z, int t, double coef) {
    std::vector<LinearTerm> out;
    for (const auto& id : capable[z]) out.push_back({coef, v("x", id, -1, t)});
    return out;
  };
  auto ycol = [](const SwitchView& sw, int c) {
    return sw.id + "/c" + std::to_string(c);
  };

  for (int t = 0; t < T_; ++t) {
    std::string tt = "_t" + std::to_string(t);

    // A switch carries at most one color, and only when closed.
    for (const auto& sw : switches_) {
      std::vector<LinearTerm> terms;
      for (int c = 0; c < nz_; ++c) terms.push_back({1.0, v("y", ycol(sw, c), -1, t)});
      terms.push_back({-1.0, v("gamma", sw.id, -1, t)});
      con("g12_" + sw.id + tt, std::move(terms), Sense::le, 0.0);
    }

    for (int z = 0; z < nz_; ++z) {
      std::string zb = blk(z);
      const auto& inc = block_switches_[z];

      if (!capable[z].empty()) {
        // At most one grid-former per block; exactly one when isolated.
        con("g13hi_" + zb + tt, x_terms(z, t, 1.0), Sense::le, 1.0);
        auto lo = x_terms(z, t, 1.0);
        for (int si : inc) lo.push_back({1.0, v("gamma", switches_[si].id, -1, t)});
        con("g13lo_" + zb + tt, std::move(lo), Sense::ge, 1.0);
      }

      for (int si : inc) {
        const SwitchView& sw = switches_[si];
        VarId g = v("gamma", sw.id, -1, t);
        VarId y = v("y", ycol(sw, z), -1, t);
        std::string sfx = "_" + zb + "_" + sw.id + tt;
        // An active former colors every closed incident switch with z.
        auto hi = x_terms(z, t, 1.0);
        hi.push_back({-1.0, y});
        hi.push_back({1.0, g});
        con("g14hi" + sfx, std::move(hi), Sense::le, 1.0);
        auto lo = x_terms(z, t, -1.0);
        lo.push_back({1.0, y});
        lo.push_back({1.0, g});
        con("g14lo" + sfx, std::move(lo), Sense::le, 1.0);
        // A color needs an active former in its own block.
        auto own = x_terms(z, t, -1.0);
        own.push_back({1.0, y});
        con("g16" + sfx, std::move(own), Sense::le, 0.0);
      }

      // Closed switches incident to one block share every color.
      for (size_t i = 0; i < inc.size(); ++i) {
        for (size_t j = i + 1; j < inc.size(); ++j) {
          const SwitchView& ka = switches_[inc[i]];
          const SwitchView& kb = switches_[inc[j]];
          VarId ga = v("gamma", ka.id, -1, t);
          VarId gb = v("gamma", kb.id, -1, t);
          for (int c = 0; c < nz_; ++c) {
            VarId ya = v("y", ycol(ka, c), -1, t);
            VarId yb = v("y", ycol(kb, c), -1, t);
            std::string sfx = "_" + zb + "_" + ka.id + "_" + kb.id + "_c" +
                              std::to_string(c) + tt;
            con("g15a" + sfx, {{1.0, yb}, {-1.0, ya}, {1.0, ga}, {1.0, gb}},
                Sense::le, 2.0);
            con("g15b" + sfx, {{1.0, ya}, {-1.0, yb}, {1.0, ga}, {1.0, gb}},
                Sense::le, 2.0);
          }
        }
      }
    }

    // Color flow may only traverse closed switches.
    for (const auto& sw : switches_) {
      VarId g = v("gamma", sw.id, -1, t);
      for (int c = 0; c < nz_; ++c) {
        VarId f = v("f", ycol(sw, c), -1, t);
        std::string sfx = "_" + sw.id + "_c" + std::to_string(c) + tt;
        con("g17hi" + sfx, {{1.0, f}, {-double(nz_), g}}, Sense::le, 0.0);
        con("g17lo" + sfx, {{1.0, f}, {double(nz_), g}}, Sense::ge, 0.0);
      }
    }

    if (switches_.empty()) continue;

    auto uvar = [&](int c, int a, int b, int tx) {
      return v("u",
               "c" + std::to_string(c) + "/" + std::to_string(a) + "/" +
                   std::to_string(b),
               -1, tx);
    };

    for (int c = 0; c < nz_; ++c) {
      std::string cs = "_c" + std::to_string(c);
      // Source block ships |Z|-1 units of its own color.
      std::vector<LinearTerm> src;
      for (int si : block_switches_[c]) {
        const SwitchView& sw = switches_[si];
        src.push_back({sw.from_block == c ? 1.0 : -1.0, v("f", ycol(sw, c), -1, t)});
      }
      for (int b = 0; b < nz_; ++b)
        if (b != c) src.push_back({1.0, uvar(c, c, b, t)});
      con("g19a" + cs + tt, std::move(src), Sense::eq, double(nz_ - 1));

      for (int b = 0; b < nz_; ++b) {
        if (b == c) continue;
        std::vector<LinearTerm> bal;
        for (int si : block_switches_[b]) {
          const SwitchView& sw = switches_[si];
          bal.push_back({sw.from_block == b ? 1.0 : -1.0, v("f", ycol(sw, c), -1, t)});
        }
        bal.push_back({-1.0, uvar(c, c, b, t)});
        con("g19b" + cs + "_" + blk(b) + tt, std::move(bal), Sense::eq, -1.0);

        // Virtual flow certifies disconnection and disables the color there.
        for (int si : block_switches_[b]) {
          const SwitchView& sw = switches_[si];
          con("g20" + cs + "_" + blk(b) + "_" + sw.id + tt,
              {{1.0, v("y", ycol(sw, c), -1, t)}, {1.0, uvar(c, c, b, t)}},
              Sense::le, 1.0);
        }
      }
    }

    // DG output gating: grid-followers need a closed circuit to a former.
    for (const auto& g : m_.dgs) {
      const std::string obj = lp_safe(g.id);
      int z = part_.block_of(g.bus);
      const auto phases = g.phases.list();
      for (int i = 0; i < static_cast<int>(phases.size()); ++i) {
        int po = phase_ordinal(phases[i]);
        double phi = std::max(pu(g.smax[i].real()), 0.0);
        double plo = std::min(pu(g.smin[i].real()), 0.0);
        double qhi = std::max(pu(g.smax[i].imag()), 0.0);
        double qlo = std::min(pu(g.smin[i].imag()), 0.0);
        std::string sfx = "_" + obj + "_" + std::string(1, phase_char(phases[i])) + tt;

        auto gate21 = [&](double coef) {
          auto terms = x_terms(z, t, coef);
          for (int si : block_switches_[z])
            terms.push_back({coef, v("gamma", switches_[si].id, -1, t)});
          return terms;
        };
        auto gate22 = [&](double coef) {
          auto terms = x_terms(z, t, coef);
          for (int si : block_switches_[z])
            for (int c = 0; c < nz_; ++c)
              terms.push_back({coef, v("y", ycol(switches_[si], c), -1, t)});
          return terms;
        };

        auto emit = [&](const char* tag, const char* sym, double hi_b, double lo_b,
                        auto&& gate) {
          auto hi = gate(-hi_b);
          hi.push_back({1.0, v(sym, obj, po, t)});
          con(std::string(tag) + "hi" + sfx, std::move(hi), Sense::le, 0.0);
          auto lo = gate(-lo_b);
          lo.push_back({1.0, v(sym, obj, po, t)});
          con(std::string(tag) + "lo" + sfx, std::move(lo), Sense::ge, 0.0);
        };
        emit("g21p", "pg", phi, plo, gate21);
        emit("g21q", "qg", qhi, qlo, gate21);
        emit("g22p", "pg", phi, plo, gate22);
        emit("g22q", "qg", qhi, qlo, gate22);
      }
    }
  }
}

void Builder::add_operational() {
  if (switches_.empty()) return;
  set_group("operational");
  for (int t = 0; t < T_; ++t) {
    std::string tt = "_t" + std::to_string(t);
    std::vector<LinearTerm> budget;
    for (const auto& sw : switches_) {
      VarId cl = v("cl", sw.id, -1, t);
      std::vector<LinearTerm> def{{1.0, cl}, {-1.0, v("gamma", sw.id, -1, t)}};
      double rhs = 0.0;
      if (t == 0) {
        rhs = sw.initially_closed ? -1.0 : 0.0;
      } else {
        def.push_back({1.0, v("gamma", sw.id, -1, t - 1)});
      }
      con("opcl_" + sw.id + tt, std::move(def), Sense::ge, rhs);
      budget.push_back({1.0, cl});
    }
    con("opbud" + tt, std::move(budget), Sense::le,
        static_cast<double>(opts_.switch_closures_per_step));
  }

  if (opts_.monotone_restoration) {
    std::vector<std::string> zobjs;
    if (block_kind()) {
      for (int z = 0; z < nz_; ++z) zobjs.push_back(blk(z));
    } else {
      for (const auto& d : m_.loads) zobjs.push_back(lp_safe(d.id));
    }
    for (int t = 1; t < T_; ++t)
      for (const auto& obj : zobjs)
        con("opmono_" + obj + "_t" + std::to_string(t),
            {{1.0, v("z", obj, -1, t)}, {-1.0, v("z", obj, -1, t - 1)}}, Sense::ge,
            0.0);
  }
}

void Builder::add_objective() {
  for (int t = 0; t < T_; ++t) {
    for (const auto& d : m_.loads) {
      double coef = objective_coefficient(m_, d.id, t);
      if (coef == 0.0) continue;
      out_.model.add_objective_term(coef, v("z", zobj(d), -1, t));
    }
  }
}

void Builder::finalize_report() {
  auto& r = out_.report;
  for (const auto& [name, g] : r.groups) {
    r.total_constraints += g.constraints;
    r.total_variables += g.variables;
    r.total_binaries += g.binaries;
    r.total_continuous += g.continuous;
  }
  if (r.total_variables != out_.model.n_variables() ||
      r.total_constraints != out_.model.n_constraints() ||
      r.total_binaries != out_.model.n_binary())
    throw BuildError("constraint group report does not sum to model totals");
}

BuildResult Builder::run() {
  nz_ = part_.size();
  T_ = m_.horizon.n_steps;
  dt_ = m_.horizon.dt_hours;
  if (nz_ == 0 || static_cast<int>(m_.buses.size()) == 0)
    throw BuildError("cannot build a formulation for an empty feeder");
  for (const auto& b : m_.buses)
    if (!part_.block_of_bus.count(b.id))
      throw BuildError("partition does not cover bus " + b.id);

  check_bounds();
  collect_switches();
  make_variables();
  add_power_balance();
  add_voltage_drop();
  add_limits();
  add_switching();
  add_storage();
  add_radiality();
  add_shedding();
  add_gfm_coloring();
  add_operational();
  add_objective();
  finalize_report();
  return std::move(out_);
}

}  // namespace

BuildResult build_dsr(const FeederModel& model, const BlockPartition& partition,
                      FormulationKind kind, const FormulationOptions& opts) {
  return Builder(model, partition, kind, opts).run();
}

int expected_binary_count(const FeederModel& model, const BlockPartition& partition,
                          FormulationKind kind, const FormulationOptions& opts) {
  const int T = model.horizon.n_steps;
  const int nz = partition.size();
  const int ns = model.n_switches();
  int per_step = ns;  // gamma
  per_step += (kind == FormulationKind::traditional)
                  ? static_cast<int>(model.loads.size())
                  : nz;  // z
  if (opts.enforce_radiality && ns > 0) per_step += ns + nz;  // omega + rho
  if (kind == FormulationKind::block_gfm) {
    int capable = 0;
    for (const auto& g : model.dgs)
      if (g.grid_forming_capable) ++capable;
    per_step += capable + ns * nz;  // x + y
  }
  return per_step * T;
}

}  // namespace dsr
