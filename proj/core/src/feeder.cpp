#include "dsr/feeder.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace dsr {

using nlohmann::json;

PhaseSet PhaseSet::from_string(std::string_view s) {
  PhaseSet out;
  for (char c : s) {
    switch (c) {
      case 'a': out.add(Phase::a); break;
      case 'b': out.add(Phase::b); break;
      case 'c': out.add(Phase::c); break;
      default:
        throw ParseError("invalid phase character '" + std::string(1, c) +
                         "' in \"" + std::string(s) + "\"");
    }
  }
  return out;
}

int PhaseSet::size() const {
  int n = 0;
  for (Phase p : {Phase::a, Phase::b, Phase::c})
    if (contains(p)) ++n;
  return n;
}

int PhaseSet::index_of(Phase p) const {
  if (!contains(p)) return -1;
  int idx = 0;
  for (Phase q : {Phase::a, Phase::b, Phase::c}) {
    if (q == p) return idx;
    if (contains(q)) ++idx;
  }
  return -1;
}

std::vector<Phase> PhaseSet::list() const {
  std::vector<Phase> out;
  for (Phase p : {Phase::a, Phase::b, Phase::c})
    if (contains(p)) out.push_back(p);
  return out;
}

std::string PhaseSet::to_string() const {
  std::string out;
  for (Phase p : list()) out.push_back(phase_char(p));
  return out;
}

const Bus& FeederModel::bus(const std::string& id) const {
  auto it = bus_index.find(id);
  if (it == bus_index.end()) throw std::out_of_range("unknown bus: " + id);
  return buses[it->second];
}

const LineParams& FeederModel::line(const std::string& id) const {
  auto it = line_index.find(id);
  if (it == line_index.end()) throw std::out_of_range("unknown line: " + id);
  return lines[it->second];
}

const LoadSpec& FeederModel::load(const std::string& id) const {
  auto it = load_index.find(id);
  if (it == load_index.end()) throw std::out_of_range("unknown load: " + id);
  return loads[it->second];
}

const DgSpec& FeederModel::dg(const std::string& id) const {
  auto it = dg_index.find(id);
  if (it == dg_index.end()) throw std::out_of_range("unknown generator: " + id);
  return dgs[it->second];
}

int FeederModel::n_switches() const {
  return static_cast<int>(
      std::count_if(lines.begin(), lines.end(),
                    [](const LineParams& l) { return l.is_switch(); }));
}

void FeederModel::link() {
  bus_index.clear();
  line_index.clear();
  load_index.clear();
  dg_index.clear();
  battery_index.clear();

  auto add_unique = [](std::unordered_map<std::string, int>& map,
                       const std::string& id, int idx, const char* what) {
    if (!map.emplace(id, idx).second)
      throw ParseError(std::string("duplicate ") + what + " id: " + id);
  };

  for (int i = 0; i < static_cast<int>(buses.size()); ++i)
    add_unique(bus_index, buses[i].id, i, "bus");
  for (int i = 0; i < static_cast<int>(lines.size()); ++i)
    add_unique(line_index, lines[i].id, i, "line");
  for (int i = 0; i < static_cast<int>(loads.size()); ++i)
    add_unique(load_index, loads[i].id, i, "load");
  for (int i = 0; i < static_cast<int>(dgs.size()); ++i)
    add_unique(dg_index, dgs[i].id, i, "generator");
  for (int i = 0; i < static_cast<int>(batteries.size()); ++i)
    add_unique(battery_index, batteries[i].dg_id, i, "battery");

  auto require_bus = [&](const std::string& id, const std::string& owner) {
    auto it = bus_index.find(id);
    if (it == bus_index.end())
      throw ParseError("dangling reference: bus \"" + id + "\" referenced by " +
                       owner + " is not declared");
    return it->second;
  };

  lines_from.assign(buses.size(), {});
  lines_to.assign(buses.size(), {});
  dgs_at.assign(buses.size(), {});
  loads_at.assign(buses.size(), {});

  for (int i = 0; i < static_cast<int>(lines.size()); ++i) {
    lines_from[require_bus(lines[i].from_bus, "line " + lines[i].id)].push_back(i);
    lines_to[require_bus(lines[i].to_bus, "line " + lines[i].id)].push_back(i);
  }
  for (int i = 0; i < static_cast<int>(loads.size()); ++i)
    loads_at[require_bus(loads[i].bus, "load " + loads[i].id)].push_back(i);
  for (int i = 0; i < static_cast<int>(dgs.size()); ++i)
    dgs_at[require_bus(dgs[i].bus, "generator " + dgs[i].id)].push_back(i);
  for (const auto& b : batteries) {
    if (!dg_index.count(b.dg_id))
      throw ParseError("dangling reference: generator \"" + b.dg_id +
                       "\" referenced by a battery is not declared");
  }
}

namespace {

Complex parse_complex(const json& j, const std::string& where) {
  if (j.is_number()) return Complex(j.get<double>(), 0.0);
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ParseError(where + ": expected [re, im] pair");
  return Complex(j[0].get<double>(), j[1].get<double>());
}

// A demand profile entry is either one complex value or a list of them.
std::vector<Complex> parse_profile(const json& j, const std::string& where) {
  std::vector<Complex> out;
  bool is_series = j.is_array() && !j.empty() && j[0].is_array();
  if (is_series) {
    for (const auto& e : j) out.push_back(parse_complex(e, where));
  } else {
    out.push_back(parse_complex(j, where));
  }
  return out;
}

json complex_to_json(const Complex& c) { return json::array({c.real(), c.imag()}); }

const json& require(const json& j, const char* key, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(where + ": missing required key \"" + key + "\"");
  return *it;
}

}  // namespace

FeederModel parse_feeder(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("syntax error: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("feeder file must be a JSON object");

  FeederModel m;
  try {
    m.name = j.value("name", "feeder");
    m.base_kva = require(j, "base_kva", "feeder").get<double>();
    m.base_kv = require(j, "base_kv", "feeder").get<double>();
    const json& h = require(j, "horizon", "feeder");
    m.horizon.n_steps = require(h, "n_steps", "horizon").get<int>();
    m.horizon.dt_hours = require(h, "dt_hours", "horizon").get<double>();

    for (const auto& bj : j.value("buses", json::array())) {
      Bus b;
      b.id = require(bj, "id", "bus").get<std::string>();
      b.phases = PhaseSet::from_string(require(bj, "phases", "bus " + b.id).get<std::string>());
      b.vmin = bj.value("vmin", 0.9);
      b.vmax = bj.value("vmax", 1.1);
      m.buses.push_back(std::move(b));
    }

    for (const auto& lj : j.value("lines", json::array())) {
      LineParams l;
      l.id = require(lj, "id", "line").get<std::string>();
      const std::string where = "line " + l.id;
      l.from_bus = require(lj, "from", where).get<std::string>();
      l.to_bus = require(lj, "to", where).get<std::string>();
      l.phases = PhaseSet::from_string(require(lj, "phases", where).get<std::string>());
      const int n = l.phases.size();

      const json& zj = require(lj, "impedance", where);
      if (!zj.is_array() || static_cast<int>(zj.size()) != n)
        throw ParseError(where + ": impedance matrix must have " +
                         std::to_string(n) + " rows for phases \"" +
                         l.phases.to_string() + "\"");
      for (const auto& row : zj) {
        if (!row.is_array() || static_cast<int>(row.size()) != n)
          throw ParseError(where + ": impedance matrix must be " +
                           std::to_string(n) + "x" + std::to_string(n));
        for (const auto& e : row) l.impedance.push_back(parse_complex(e, where + " impedance"));
      }

      const json& tj = require(lj, "thermal_limit", where);
      if (tj.is_number()) {
        l.thermal_limit.assign(n, tj.get<double>());
      } else if (tj.is_array() && static_cast<int>(tj.size()) == n) {
        for (const auto& e : tj) l.thermal_limit.push_back(e.get<double>());
      } else {
        throw ParseError(where + ": thermal_limit must be a scalar or one value per phase");
      }

      if (lj.contains("angle_limits")) {
        const json& aj = lj["angle_limits"];
        if (!aj.is_array() || aj.size() != 2)
          throw ParseError(where + ": angle_limits must be [min, max]");
        l.theta_min = aj[0].get<double>();
        l.theta_max = aj[1].get<double>();
      }

      if (lj.contains("switch")) {
        const json& sj = lj["switch"];
        SwitchInfo sw;
        sw.dispatchable = sj.value("dispatchable", true);
        std::string state = sj.value("state", "open");
        if (state != "open" && state != "closed")
          throw ParseError(where + ": switch state must be \"open\" or \"closed\"");
        sw.initially_closed = (state == "closed");
        l.switch_info = sw;
      }
      m.lines.push_back(std::move(l));
    }

    for (const auto& dj : j.value("loads", json::array())) {
      LoadSpec d;
      d.id = require(dj, "id", "load").get<std::string>();
      const std::string where = "load " + d.id;
      d.bus = require(dj, "bus", where).get<std::string>();
      d.phases = PhaseSet::from_string(require(dj, "phases", where).get<std::string>());
      d.priority = dj.value("priority", 1.0);
      const json& dem = require(dj, "demand", where);
      if (!dem.is_array() || static_cast<int>(dem.size()) != d.phases.size())
        throw ParseError(where + ": demand must have one profile per phase");
      for (const auto& p : dem) d.demand.push_back(parse_profile(p, where + " demand"));
      m.loads.push_back(std::move(d));
    }

    for (const auto& gj : j.value("generators", json::array())) {
      DgSpec g;
      g.id = require(gj, "id", "generator").get<std::string>();
      const std::string where = "generator " + g.id;
      g.bus = require(gj, "bus", where).get<std::string>();
      g.phases = PhaseSet::from_string(require(gj, "phases", where).get<std::string>());
      g.grid_forming_capable = gj.value("grid_forming", false);
      std::string kind = gj.value("kind", "generator");
      if (kind == "generator") g.kind = DgKind::generator;
      else if (kind == "pv") g.kind = DgKind::pv;
      else if (kind == "battery") g.kind = DgKind::battery;
      else throw ParseError(where + ": unknown kind \"" + kind + "\"");
      const json& lo = require(gj, "smin", where);
      const json& hi = require(gj, "smax", where);
      if (!lo.is_array() || static_cast<int>(lo.size()) != g.phases.size() ||
          !hi.is_array() || static_cast<int>(hi.size()) != g.phases.size())
        throw ParseError(where + ": smin/smax must have one [p,q] pair per phase");
      for (const auto& e : lo) g.smin.push_back(parse_complex(e, where + " smin"));
      for (const auto& e : hi) g.smax.push_back(parse_complex(e, where + " smax"));
      m.dgs.push_back(std::move(g));
    }

    for (const auto& bj : j.value("batteries", json::array())) {
      BatterySpec b;
      b.dg_id = require(bj, "dg_id", "battery").get<std::string>();
      const std::string where = "battery " + b.dg_id;
      b.energy_cap = require(bj, "energy_cap", where).get<double>();
      b.initial_energy = require(bj, "initial_energy", where).get<double>();
      const json& rj = require(bj, "charge_rate_bounds", where);
      if (!rj.is_array() || rj.size() != 2)
        throw ParseError(where + ": charge_rate_bounds must be [min, max]");
      b.rate_min = rj[0].get<double>();
      b.rate_max = rj[1].get<double>();
      for (const auto& seg : require(bj, "loss_segments", where)) {
        if (!seg.is_array() || seg.size() != 2)
          throw ParseError(where + ": loss segment must be [slope, intercept]");
        b.loss_segments.emplace_back(seg[0].get<double>(), seg[1].get<double>());
      }
      m.batteries.push_back(std::move(b));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed feeder file: ") + e.what());
  }

  m.link();
  return m;
}

std::string serialize_feeder(const FeederModel& m) {
  json j;
  j["name"] = m.name;
  j["base_kva"] = m.base_kva;
  j["base_kv"] = m.base_kv;
  j["horizon"] = {{"n_steps", m.horizon.n_steps}, {"dt_hours", m.horizon.dt_hours}};

  j["buses"] = json::array();
  for (const auto& b : m.buses)
    j["buses"].push_back({{"id", b.id},
                          {"phases", b.phases.to_string()},
                          {"vmin", b.vmin},
                          {"vmax", b.vmax}});

  j["lines"] = json::array();
  for (const auto& l : m.lines) {
    json lj = {{"id", l.id},
               {"from", l.from_bus},
               {"to", l.to_bus},
               {"phases", l.phases.to_string()},
               {"angle_limits", json::array({l.theta_min, l.theta_max})}};
    const int n = l.n_phases();
    json z = json::array();
    for (int r = 0; r < n; ++r) {
      json row = json::array();
      for (int c = 0; c < n; ++c) row.push_back(complex_to_json(l.z(r, c)));
      z.push_back(row);
    }
    lj["impedance"] = z;
    lj["thermal_limit"] = l.thermal_limit;
    if (l.is_switch())
      lj["switch"] = {{"dispatchable", l.switch_info->dispatchable},
                      {"state", l.switch_info->initially_closed ? "closed" : "open"}};
    j["lines"].push_back(std::move(lj));
  }

  j["loads"] = json::array();
  for (const auto& d : m.loads) {
    json prof = json::array();
    for (const auto& per_phase : d.demand) {
      if (per_phase.size() == 1) {
        prof.push_back(complex_to_json(per_phase[0]));
      } else {
        json series = json::array();
        for (const auto& v : per_phase) series.push_back(complex_to_json(v));
        prof.push_back(series);
      }
    }
    j["loads"].push_back({{"id", d.id},
                          {"bus", d.bus},
                          {"phases", d.phases.to_string()},
                          {"demand", prof},
                          {"priority", d.priority}});
  }

  j["generators"] = json::array();
  for (const auto& g : m.dgs) {
    json lo = json::array(), hi = json::array();
    for (const auto& v : g.smin) lo.push_back(complex_to_json(v));
    for (const auto& v : g.smax) hi.push_back(complex_to_json(v));
    const char* kind = g.kind == DgKind::generator ? "generator"
                       : g.kind == DgKind::pv      ? "pv"
                                                   : "battery";
    j["generators"].push_back({{"id", g.id},
                               {"bus", g.bus},
                               {"phases", g.phases.to_string()},
                               {"smin", lo},
                               {"smax", hi},
                               {"grid_forming", g.grid_forming_capable},
                               {"kind", kind}});
  }

  j["batteries"] = json::array();
  for (const auto& b : m.batteries) {
    json segs = json::array();
    for (const auto& [slope, icept] : b.loss_segments)
      segs.push_back(json::array({slope, icept}));
    j["batteries"].push_back(
        {{"dg_id", b.dg_id},
         {"energy_cap", b.energy_cap},
         {"initial_energy", b.initial_energy},
         {"charge_rate_bounds", json::array({b.rate_min, b.rate_max})},
         {"loss_segments", segs}});
  }

  return j.dump(2) + "\n";
}

std::vector<Violation> validate_feeder(const FeederModel& m) {
  std::vector<Violation> out;
  auto flag = [&](const std::string& id, const std::string& rule) {
    out.push_back({id, rule});
  };

  if (m.horizon.n_steps < 1) flag("horizon", "n_steps must be >= 1");
  if (m.horizon.dt_hours <= 0) flag("horizon", "dt must be > 0");
  if (m.base_kva <= 0) flag("feeder", "base_kva must be > 0");

  for (const auto& b : m.buses) {
    if (b.phases.empty()) flag(b.id, "bus phase set is empty");
    if (!(b.vmin > 0)) flag(b.id, "vmin must be > 0");
    if (b.vmin > b.vmax) flag(b.id, "vmin exceeds vmax");
  }

  for (const auto& l : m.lines) {
    if (l.from_bus == l.to_bus) flag(l.id, "line endpoints coincide");
    for (double s : l.thermal_limit)
      if (!(s > 0)) flag(l.id, "thermal_limit must be > 0");
    if (m.bus_index.count(l.from_bus) && !l.phases.subset_of(m.bus(l.from_bus).phases))
      flag(l.id, "line phases not a subset of from-bus phases");
    if (m.bus_index.count(l.to_bus) && !l.phases.subset_of(m.bus(l.to_bus).phases))
      flag(l.id, "line phases not a subset of to-bus phases");
  }

  for (const auto& d : m.loads) {
    if (d.phases.empty()) flag(d.id, "load phase set is empty");
    if (d.priority < 0) flag(d.id, "priority must be >= 0");
    if (m.bus_index.count(d.bus) && !d.phases.subset_of(m.bus(d.bus).phases))
      flag(d.id, "load phases not a subset of bus phases");
    for (size_t i = 0; i < d.demand.size(); ++i) {
      const auto& prof = d.demand[i];
      if (prof.size() != 1 && static_cast<int>(prof.size()) != m.horizon.n_steps)
        flag(d.id, "demand profile length must be 1 or n_steps");
      for (const auto& v : prof)
        if (v.real() < 0) flag(d.id, "active demand must be >= 0");
    }
  }

  for (const auto& g : m.dgs) {
    if (g.phases.empty()) flag(g.id, "generator phase set is empty");
    for (size_t i = 0; i < g.smin.size(); ++i) {
      if (g.smin[i].real() > g.smax[i].real() || g.smin[i].imag() > g.smax[i].imag())
        flag(g.id, "smin exceeds smax");
    }
    if (g.kind == DgKind::battery && !m.battery_index.count(g.id))
      flag(g.id, "battery-kind generator has no matching battery spec");
  }

  for (const auto& b : m.batteries) {
    if (b.initial_energy < 0 || b.initial_energy > b.energy_cap)
      flag(b.dg_id, "initial_energy outside [0, energy_cap]");
    if (b.loss_segments.empty()) flag(b.dg_id, "loss_segments must be nonempty");
    if (b.rate_min > b.rate_max) flag(b.dg_id, "charge rate bounds inverted");
    if (m.dg_index.count(b.dg_id) && m.dg(b.dg_id).kind != DgKind::battery)
      flag(b.dg_id, "battery spec attached to non-battery generator");
  }

  return out;
}

Complex demand_at(const FeederModel& m, const std::string& load_id, Phase phase,
                  int t) {
  const LoadSpec& d = m.load(load_id);
  int pi = d.phases.index_of(phase);
  if (pi < 0)
    throw std::out_of_range("load " + load_id + " has no phase " +
                            std::string(1, phase_char(phase)));
  if (t < 0 || t >= m.horizon.n_steps)
    throw std::out_of_range("timestep " + std::to_string(t) +
                            " outside horizon of " +
                            std::to_string(m.horizon.n_steps) + " steps");
  const auto& prof = d.demand[pi];
  return prof.size() == 1 ? prof[0] : prof[t];
}

}  // namespace dsr
