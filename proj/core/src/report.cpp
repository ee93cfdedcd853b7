#include "dsr/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "dsr/validate.hpp"

namespace dsr {

namespace {

std::string num(double v, int prec = 3) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

}  // namespace

RunRecord summarize_run(const std::string& case_name, const FeederModel& model,
                        const BlockPartition& partition, const BuildResult& build,
                        const RestorationPlan& plan, double solve_seconds) {
  RunRecord r;
  r.case_name = case_name;
  r.kind = plan.kind;
  r.binary_vars = build.model.n_binary();
  r.continuous_vars = build.model.n_continuous();
  r.constraints = build.model.n_constraints();
  r.solve_seconds = solve_seconds;
  r.objective_kwh = plan.objective_kwh;
  r.gap = plan.gap;
  r.delivered_mwh = delivered_energy_mwh(model, plan);
  // Shed counts are load-timestep (block-timestep) pairs over the horizon.
  if (!plan.steps.empty()) {
    for (const auto& s : plan.steps) {
      for (const auto& d : model.loads) {
        auto it = s.load_energized.find(d.id);
        if (it == s.load_energized.end() || !it->second) ++r.loads_shed;
      }
      for (const auto& blk : partition.blocks) {
        if (blk.loads.empty()) continue;
        bool any = false;
        for (const auto& lid : blk.loads) {
          auto it = s.load_energized.find(lid);
          if (it != s.load_energized.end() && it->second) any = true;
        }
        if (!any) ++r.blocks_shed;
      }
    }
  } else {
    int T = model.horizon.n_steps;
    r.loads_shed = static_cast<int>(model.loads.size()) * T;
    for (const auto& blk : partition.blocks)
      if (!blk.loads.empty()) r.blocks_shed += T;
  }
  return r;
}

std::string format_stats_table(const std::vector<RunRecord>& rows) {
  const std::vector<std::string> head = {
      "case",       "kind",     "bin",   "cont",       "cons",
      "solve[s]",   "obj[kWh]", "gap",   "loads shed", "blocks shed",
      "served[MWh]"};
  std::vector<std::vector<std::string>> cells;
  cells.push_back(head);
  for (const auto& r : rows) {
    cells.push_back({r.case_name, to_string(r.kind), std::to_string(r.binary_vars),
                     std::to_string(r.continuous_vars),
                     std::to_string(r.constraints), num(r.solve_seconds),
                     num(r.objective_kwh), num(r.gap, 5),
                     std::to_string(r.loads_shed), std::to_string(r.blocks_shed),
                     num(r.delivered_mwh, 4)});
  }
  std::vector<size_t> width(head.size(), 0);
  for (const auto& row : cells)
    for (size_t c = 0; c < row.size(); ++c)
      width[c] = std::max(width[c], row[c].size());

  std::ostringstream os;
  for (size_t i = 0; i < cells.size(); ++i) {
    for (size_t c = 0; c < cells[i].size(); ++c) {
      os << (c ? "  " : "");
      os << cells[i][c] << std::string(width[c] - cells[i][c].size(), ' ');
    }
    os << '\n';
    if (i == 0) {
      for (size_t c = 0; c < width.size(); ++c)
        os << (c ? "  " : "") << std::string(width[c], '-');
      os << '\n';
    }
  }
  return os.str();
}

std::string format_stats_csv(const std::vector<RunRecord>& rows) {
  std::ostringstream os;
  os << "case,kind,binary_vars,continuous_vars,constraints,solve_seconds,"
        "objective_kwh,gap,loads_shed,blocks_shed,delivered_mwh\n";
  for (const auto& r : rows) {
    os << r.case_name << ',' << to_string(r.kind) << ',' << r.binary_vars << ','
       << r.continuous_vars << ',' << r.constraints << ',' << num(r.solve_seconds, 6)
       << ',' << num(r.objective_kwh, 6) << ',' << num(r.gap, 8) << ','
       << r.loads_shed << ',' << r.blocks_shed << ',' << num(r.delivered_mwh, 6)
       << '\n';
  }
  return os.str();
}

std::string emit_dot(const FeederModel& model, const BlockPartition& partition,
                     const RestorationPlan* plan, int t) {
  if (plan && !plan->steps.empty()) {
    if (t < 0) t = static_cast<int>(plan->steps.size()) - 1;
    if (t >= static_cast<int>(plan->steps.size()))
      throw ParseError("diagram step out of range");
  } else {
    plan = nullptr;
  }
  const TimestepState* s = plan ? &plan->steps[t] : nullptr;

  std::ostringstream os;
  os << "graph feeder {\n  rankdir=LR;\n  node [shape=box, fontsize=10];\n";

  for (const auto& blk : partition.blocks) {
    bool energized = false;
    if (s) {
      if (!s->block_energized.empty()) {
        energized = s->block_energized[blk.id] != 0;
      } else {
        for (const auto& lid : blk.loads) {
          auto it = s->load_energized.find(lid);
          if (it != s->load_energized.end() && it->second) energized = true;
        }
      }
    }
    os << "  subgraph cluster_blk" << blk.id << " {\n";
    os << "    label=\"block " << blk.id << "\";\n";
    os << "    style=filled;\n    fillcolor=\""
       << (s ? (energized ? "#d8f3d8" : "#f3d8d8") : "#eeeeee") << "\";\n";
    for (const auto& bus_id : blk.buses) {
      std::ostringstream label;
      label << bus_id;
      int n_loads = 0;
      for (int li : model.loads_at[model.bus_index.at(bus_id)]) {
        (void)li;
        ++n_loads;
      }
      if (n_loads > 0) label << "\\n" << n_loads << " load" << (n_loads > 1 ? "s" : "");
      for (int gi : model.dgs_at[model.bus_index.at(bus_id)]) {
        const DgSpec& g = model.dgs[gi];
        label << "\\n" << g.id;
        if (g.grid_forming_capable) {
          bool forming = s && s->grid_forming.count(g.id) &&
                         s->grid_forming.at(g.id);
          label << (forming ? " [forming]" : " [gfm-capable]");
        }
      }
      os << "    \"" << bus_id << "\" [label=\"" << label.str() << "\"];\n";
    }
    os << "  }\n";
  }

  for (const auto& l : model.lines) {
    os << "  \"" << l.from_bus << "\" -- \"" << l.to_bus << "\"";
    if (l.is_switch()) {
      bool closed = l.switch_info->initially_closed;
      if (s && s->switch_closed.count(l.id)) closed = s->switch_closed.at(l.id);
      os << " [label=\"" << l.id << "\", "
         << (closed ? "style=bold, color=\"#2a7d2a\""
                    : "style=dashed, color=\"#b03030\"")
         << "]";
    }
    os << ";\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace dsr
