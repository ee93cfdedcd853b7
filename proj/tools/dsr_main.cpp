// Command-line front end: partition, build, solve, run, validate, diagram.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "dsr/blocks.hpp"
#include "dsr/feeder.hpp"
#include "dsr/formulation.hpp"
#include "dsr/plan.hpp"
#include "dsr/report.hpp"
#include "dsr/solver.hpp"
#include "dsr/validate.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitParse = 2;
constexpr int kExitBuild = 3;
constexpr int kExitSolve = 4;
constexpr int kExitValidate = 5;

std::string read_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw dsr::ParseError("cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream os(path);
  if (!os) throw dsr::ParseError("cannot write " + path);
  os << text;
}

struct CommonOpts {
  std::string feeder_path;
  std::string kind = "block_gfm";
  dsr::FormulationOptions fopts;
  bool no_monotone = false;
  bool no_radiality = false;

  dsr::FormulationOptions formulation_options() const {
    dsr::FormulationOptions o = fopts;
    o.monotone_restoration = !no_monotone;
    o.enforce_radiality = !no_radiality;
    return o;
  }
};

struct SolverOpts {
  std::string solver_cmd;
  std::string preset = "scipy";
  double time_limit = 3000.0;
  double gap = 1e-4;
  bool keep_artifacts = false;
  std::string out_dir;

  dsr::SolverConfig config() const {
    dsr::SolverConfig c = dsr::solver_preset(preset);
    if (!solver_cmd.empty()) c.command = solver_cmd;
    c.time_limit_s = time_limit;
    c.rel_gap = gap;
    c.keep_artifacts = keep_artifacts;
    if (!out_dir.empty()) c.artifact_dir = out_dir;
    return c;
  }
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_kind = true) {
  cmd->add_option("feeder", o.feeder_path, "feeder description (json)")
      ->required();
  if (with_kind)
    cmd->add_option("--kind", o.kind,
                    "load-control model: traditional | block | block_gfm")
        ->check(CLI::IsMember({"traditional", "block", "block_gfm", "block-gfm"}));
  cmd->add_option("--closures-per-step", o.fopts.switch_closures_per_step,
                  "switch closures allowed per timestep");
  cmd->add_flag("--no-monotone", o.no_monotone,
                "allow restored loads to drop out again");
  cmd->add_flag("--no-radiality", o.no_radiality,
                "drop the radial-operation requirement");
  cmd->add_option("--polygon-sides", o.fopts.thermal_polygon_sides,
                  "thermal polygon resolution (4, 8 or 16)");
  cmd->add_option("--big-m", o.fopts.big_m_voltage,
                  "voltage decoupling big-M (0 = automatic)");
}

void add_solver(CLI::App* cmd, SolverOpts& o) {
  cmd->add_option("--solver-cmd", o.solver_cmd,
                  "shell template with {lp} {sol} {time_limit} {gap}");
  cmd->add_option("--solver", o.preset, "solver preset: scipy | scip | cbc");
  cmd->add_option("--time-limit", o.time_limit, "solver time limit (s)");
  cmd->add_option("--gap", o.gap, "relative MIP gap");
  cmd->add_flag("--keep-artifacts", o.keep_artifacts,
                "keep LP/solution files after solving");
  cmd->add_option("--out-dir", o.out_dir, "directory for solver artifacts");
}

dsr::FeederModel load_feeder(const std::string& path) {
  dsr::FeederModel m = dsr::parse_feeder(read_file(path));
  auto violations = dsr::validate_feeder(m);
  if (!violations.empty()) {
    for (const auto& v : violations)
      std::cerr << "invalid feeder: " << v.object_id << ": " << v.rule << "\n";
    throw dsr::ParseError("feeder fails validation");
  }
  if (m.name.empty()) m.name = fs::path(path).stem().string();
  return m;
}

struct SolvedCase {
  dsr::BuildResult build;
  dsr::RestorationPlan plan;
  double seconds = 0.0;
};

SolvedCase solve_case(const dsr::FeederModel& model,
                      const dsr::BlockPartition& part, dsr::FormulationKind kind,
                      const dsr::FormulationOptions& fopts,
                      const dsr::SolverConfig& scfg) {
  SolvedCase sc;
  sc.build = dsr::build_dsr(model, part, kind, fopts);
  dsr::SolveStats stats;
  dsr::Assignment a = dsr::solve(sc.build.model, scfg, &stats);
  sc.seconds = stats.wall_seconds;
  sc.plan = dsr::extract_plan(model, part, kind, sc.build, a);
  return sc;
}

int cmd_partition(const CommonOpts& o, bool as_json) {
  dsr::FeederModel m = load_feeder(o.feeder_path);
  dsr::BlockPartition part = dsr::compute_load_blocks(m);
  dsr::BlockGraph graph = dsr::build_block_graph(part, m);
  if (as_json) {
    std::ostringstream os;
    os << "{\n  \"blocks\": [\n";
    for (size_t i = 0; i < part.blocks.size(); ++i) {
      const auto& b = part.blocks[i];
      os << "    {\"id\": " << b.id << ", \"buses\": [";
      for (size_t j = 0; j < b.buses.size(); ++j)
        os << (j ? ", " : "") << '"' << b.buses[j] << '"';
      os << "], \"loads\": " << b.loads.size() << ", \"dgs\": " << b.dgs.size()
         << ", \"gfm_capable\": " << (b.has_gfm_capable ? "true" : "false") << "}"
         << (i + 1 < part.blocks.size() ? "," : "") << "\n";
    }
    os << "  ],\n  \"switch_edges\": [\n";
    size_t i = 0;
    for (const auto& [id, e] : graph.switch_edges) {
      os << "    {\"switch\": \"" << id << "\", \"from\": " << e.from_block
         << ", \"to\": " << e.to_block
         << ", \"degenerate\": " << (e.degenerate ? "true" : "false") << "}"
         << (++i < graph.switch_edges.size() ? "," : "") << "\n";
    }
    os << "  ]\n}\n";
    std::cout << os.str();
  } else {
    std::cout << part.size() << " load blocks, " << graph.switch_edges.size()
              << " switch edges, " << graph.virtual_edges.size()
              << " virtual edges\n";
    for (const auto& b : part.blocks) {
      std::cout << "block " << b.id << ": " << b.buses.size() << " buses, "
                << b.loads.size() << " loads, " << b.dgs.size() << " dgs"
                << (b.has_gfm_capable ? ", gfm-capable" : "") << "\n";
    }
    for (const auto& [id, e] : graph.switch_edges)
      std::cout << "switch " << id << ": block " << e.from_block << " -- block "
                << e.to_block << (e.degenerate ? " (degenerate)" : "") << "\n";
  }
  return 0;
}

int cmd_build(const CommonOpts& o, const std::string& lp_out) {
  dsr::FeederModel m = load_feeder(o.feeder_path);
  dsr::BlockPartition part = dsr::compute_load_blocks(m);
  dsr::BuildResult build = dsr::build_dsr(
      m, part, dsr::formulation_kind_from_string(o.kind), o.formulation_options());
  if (!lp_out.empty()) write_file(lp_out, dsr::write_lp(build.model));

  std::cout << "kind: " << o.kind << "\n";
  std::cout << "variables: " << build.model.n_variables() << " ("
            << build.model.n_binary() << " binary, " << build.model.n_continuous()
            << " continuous)\nconstraints: " << build.model.n_constraints()
            << "\n\ngroup                variables  binaries  constraints\n";
  for (const auto& [name, g] : build.report.groups) {
    std::printf("%-20s %9d %9d %12d\n", name.c_str(), g.variables, g.binaries,
                g.constraints);
  }
  if (!lp_out.empty()) std::cout << "\nwrote " << lp_out << "\n";
  return 0;
}

int cmd_solve(const CommonOpts& o, const SolverOpts& s,
              const std::string& plan_out, const std::string& lp_out) {
  dsr::FeederModel m = load_feeder(o.feeder_path);
  dsr::BlockPartition part = dsr::compute_load_blocks(m);
  dsr::FormulationKind kind = dsr::formulation_kind_from_string(o.kind);
  SolvedCase sc = solve_case(m, part, kind, o.formulation_options(), s.config());
  if (!lp_out.empty()) write_file(lp_out, dsr::write_lp(sc.build.model));
  if (!plan_out.empty()) write_file(plan_out, dsr::plan_to_json(sc.plan));

  std::cout << "status: " << dsr::to_string(sc.plan.status)
            << "\nobjective: " << sc.plan.objective_kwh << " kWh (weighted)"
            << "\ndelivered: " << dsr::delivered_energy_mwh(m, sc.plan)
            << " MWh\nsolve time: " << sc.seconds << " s\n";
  if (!plan_out.empty()) std::cout << "wrote " << plan_out << "\n";
  if (sc.plan.status == dsr::SolverStatus::infeasible) return kExitSolve;
  return 0;
}

int cmd_run(const CommonOpts& o, const SolverOpts& s, const std::string& csv_out,
            const std::string& dot_dir, bool skip_validate) {
  dsr::FeederModel m = load_feeder(o.feeder_path);
  dsr::BlockPartition part = dsr::compute_load_blocks(m);
  dsr::FormulationOptions fopts = o.formulation_options();
  dsr::SolverConfig scfg = s.config();

  std::vector<dsr::RunRecord> rows;
  bool violations = false;
  for (auto kind : {dsr::FormulationKind::traditional, dsr::FormulationKind::block,
                    dsr::FormulationKind::block_gfm}) {
    SolvedCase sc = solve_case(m, part, kind, fopts, scfg);
    rows.push_back(dsr::summarize_run(m.name, m, part, sc.build, sc.plan,
                                      sc.seconds));
    if (!skip_validate && sc.plan.status != dsr::SolverStatus::infeasible) {
      dsr::ValidationReport rep = dsr::check_plan(m, part, sc.plan, fopts);
      if (!rep.ok()) {
        violations = true;
        for (const auto& iss : rep.issues)
          std::cerr << m.name << " [" << dsr::to_string(kind) << "] t=" << iss.t
                    << " " << iss.rule << ": " << iss.detail << "\n";
      }
    }
    if (!dot_dir.empty())
      write_file((fs::path(dot_dir) / (m.name + "_" + dsr::to_string(kind) + ".dot"))
                     .string(),
                 dsr::emit_dot(m, part, &sc.plan));
  }

  std::cout << dsr::format_stats_table(rows);
  if (!csv_out.empty()) {
    write_file(csv_out, dsr::format_stats_csv(rows));
    std::cout << "wrote " << csv_out << "\n";
  }
  return violations ? kExitValidate : 0;
}

int cmd_validate(const CommonOpts& o, const std::string& plan_path, double tol) {
  dsr::FeederModel m = load_feeder(o.feeder_path);
  dsr::BlockPartition part = dsr::compute_load_blocks(m);
  dsr::RestorationPlan plan = dsr::plan_from_json(read_file(plan_path));
  dsr::ValidationOptions vopts;
  vopts.tol = tol;
  dsr::ValidationReport rep =
      dsr::check_plan(m, part, plan, o.formulation_options(), vopts);

  std::cout << "delivered: " << rep.delivered_mwh << " MWh\n"
            << "weighted objective: " << rep.objective_check_kwh << " kWh\n"
            << "max power balance residual: " << rep.max_power_balance_residual_kw
            << " kW\n";
  for (size_t t = 0; t < rep.partial_blocks_per_step.size(); ++t)
    if (rep.partial_blocks_per_step[t] > 0)
      std::cout << "step " << t << ": " << rep.partial_blocks_per_step[t]
                << " partially energized block(s)\n";
  if (rep.ok()) {
    std::cout << "plan is feasible\n";
    return 0;
  }
  for (const auto& iss : rep.issues)
    std::cerr << "t=" << iss.t << " " << iss.rule << ": " << iss.detail << "\n";
  std::cerr << rep.issues.size() << " violation(s)\n";
  return kExitValidate;
}

int cmd_diagram(const CommonOpts& o, const std::string& plan_path, int step,
                const std::string& out) {
  dsr::FeederModel m = load_feeder(o.feeder_path);
  dsr::BlockPartition part = dsr::compute_load_blocks(m);
  std::string dot;
  if (plan_path.empty()) {
    dot = dsr::emit_dot(m, part);
  } else {
    dsr::RestorationPlan plan = dsr::plan_from_json(read_file(plan_path));
    dot = dsr::emit_dot(m, part, &plan, step);
  }
  if (out.empty())
    std::cout << dot;
  else
    write_file(out, dot);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feeder restoration planning toolkit"};
  app.require_subcommand(1);

  CommonOpts copts;
  SolverOpts sopts;

  auto* partition = app.add_subcommand("partition", "show load blocks and the "
                                                    "switch graph");
  bool part_json = false;
  add_common(partition, copts, false);
  partition->add_flag("--json", part_json, "machine-readable output");

  auto* build = app.add_subcommand("build", "build the restoration MILP");
  std::string lp_out;
  add_common(build, copts);
  build->add_option("--lp", lp_out, "write the model in LP format");

  auto* solve = app.add_subcommand("solve", "build and solve one case");
  std::string plan_out, solve_lp_out;
  add_common(solve, copts);
  add_solver(solve, sopts);
  solve->add_option("--plan", plan_out, "write the restoration plan (json)");
  solve->add_option("--lp", solve_lp_out, "also write the model in LP format");

  auto* run = app.add_subcommand(
      "run", "solve all three load-control models and compare");
  std::string csv_out, dot_dir;
  bool skip_validate = false;
  add_common(run, copts, false);
  add_solver(run, sopts);
  run->add_option("--csv", csv_out, "write the comparison table as csv");
  run->add_option("--dot-dir", dot_dir, "write per-kind diagrams here");
  run->add_flag("--skip-validate", skip_validate, "skip plan feasibility checks");

  auto* validate = app.add_subcommand("validate", "check a plan against the "
                                                  "feeder physics and rules");
  std::string plan_path;
  double tol = 1e-5;
  add_common(validate, copts, true);
  validate->add_option("plan", plan_path, "restoration plan (json)")->required();
  validate->add_option("--tol", tol, "per-unit feasibility tolerance");

  auto* diagram = app.add_subcommand("diagram", "emit a graphviz diagram");
  std::string dia_plan, dia_out;
  int dia_step = -1;
  add_common(diagram, copts, false);
  diagram->add_option("--plan", dia_plan, "overlay a restoration plan");
  diagram->add_option("--step", dia_step, "timestep to render (default: last)");
  diagram->add_option("-o,--out", dia_out, "output path (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (partition->parsed()) return cmd_partition(copts, part_json);
    if (build->parsed()) return cmd_build(copts, lp_out);
    if (solve->parsed()) return cmd_solve(copts, sopts, plan_out, solve_lp_out);
    if (run->parsed())
      return cmd_run(copts, sopts, csv_out, dot_dir, skip_validate);
    if (validate->parsed()) return cmd_validate(copts, plan_path, tol);
    if (diagram->parsed()) return cmd_diagram(copts, dia_plan, dia_step, dia_out);
  } catch (const dsr::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitParse;
  } catch (const dsr::BuildError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBuild;
  } catch (const dsr::SolveError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitSolve;
  } catch (const dsr::ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBuild;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
