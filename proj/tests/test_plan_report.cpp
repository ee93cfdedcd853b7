#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dsr/plan.hpp"
#include "dsr/report.hpp"
#include "dsr/solver.hpp"

using namespace dsr;

namespace {

FeederModel load(const std::string& name) {
  std::ifstream is(std::string(DSR_FIXTURE_DIR) + "/" + name);
  REQUIRE(is.good());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_feeder(ss.str());
}

struct Solved {
  FeederModel model;
  BlockPartition partition;
  BuildResult build;
  RestorationPlan plan;
};

Solved solve_fixture(const std::string& name, FormulationKind kind) {
  Solved s{load(name), {}, {}, {}};
  s.partition = compute_load_blocks(s.model);
  s.build = build_dsr(s.model, s.partition, kind);
  Assignment a = solve(s.build.model);
  s.plan = extract_plan(s.model, s.partition, kind, s.build, a);
  return s;
}

}  // namespace

TEST_CASE("an optimal assignment becomes a physical plan") {
  Solved s = solve_fixture("tri_block.json", FormulationKind::block_gfm);
  REQUIRE(s.plan.status == SolverStatus::optimal);
  REQUIRE(s.plan.steps.size() == 1);
  const TimestepState& st = s.plan.steps[0];

  // the source can carry exactly one 10 kW block: S1 closes, B is served
  CHECK(st.switch_closed.at("S1") == 1);
  CHECK(st.switch_closed.at("S2") == 0);
  CHECK(st.block_energized == std::vector<int>{1, 1, 0});
  CHECK(st.load_energized.at("loadB") == 1);
  CHECK(st.load_energized.at("loadC") == 0);
  CHECK(st.grid_forming.at("dgA") == 1);
  CHECK(s.plan.objective_kwh == doctest::Approx(10.0).epsilon(1e-4));
  CHECK(st.load_served_kw.at("loadB").at('a').real() ==
        doctest::Approx(10.0).epsilon(1e-4));
  CHECK(st.dg_output_kw.at("dgA").at('a').real() ==
        doctest::Approx(10.0).epsilon(1e-4));
  // squared voltage stays inside the band
  double w = st.bus_w.at("B").at('a');
  CHECK(w >= 0.81 - 1e-9);
  CHECK(w <= 1.21 + 1e-9);
}

TEST_CASE("infeasible assignments produce an empty plan") {
  FeederModel m = load("tri_block.json");
  BlockPartition p = compute_load_blocks(m);
  BuildResult b = build_dsr(m, p, FormulationKind::block);
  Assignment a;
  a.status = SolverStatus::infeasible;
  RestorationPlan plan = extract_plan(m, p, FormulationKind::block, b, a);
  CHECK(plan.status == SolverStatus::infeasible);
  CHECK(plan.steps.empty());
}

TEST_CASE("fractional binaries are refused during extraction") {
  FeederModel m = load("tri_block.json");
  BlockPartition p = compute_load_blocks(m);
  BuildResult b = build_dsr(m, p, FormulationKind::block);
  Assignment a;
  a.values.assign(b.model.n_variables(), 0.0);
  a.status = SolverStatus::optimal;
  for (VarId id = 0; id < b.model.n_variables(); ++id)
    if (b.model.variable(id).kind == VarKind::binary) a.values[id] = 0.4;
  CHECK_THROWS_AS(extract_plan(m, p, FormulationKind::block, b, a), ModelError);
}

TEST_CASE("plans survive a JSON round trip") {
  Solved s = solve_fixture("two_block_battery.json", FormulationKind::block);
  REQUIRE(s.plan.status == SolverStatus::optimal);
  std::string text = plan_to_json(s.plan);
  RestorationPlan back = plan_from_json(text);
  CHECK(plan_to_json(back) == text);
  CHECK(back.kind == s.plan.kind);
  CHECK(back.steps.size() == s.plan.steps.size());
  CHECK(back.steps[0].switch_closed == s.plan.steps[0].switch_closed);
  CHECK(back.steps[0].battery_energy_kwh == s.plan.steps[0].battery_energy_kwh);
  CHECK(back.steps[0].bus_w == s.plan.steps[0].bus_w);

  CHECK_THROWS_AS(plan_from_json("{nope"), ParseError);
  CHECK_THROWS_AS(plan_from_json("{\"kind\": \"block\"}"), ParseError);
  CHECK_THROWS_AS(
      plan_from_json("{\"kind\": \"sideways\", \"status\": \"optimal\"}"),
      ParseError);
}

TEST_CASE("run summaries count shed load and block timesteps") {
  Solved s = solve_fixture("tri_block.json", FormulationKind::block);
  RunRecord r = summarize_run("tri_block", s.model, s.partition, s.build, s.plan, 0.5);
  CHECK(r.kind == FormulationKind::block);
  CHECK(r.binary_vars == s.build.model.n_binary());
  CHECK(r.constraints == s.build.model.n_constraints());
  CHECK(r.objective_kwh == doctest::Approx(10.0).epsilon(1e-4));
  CHECK(r.loads_shed == 1);   // loadC for the single step
  CHECK(r.blocks_shed == 1);  // block holding C
  CHECK(r.delivered_mwh == doctest::Approx(0.01).epsilon(1e-4));

  // empty plan: everything counts as shed
  RestorationPlan dead;
  dead.kind = FormulationKind::block;
  RunRecord rd = summarize_run("dead", s.model, s.partition, s.build, dead, 0.0);
  CHECK(rd.loads_shed == 2);
  CHECK(rd.blocks_shed == 2);
}

TEST_CASE("stats render as an aligned table and as CSV") {
  RunRecord r;
  r.case_name = "demo";
  r.kind = FormulationKind::block_gfm;
  r.binary_vars = 12;
  r.objective_kwh = 10.0;
  std::string table = format_stats_table({r});
  CHECK(table.find("demo") != std::string::npos);
  CHECK(table.find("block_gfm") != std::string::npos);
  CHECK(table.find("obj[kWh]") != std::string::npos);

  std::string csv = format_stats_csv({r});
  CHECK(csv.find("case,kind,binary_vars") == 0);
  CHECK(csv.find("demo,block_gfm,12") != std::string::npos);
}

TEST_CASE("diagrams mark energized blocks and switch states") {
  Solved s = solve_fixture("tri_block.json", FormulationKind::block_gfm);
  std::string dot = emit_dot(s.model, s.partition, &s.plan);
  CHECK(dot.find("graph feeder {") == 0);
  CHECK(dot.find("cluster_blk0") != std::string::npos);
  CHECK(dot.find("#d8f3d8") != std::string::npos);  // a live block
  CHECK(dot.find("#f3d8d8") != std::string::npos);  // a dead block
  CHECK(dot.find("[forming]") != std::string::npos);
  CHECK(dot.find("style=bold") != std::string::npos);    // closed S1
  CHECK(dot.find("style=dashed") != std::string::npos);  // open S2

  // without a plan the rendering is neutral
  std::string bare = emit_dot(s.model, s.partition);
  CHECK(bare.find("#eeeeee") != std::string::npos);
  CHECK(bare.find("[gfm-capable]") != std::string::npos);

  CHECK_THROWS_AS(emit_dot(s.model, s.partition, &s.plan, 7), ParseError);
}
