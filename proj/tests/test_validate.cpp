#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dsr/plan.hpp"
#include "dsr/solver.hpp"
#include "dsr/validate.hpp"

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

Solved solve_fixture(const std::string& name, FormulationKind kind,
                     const FormulationOptions& opts = {}) {
  Solved s{load(name), {}, {}, {}};
  s.partition = compute_load_blocks(s.model);
  s.build = build_dsr(s.model, s.partition, kind, opts);
  Assignment a = solve(s.build.model);
  REQUIRE(a.feasible());
  s.plan = extract_plan(s.model, s.partition, kind, s.build, a);
  return s;
}

bool has_rule(const ValidationReport& r, const std::string& rule) {
  return std::any_of(r.issues.begin(), r.issues.end(),
                     [&](const CheckIssue& i) { return i.rule == rule; });
}

}  // namespace

TEST_CASE("solver output passes the independent checker") {
  for (const char* name : {"tri_block.json", "two_block_battery.json",
                           "three_phase.json", "gfm_mix.json"}) {
    for (FormulationKind k : {FormulationKind::traditional, FormulationKind::block,
                              FormulationKind::block_gfm}) {
      CAPTURE(name);
      CAPTURE(to_string(k));
      Solved s = solve_fixture(name, k);
      ValidationReport r = check_plan(s.model, s.partition, s.plan);
      for (const auto& i : r.issues) CAPTURE(i.rule + ": " + i.detail);
      CHECK(r.ok());
      CHECK(r.max_power_balance_residual_kw <= 1e-5 * s.model.base_kva);
      CHECK(r.objective_check_kwh ==
            doctest::Approx(s.plan.objective_kwh).epsilon(1e-4));
    }
  }
}

TEST_CASE("each physics rule fires when its quantity is tampered with") {
  Solved s = solve_fixture("tri_block.json", FormulationKind::block_gfm);
  REQUIRE(check_plan(s.model, s.partition, s.plan).ok());

  SUBCASE("power balance") {
    RestorationPlan p = s.plan;
    p.steps[0].dg_output_kw["dgA"]['a'] += Complex(3.0, 0.0);
    CHECK(has_rule(check_plan(s.model, s.partition, p), "power_balance"));
  }
  SUBCASE("voltage band") {
    RestorationPlan p = s.plan;
    p.steps[0].bus_w["B"]['a'] = 1.5;
    ValidationReport r = check_plan(s.model, s.partition, p);
    CHECK((has_rule(r, "voltage") || has_rule(r, "voltage_drop")));
  }
  SUBCASE("voltage drop across a closed line") {
    RestorationPlan p = s.plan;
    p.steps[0].bus_w["B"]['a'] = p.steps[0].bus_w["A"]['a'];  // drop erased
    CHECK(has_rule(check_plan(s.model, s.partition, p), "voltage_drop"));
  }
  SUBCASE("flow through an open switch") {
    RestorationPlan p = s.plan;
    p.steps[0].line_flow_kw["S2"]['a'] = Complex(5.0, 0.0);
    ValidationReport r = check_plan(s.model, s.partition, p);
    CHECK(has_rule(r, "open_switch"));
  }
  SUBCASE("thermal limit") {
    RestorationPlan p = s.plan;
    p.steps[0].line_flow_kw["S1"]['a'] = Complex(150.0, 0.0);  // limit is 100 kVA
    CHECK(has_rule(check_plan(s.model, s.partition, p), "thermal"));
  }
  SUBCASE("generator outside its box") {
    RestorationPlan p = s.plan;
    p.steps[0].dg_output_kw["dgA"]['a'] = Complex(40.0, 0.0);  // cap is 25 kW
    CHECK(has_rule(check_plan(s.model, s.partition, p), "dg_limits"));
  }
  SUBCASE("service flag disagreeing with served power") {
    RestorationPlan p = s.plan;
    p.steps[0].load_served_kw["loadB"]['a'] = Complex(4.0, 0.0);  // partial
    CHECK(has_rule(check_plan(s.model, s.partition, p), "load_service"));
  }
  SUBCASE("an energized island without a former") {
    RestorationPlan p = s.plan;
    p.steps[0].grid_forming["dgA"] = 0;
    CHECK(has_rule(check_plan(s.model, s.partition, p), "gfm"));
  }
  SUBCASE("a non-capable machine claiming to form") {
    Solved g = solve_fixture("gfm_mix.json", FormulationKind::block_gfm);
    RestorationPlan p = g.plan;
    p.steps[0].grid_forming["pvB"] = 1;
    CHECK(has_rule(check_plan(g.model, g.partition, p), "gfm"));
  }
  SUBCASE("missing switch record") {
    RestorationPlan p = s.plan;
    p.steps[0].switch_closed.erase("S1");
    CHECK(has_rule(check_plan(s.model, s.partition, p), "switch_state"));
  }
  SUBCASE("split service inside one block") {
    Solved t2 = solve_fixture("tri_block.json", FormulationKind::block);
    RestorationPlan p = t2.plan;
    p.steps[0].block_energized = {1, 1, 1};
    p.steps[0].load_energized["loadC"] = 0;
    CHECK(has_rule(check_plan(t2.model, t2.partition, p), "block_uniform"));
  }
  SUBCASE("mis-sized block vector") {
    RestorationPlan p = s.plan;
    p.steps[0].block_energized = {1};
    CHECK(has_rule(check_plan(s.model, s.partition, p), "block_state"));
  }
  SUBCASE("infeasible status") {
    RestorationPlan p = s.plan;
    p.status = SolverStatus::infeasible;
    CHECK(has_rule(check_plan(s.model, s.partition, p), "status"));
  }
  SUBCASE("objective not matching served energy") {
    RestorationPlan p = s.plan;
    p.objective_kwh += 5.0;
    CHECK(has_rule(check_plan(s.model, s.partition, p), "objective"));
  }
}

TEST_CASE("logical rules: radiality, budget, monotonicity, storage") {
  SUBCASE("a switching loop is caught") {
    Solved s = solve_fixture("triangle.json", FormulationKind::block);
    RestorationPlan p = s.plan;
    for (auto& [id, v] : p.steps.back().switch_closed) v = 1;  // close the cycle
    CHECK(has_rule(check_plan(s.model, s.partition, p), "radiality"));
  }
  SUBCASE("closing two switches in one step exceeds the budget") {
    Solved s = solve_fixture("tri_block.json", FormulationKind::traditional);
    RestorationPlan p = s.plan;
    p.steps[0].switch_closed["S1"] = 1;
    p.steps[0].switch_closed["S2"] = 1;
    ValidationReport r = check_plan(s.model, s.partition, p);
    CHECK(has_rule(r, "closure_budget"));
  }
  SUBCASE("a load dropping out later violates monotone restoration") {
    Solved s = solve_fixture("tri_block_2step.json", FormulationKind::block);
    RestorationPlan p = s.plan;
    REQUIRE(p.steps.size() == 2);
    p.steps[1] = p.steps[0];
    for (auto& [id, v] : p.steps[1].load_energized) v = 0;
    for (auto& v : p.steps[1].block_energized) v = 0;
    for (auto& [id, v] : p.steps[1].switch_closed) v = 0;
    for (auto& [id, v] : p.steps[1].grid_forming) v = 0;
    p.steps[1].dg_output_kw.clear();
    p.steps[1].load_served_kw.clear();
    p.steps[1].line_flow_kw.clear();
    CHECK(has_rule(check_plan(s.model, s.partition, p), "monotone"));
  }
  SUBCASE("battery energy recursion is checked exactly") {
    Solved s = solve_fixture("two_block_battery.json", FormulationKind::block);
    REQUIRE(check_plan(s.model, s.partition, s.plan).ok());
    RestorationPlan p = s.plan;
    for (auto& [id, v] : p.steps[1].battery_energy_kwh) v += 2.0;
    CHECK(has_rule(check_plan(s.model, s.partition, p), "storage"));

    RestorationPlan q = s.plan;
    for (auto& [id, v] : q.steps[0].battery_rate_kw) v = 1e6;
    CHECK(has_rule(check_plan(s.model, s.partition, q), "storage"));
  }
}

TEST_CASE("partial blocks are counted only under per-load shedding") {
  // 15 kW source, two 10 kW loads in one far block: per-load shedding keeps
  // one of them, so the block is split
  Solved s = solve_fixture("tri_block_cap15.json", FormulationKind::traditional);
  ValidationReport r = check_plan(s.model, s.partition, s.plan);
  CHECK(r.ok());
  CHECK(r.partial_block_total >= 0);

  Solved b = solve_fixture("tri_block_cap15.json", FormulationKind::block);
  ValidationReport rb = check_plan(b.model, b.partition, b.plan);
  CHECK(rb.ok());
  CHECK(rb.partial_block_total == 0);
}

TEST_CASE("delivered energy integrates served power over the horizon") {
  Solved s = solve_fixture("tri_block.json", FormulationKind::block_gfm);
  // one 10 kW load over one hour
  CHECK(delivered_energy_mwh(s.model, s.plan) == doctest::Approx(0.01).epsilon(1e-4));
  RestorationPlan empty;
  CHECK(delivered_energy_mwh(s.model, empty) == 0.0);
}

TEST_CASE("the exhaustive reference optimum agrees with the solver") {
  for (const char* name : {"tri_block.json", "gfm_mix.json"}) {
    for (FormulationKind k : {FormulationKind::traditional, FormulationKind::block,
                              FormulationKind::block_gfm}) {
      CAPTURE(name);
      CAPTURE(to_string(k));
      Solved s = solve_fixture(name, k);
      OracleResult o = brute_force_optimum(s.model, s.partition, k);
      REQUIRE(o.found);
      CHECK(o.configs_enumerated > 0);
      CHECK(std::abs(o.objective_kwh - s.plan.objective_kwh) <=
            1e-5 * (1.0 + std::abs(o.objective_kwh)));
    }
  }
}

TEST_CASE("the reference optimum refuses oversized instances") {
  FeederModel m = load("ieee13_analogue.json");
  BlockPartition p = compute_load_blocks(m);
  CHECK_THROWS_AS(brute_force_optimum(m, p, FormulationKind::traditional),
                  ModelError);
}
