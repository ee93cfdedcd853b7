#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <limits>

#include "doctest.h"
#include "dsr/milp.hpp"

using namespace dsr;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

MilpModel tiny() {
  MilpModel m;
  VarId x = m.add_variable({"x", VarKind::continuous, 0.0, 4.0});
  VarId y = m.add_variable({"y", VarKind::binary, 0.0, 1.0});
  m.add_constraint({"c1", {{1.0, x}, {2.0, y}}, Sense::le, 5.0});
  m.add_objective_term(1.0, x);
  m.add_objective_term(3.0, y);
  return m;
}

}  // namespace

TEST_CASE("variable bookkeeping and name safety") {
  MilpModel m;
  CHECK_THROWS_AS(m.add_variable({"2bad", VarKind::continuous, 0, 1}), ModelError);
  CHECK_THROWS_AS(m.add_variable({"a-b", VarKind::continuous, 0, 1}), ModelError);
  CHECK_THROWS_AS(m.add_variable({"", VarKind::continuous, 0, 1}), ModelError);
  VarId x = m.add_variable({"x", VarKind::continuous, 0, 1});
  CHECK_THROWS_AS(m.add_variable({"x", VarKind::continuous, 0, 1}), ModelError);
  CHECK_THROWS_AS(m.add_variable({"y", VarKind::continuous, 2, 1}), ModelError);
  m.add_variable({"b", VarKind::binary, 0, 1});
  CHECK(m.n_variables() == 2);
  CHECK(m.n_binary() == 1);
  CHECK(m.n_continuous() == 1);
  CHECK(m.find_variable("x") == x);
  CHECK(m.find_variable("zzz") == -1);
  m.fix_variable(x, 0.5);
  CHECK(m.variable(x).lower == 0.5);
  CHECK(m.variable(x).upper == 0.5);
}

TEST_CASE("binary declarations are clamped to the unit interval") {
  MilpModel m;
  VarId b = m.add_variable({"b", VarKind::binary, -3.0, 7.0});
  CHECK(m.variable(b).lower == 0.0);
  CHECK(m.variable(b).upper == 1.0);
}

TEST_CASE("constraints merge duplicate terms and reject bad references") {
  MilpModel m;
  VarId x = m.add_variable({"x", VarKind::continuous, 0, 1});
  m.add_constraint({"c", {{1.0, x}, {2.5, x}, {-0.5, x}}, Sense::eq, 3.0});
  const LinearConstraint* c = m.find_constraint("c");
  REQUIRE(c != nullptr);
  REQUIRE(c->terms.size() == 1);
  CHECK(c->terms[0].coef == doctest::Approx(3.0));
  CHECK_THROWS_AS(m.add_constraint({"bad", {{1.0, 99}}, Sense::le, 0}), ModelError);
  CHECK_THROWS_AS(
      m.add_constraint({"nan", {{std::nan(""), x}}, Sense::le, 0}), ModelError);
  CHECK(m.find_constraint("nope") == nullptr);
}

TEST_CASE("LP text covers objective, senses, bounds and binary section") {
  MilpModel m = tiny();
  m.add_variable({"f", VarKind::continuous, -kInf, kInf});
  m.add_variable({"lo", VarKind::continuous, 2.0, kInf});
  m.add_variable({"hi", VarKind::continuous, -kInf, 3.0});
  m.add_variable({"pin", VarKind::continuous, 1.5, 1.5});
  m.add_constraint({"c2", {{-1.0, 0}}, Sense::ge, -2.0});
  m.add_constraint({"c3", {{1.0, 0}}, Sense::eq, 1.0});
  std::string lp = write_lp(m);
  CHECK(lp.find("Maximize") != std::string::npos);
  CHECK(lp.find("obj: 1 x + 3 y") != std::string::npos);
  CHECK(lp.find("c1: 1 x + 2 y <= 5") != std::string::npos);
  CHECK(lp.find("c2: -1 x >= -2") != std::string::npos);
  CHECK(lp.find("c3: 1 x = 1") != std::string::npos);
  CHECK(lp.find("Bounds") != std::string::npos);
  CHECK(lp.find(" 0 <= x <= 4") != std::string::npos);
  CHECK(lp.find(" f free") != std::string::npos);
  CHECK(lp.find(" lo >= 2") != std::string::npos);
  CHECK(lp.find(" hi <= 3") != std::string::npos);
  CHECK(lp.find(" pin = 1.5") != std::string::npos);
  CHECK(lp.find("Binary\n y\n") != std::string::npos);
  CHECK(lp.find("End") != std::string::npos);
  // binaries never appear in the bounds section
  CHECK(lp.find("<= y") == std::string::npos);

  MilpModel empty;
  CHECK_THROWS_AS(write_lp(empty), ModelError);
}

TEST_CASE("LP output is deterministic") {
  CHECK(write_lp(tiny()) == write_lp(tiny()));
}

TEST_CASE("native solution format round trip") {
  MilpModel m = tiny();
  Assignment a = read_solution(
      "status optimal\nobjective 7\ngap 0.001\nx 4\ny 1\n", m);
  CHECK(a.status == SolverStatus::optimal);
  CHECK(a.gap == doctest::Approx(0.001));
  CHECK(a.value(0) == doctest::Approx(4.0));
  CHECK(a.value(1) == doctest::Approx(1.0));
  // objective is recomputed from the model, never trusted from the file
  CHECK(a.objective_value == doctest::Approx(7.0));

  Assignment miss = read_solution("status feasible\nx 2\n", m);
  CHECK(miss.status == SolverStatus::feasible);
  CHECK(miss.value(1) == 0.0);  // absent names default to zero
  CHECK(miss.objective_value == doctest::Approx(2.0));
}

TEST_CASE("infeasible and timeout statuses") {
  MilpModel m = tiny();
  Assignment inf = read_solution("status infeasible\n", m);
  CHECK(inf.status == SolverStatus::infeasible);
  CHECK(!inf.feasible());
  CHECK(inf.objective_value == 0.0);

  Assignment to = read_solution("status timeout\n", m);
  CHECK(to.status == SolverStatus::timeout);
}

TEST_CASE("SCIP style solution files are accepted") {
  MilpModel m = tiny();
  Assignment a = read_solution(
      "solution status: optimal\n"
      "objective value: 7\n"
      "x 4 \t(obj:1)\n"
      "y 1 \t(obj:3)\n",
      m);
  CHECK(a.status == SolverStatus::optimal);
  CHECK(a.objective_value == doctest::Approx(7.0));

  Assignment inf = read_solution("solution status: infeasible\n", m);
  CHECK(inf.status == SolverStatus::infeasible);
}

TEST_CASE("CBC style solution files are accepted") {
  MilpModel m = tiny();
  Assignment a = read_solution(
      "Optimal - objective value 7.00000000\n"
      "0 x 4 1\n"
      "1 y 1 3\n",
      m);
  CHECK(a.status == SolverStatus::optimal);
  CHECK(a.value(0) == doctest::Approx(4.0));
  CHECK(a.objective_value == doctest::Approx(7.0));

  Assignment inf = read_solution("Infeasible - objective value 0\n", m);
  CHECK(inf.status == SolverStatus::infeasible);
}

TEST_CASE("malformed solutions are rejected") {
  MilpModel m = tiny();
  CHECK_THROWS_AS(read_solution("status sideways\n", m), ModelError);
  CHECK_THROWS_AS(read_solution("ghost 1\n", m), ModelError);
  CHECK_THROWS_AS(read_solution("x notanumber\n", m), ModelError);
  CHECK_THROWS_AS(read_solution("", m), ModelError);
  CHECK_THROWS_AS(read_solution("Unbounded - objective value 0\n", m), ModelError);
}
