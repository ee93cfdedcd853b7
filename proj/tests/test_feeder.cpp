#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dsr/feeder.hpp"

using namespace dsr;

namespace {

std::string fixture(const std::string& name) {
  std::ifstream is(std::string(DSR_FIXTURE_DIR) + "/" + name);
  REQUIRE(is.good());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("phase sets order and index phases canonically") {
  PhaseSet s = PhaseSet::from_string("ca");
  CHECK(s.size() == 2);
  CHECK(s.to_string() == "ac");
  CHECK(s.index_of(Phase::a) == 0);
  CHECK(s.index_of(Phase::c) == 1);
  CHECK(s.index_of(Phase::b) == -1);
  CHECK(s.subset_of(PhaseSet::from_string("abc")));
  CHECK(!PhaseSet::from_string("abc").subset_of(s));
  CHECK_THROWS_AS(PhaseSet::from_string("xyz"), ParseError);
}

TEST_CASE("tri_block parses with the documented shape") {
  FeederModel m = parse_feeder(fixture("tri_block.json"));
  CHECK(m.buses.size() == 3);
  CHECK(m.lines.size() == 2);
  CHECK(m.loads.size() == 2);
  CHECK(m.dgs.size() == 1);
  CHECK(m.n_switches() == 2);
  CHECK(m.dgs[0].grid_forming_capable);
  CHECK(validate_feeder(m).empty());

  // demand lookup: load at B, phase a, step 0
  Complex d = demand_at(m, "loadB", Phase::a, 0);
  CHECK(d.real() == doctest::Approx(10.0));
  CHECK(d.imag() == doctest::Approx(0.0));
  CHECK_THROWS_AS(demand_at(m, "loadB", Phase::b, 0), std::out_of_range);
  CHECK_THROWS_AS(demand_at(m, "loadB", Phase::a, 5), std::out_of_range);
}

TEST_CASE("serialization round-trips losslessly") {
  for (const char* name :
       {"tri_block.json", "three_phase.json", "two_block_battery.json",
        "ieee13_analogue.json"}) {
    CAPTURE(name);
    FeederModel a = parse_feeder(fixture(name));
    FeederModel b = parse_feeder(serialize_feeder(a));
    CHECK(serialize_feeder(a) == serialize_feeder(b));
    CHECK(a.buses.size() == b.buses.size());
    CHECK(a.lines.size() == b.lines.size());
    CHECK(a.loads.size() == b.loads.size());
    CHECK(a.dgs.size() == b.dgs.size());
    CHECK(a.batteries.size() == b.batteries.size());
  }
}

TEST_CASE("parser reports syntax errors, dangling refs and duplicates") {
  CHECK_THROWS_WITH_AS(parse_feeder("{oops"),
                       doctest::Contains("syntax error"), ParseError);

  std::string dangling = R"({
    "base_kva": 1000, "base_kv": 4.16,
    "horizon": {"n_steps": 1, "dt_hours": 1},
    "buses": [{"id": "A", "phases": "a"}],
    "loads": [{"id": "l", "bus": "NOPE", "phases": "a", "demand": [[1,0]]}]
  })";
  CHECK_THROWS_WITH_AS(parse_feeder(dangling), doctest::Contains("NOPE"),
                       ParseError);

  std::string dup = R"({
    "base_kva": 1000, "base_kv": 4.16,
    "horizon": {"n_steps": 1, "dt_hours": 1},
    "buses": [{"id": "A", "phases": "a"}, {"id": "A", "phases": "a"}]
  })";
  CHECK_THROWS_WITH_AS(parse_feeder(dup), doctest::Contains("duplicate"),
                       ParseError);

  std::string bad_z = R"({
    "base_kva": 1000, "base_kv": 4.16,
    "horizon": {"n_steps": 1, "dt_hours": 1},
    "buses": [{"id": "A", "phases": "ab"}, {"id": "B", "phases": "ab"}],
    "lines": [{"id": "L", "from": "A", "to": "B", "phases": "ab",
               "impedance": [[[0.1, 0.1]]], "thermal_limit": 1}]
  })";
  CHECK_THROWS_WITH_AS(parse_feeder(bad_z), doctest::Contains("impedance"),
                       ParseError);
}

TEST_CASE("feeder validation flags type invariant violations") {
  FeederModel m = parse_feeder(fixture("tri_block.json"));
  auto has = [](const std::vector<Violation>& vs, const std::string& id) {
    for (const auto& v : vs)
      if (v.object_id == id) return true;
    return false;
  };

  SUBCASE("inverted voltage band") {
    m.buses[0].vmin = 1.2;
    CHECK(has(validate_feeder(m), "A"));
  }
  SUBCASE("negative demand") {
    m.loads[0].demand[0][0] = Complex(-1, 0);
    CHECK(has(validate_feeder(m), "loadB"));
  }
  SUBCASE("demand profile length mismatch") {
    m.loads[0].demand[0] = {Complex(1, 0), Complex(2, 0), Complex(3, 0)};
    CHECK(has(validate_feeder(m), "loadB"));
  }
  SUBCASE("smin above smax") {
    m.dgs[0].smin[0] = Complex(30, 0);
    CHECK(has(validate_feeder(m), "dgA"));
  }
  SUBCASE("battery spec without matching battery-kind dg") {
    m.batteries.push_back({"dgA", 10, 5, 0, 5, {{1.0, 0.0}}});
    m.link();
    CHECK(has(validate_feeder(m), "dgA"));
  }
  SUBCASE("nonpositive thermal limit") {
    m.lines[0].thermal_limit[0] = 0.0;
    CHECK(has(validate_feeder(m), "S1"));
  }
}

TEST_CASE("broadcast and per-step demand profiles") {
  std::string text = R"({
    "base_kva": 1000, "base_kv": 4.16,
    "horizon": {"n_steps": 3, "dt_hours": 0.5},
    "buses": [{"id": "A", "phases": "a"}],
    "loads": [{"id": "flat", "bus": "A", "phases": "a", "demand": [[5, 1]]},
              {"id": "series", "bus": "A", "phases": "a",
               "demand": [[[1, 0], [2, 0], [3, 0]]]}]
  })";
  FeederModel m = parse_feeder(text);
  CHECK(demand_at(m, "flat", Phase::a, 2) == Complex(5, 1));
  CHECK(demand_at(m, "series", Phase::a, 0) == Complex(1, 0));
  CHECK(demand_at(m, "series", Phase::a, 2) == Complex(3, 0));
}
