#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "doctest.h"
#include "dsr/blocks.hpp"

using namespace dsr;

namespace {

std::string slurp(const std::string& name) {
  std::ifstream is(std::string(DSR_FIXTURE_DIR) + "/" + name);
  REQUIRE(is.good());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

FeederModel load(const std::string& name) { return parse_feeder(slurp(name)); }

// Plain union-find over non-switch lines, used as an independent oracle.
struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int a) { return parent[a] == a ? a : parent[a] = find(parent[a]); }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

FeederModel random_feeder(std::mt19937& rng) {
  std::uniform_int_distribution<int> nbus(2, 30);
  FeederModel m;
  m.name = "random";
  int n = nbus(rng);
  for (int i = 0; i < n; ++i)
    m.buses.push_back({"n" + std::to_string(i), PhaseSet::from_string("a"), 0.9, 1.1});
  // random spanning tree plus a few extra edges; ~40% of lines are switches
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  int line_id = 0;
  auto add_line = [&](int a, int b) {
    LineParams l;
    l.id = "e" + std::to_string(line_id++);
    l.from_bus = m.buses[a].id;
    l.to_bus = m.buses[b].id;
    l.phases = PhaseSet::from_string("a");
    l.impedance = {Complex(0.01, 0.02)};
    l.thermal_limit = {1.0};
    if (coin(rng) < 0.4) l.switch_info = SwitchInfo{true, coin(rng) < 0.5};
    m.lines.push_back(std::move(l));
  };
  for (int i = 1; i < n; ++i) {
    std::uniform_int_distribution<int> pick(0, i - 1);
    add_line(pick(rng), i);
  }
  std::uniform_int_distribution<int> extra(0, 4);
  int k = extra(rng);
  for (int e = 0; e < k; ++e) {
    std::uniform_int_distribution<int> pick(0, n - 1);
    int a = pick(rng), b = pick(rng);
    if (a != b) add_line(a, b);
  }
  m.link();
  return m;
}

}  // namespace

TEST_CASE("a three bus feeder with two switches splits into three blocks") {
  FeederModel m = load("tri_block.json");
  BlockPartition p = compute_load_blocks(m);
  REQUIRE(p.size() == 3);
  CHECK(p.blocks[0].buses == std::vector<std::string>{"A"});
  CHECK(p.blocks[1].buses == std::vector<std::string>{"B"});
  CHECK(p.blocks[2].buses == std::vector<std::string>{"C"});
  CHECK(p.blocks[0].dgs == std::vector<std::string>{"dgA"});
  CHECK(p.blocks[0].has_gfm_capable);
  CHECK(!p.blocks[1].has_gfm_capable);
  CHECK(p.blocks[1].loads == std::vector<std::string>{"loadB"});
  CHECK(p.block_of("C") == 2);

  BlockGraph g = build_block_graph(p, m);
  REQUIRE(g.switch_edges.size() == 2);
  CHECK(g.switch_edges.at("S1").from_block == 0);
  CHECK(g.switch_edges.at("S1").to_block == 1);
  CHECK(!g.switch_edges.at("S1").degenerate);
  CHECK(g.switch_edges.at("S2").from_block == 1);
  CHECK(g.switch_edges.at("S2").to_block == 2);
  // all ordered pairs of distinct blocks
  CHECK(g.virtual_edges.size() == 6);
  CHECK(g.switches_of_block(1) == std::vector<std::string>{"S1", "S2"});
}

TEST_CASE("a feeder without switches is a single block with no virtual edges") {
  FeederModel m = load("no_switch.json");
  BlockPartition p = compute_load_blocks(m);
  CHECK(p.size() == 1);
  BlockGraph g = build_block_graph(p, m);
  CHECK(g.switch_edges.empty());
  CHECK(g.virtual_edges.empty());
}

TEST_CASE("switches internal to one block are marked degenerate") {
  FeederModel m = load("degenerate_switch.json");
  BlockPartition p = compute_load_blocks(m);
  BlockGraph g = build_block_graph(p, m);
  REQUIRE(g.switch_edges.count("SD") == 1);
  CHECK(g.switch_edges.at("SD").degenerate);
  CHECK(g.switch_edges.at("SD").from_block == g.switch_edges.at("SD").to_block);
  CHECK(!g.switch_edges.at("S1").degenerate);
}

TEST_CASE("island energization requires exactly one active former") {
  FeederModel m = load("tri_block.json");
  BlockGraph g = build_block_graph(compute_load_blocks(m), m);

  SUBCASE("both switches closed, dgA forming: everything energized") {
    IslandReport r = energized_islands(g, m, {{"S1", 1}, {"S2", 1}}, {{"dgA", 1}});
    REQUIRE(r.islands.size() == 1);
    CHECK(r.island_gfm_count[0] == 1);
    CHECK(r.block_energized == std::vector<bool>{true, true, true});
  }
  SUBCASE("all switches open: three dead islands") {
    IslandReport r = energized_islands(g, m, {{"S1", 0}, {"S2", 0}}, {});
    REQUIRE(r.islands.size() == 3);
    CHECK(r.block_energized == std::vector<bool>{false, false, false});
  }
  SUBCASE("S1 closed only: island {A,B} live, C dead") {
    IslandReport r = energized_islands(g, m, {{"S1", 1}, {"S2", 0}}, {{"dgA", 1}});
    REQUIRE(r.islands.size() == 2);
    CHECK(r.block_energized == std::vector<bool>{true, true, false});
    CHECK(r.island_of_block[0] == r.island_of_block[1]);
    CHECK(r.island_of_block[2] != r.island_of_block[0]);
  }
  SUBCASE("no active former anywhere: nothing energized") {
    IslandReport r = energized_islands(g, m, {{"S1", 1}, {"S2", 1}}, {{"dgA", 0}});
    CHECK(r.block_energized == std::vector<bool>{false, false, false});
  }
}

TEST_CASE("partition matches an independent union-find on random feeders") {
  std::mt19937 rng(20260823);
  for (int trial = 0; trial < 100; ++trial) {
    CAPTURE(trial);
    FeederModel m = random_feeder(rng);
    BlockPartition p = compute_load_blocks(m);

    UnionFind uf(static_cast<int>(m.buses.size()));
    for (const auto& l : m.lines)
      if (!l.is_switch())
        uf.unite(m.bus_index.at(l.from_bus), m.bus_index.at(l.to_bus));

    // same equivalence classes
    for (size_t i = 0; i < m.buses.size(); ++i) {
      for (size_t j = i + 1; j < m.buses.size(); ++j) {
        bool same_uf = uf.find((int)i) == uf.find((int)j);
        bool same_blk = p.block_of(m.buses[i].id) == p.block_of(m.buses[j].id);
        REQUIRE(same_uf == same_blk);
      }
    }

    // block numbering follows the smallest contained bus id, buses sorted
    for (size_t b = 0; b + 1 < p.blocks.size(); ++b) {
      REQUIRE(!p.blocks[b].buses.empty());
      CHECK(std::is_sorted(p.blocks[b].buses.begin(), p.blocks[b].buses.end()));
      CHECK(p.blocks[b].buses.front() < p.blocks[b + 1].buses.front());
    }

    // virtual edge set is every ordered pair of distinct blocks, and is
    // empty exactly when the feeder has no blocks to reconnect
    BlockGraph g = build_block_graph(p, m);
    size_t nb = p.blocks.size();
    CHECK(g.virtual_edges.size() == nb * (nb - 1));
  }
}
