#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "dsr/feeder.hpp"

namespace dsr {

/// A load block: maximal set of buses connected when every switch is open.
struct LoadBlock {
  int id = 0;
  std::vector<std::string> buses;  // sorted
  std::vector<std::string> loads;
  std::vector<std::string> dgs;
  bool has_gfm_capable = false;
};

struct BlockPartition {
  std::vector<LoadBlock> blocks;
  std::unordered_map<std::string, int> block_of_bus;

  int block_of(const std::string& bus_id) const { return block_of_bus.at(bus_id); }
  int size() const { return static_cast<int>(blocks.size()); }
};

struct SwitchEdge {
  int from_block = 0;
  int to_block = 0;
  /// Both endpoints in one block (possible in meshed feeders). Such switches
  /// take part in radiality but not in block energization coupling.
  bool degenerate = false;
};

struct BlockGraph {
  BlockPartition partition;
  /// switch line id -> endpoint blocks; std::map keeps output deterministic.
  std::map<std::string, SwitchEdge> switch_edges;
  /// All ordered block pairs (zeta, zeta-hat), zeta != zeta-hat.
  std::vector<std::pair<int, int>> virtual_edges;

  std::vector<std::string> switches_of_block(int block) const;
};

/// Connected components of the graph over non-switch lines. Blocks are
/// numbered by lexicographic smallest contained bus id.
BlockPartition compute_load_blocks(const FeederModel& model);

BlockGraph build_block_graph(const BlockPartition& partition,
                             const FeederModel& model);

struct IslandReport {
  std::vector<std::vector<int>> islands;  // block ids per island
  std::vector<int> island_of_block;
  std::vector<int> island_gfm_count;  // active grid-formers per island
  std::vector<bool> block_energized;  // island has exactly one active former
};

/// Graph-semantic energization: islands are components of the block graph
/// under closed switches; a block counts as energized iff its island holds
/// exactly one active grid-former. Islands with 0 or >=2 formers are
/// reported, not rejected.
IslandReport energized_islands(const BlockGraph& graph,
                               const FeederModel& model,
                               const std::map<std::string, int>& switch_states,
                               const std::map<std::string, int>& gfm_active);

}  // namespace dsr
