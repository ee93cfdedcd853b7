#include "dsr/blocks.hpp"

#include <algorithm>
#include <queue>

namespace dsr {

std::vector<std::string> BlockGraph::switches_of_block(int block) const {
  std::vector<std::string> out;
  for (const auto& [id, edge] : switch_edges)
    if (edge.from_block == block || edge.to_block == block) out.push_back(id);
  return out;
}

BlockPartition compute_load_blocks(const FeederModel& model) {
  const int n = static_cast<int>(model.buses.size());

  // BFS over non-switch lines.
  std::vector<std::vector<int>> adj(n);
  for (const auto& l : model.lines) {
    if (l.is_switch()) continue;
    int u = model.bus_index.at(l.from_bus);
    int v = model.bus_index.at(l.to_bus);
    adj[u].push_back(v);
    adj[v].push_back(u);
  }

  std::vector<int> comp(n, -1);
  int n_comp = 0;
  for (int s = 0; s < n; ++s) {
    if (comp[s] >= 0) continue;
    comp[s] = n_comp;
    std::queue<int> q;
    q.push(s);
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      for (int v : adj[u]) {
        if (comp[v] < 0) {
          comp[v] = n_comp;
          q.push(v);
        }
      }
    }
    ++n_comp;
  }

  // Deterministic numbering: sort components by their smallest bus id.
  std::vector<std::string> min_bus(n_comp);
  for (int i = 0; i < n; ++i) {
    const std::string& id = model.buses[i].id;
    if (min_bus[comp[i]].empty() || id < min_bus[comp[i]]) min_bus[comp[i]] = id;
  }
  std::vector<int> order(n_comp);
  for (int c = 0; c < n_comp; ++c) order[c] = c;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return min_bus[a] < min_bus[b]; });
  std::vector<int> renum(n_comp);
  for (int rank = 0; rank < n_comp; ++rank) renum[order[rank]] = rank;

  BlockPartition part;
  part.blocks.resize(n_comp);
  for (int z = 0; z < n_comp; ++z) part.blocks[z].id = z;
  for (int i = 0; i < n; ++i) {
    int z = renum[comp[i]];
    part.blocks[z].buses.push_back(model.buses[i].id);
    part.block_of_bus[model.buses[i].id] = z;
  }
  for (auto& b : part.blocks) std::sort(b.buses.begin(), b.buses.end());

  for (const auto& d : model.loads)
    part.blocks[part.block_of_bus.at(d.bus)].loads.push_back(d.id);
  for (const auto& g : model.dgs) {
    LoadBlock& b = part.blocks[part.block_of_bus.at(g.bus)];
    b.dgs.push_back(g.id);
    if (g.grid_forming_capable) b.has_gfm_capable = true;
  }
  return part;
}

BlockGraph build_block_graph(const BlockPartition& partition,
                             const FeederModel& model) {
  BlockGraph g;
  g.partition = partition;
  for (const auto& l : model.lines) {
    if (!l.is_switch()) continue;
    SwitchEdge e;
    e.from_block = partition.block_of(l.from_bus);
    e.to_block = partition.block_of(l.to_bus);
    e.degenerate = (e.from_block == e.to_block);
    g.switch_edges.emplace(l.id, e);
  }
  const int nz = partition.size();
  if (!g.switch_edges.empty()) {
    for (int a = 0; a < nz; ++a)
      for (int b = 0; b < nz; ++b)
        if (a != b) g.virtual_edges.emplace_back(a, b);
  }
  return g;
}

IslandReport energized_islands(const BlockGraph& graph, const FeederModel& model,
                               const std::map<std::string, int>& switch_states,
                               const std::map<std::string, int>& gfm_active) {
  const int nz = graph.partition.size();
  std::vector<std::vector<int>> adj(nz);
  for (const auto& [id, edge] : graph.switch_edges) {
    auto it = switch_states.find(id);
    bool closed = it != switch_states.end() && it->second != 0;
    if (closed && !edge.degenerate) {
      adj[edge.from_block].push_back(edge.to_block);
      adj[edge.to_block].push_back(edge.from_block);
    }
  }

  IslandReport rep;
  rep.island_of_block.assign(nz, -1);
  for (int s = 0; s < nz; ++s) {
    if (rep.island_of_block[s] >= 0) continue;
    int island = static_cast<int>(rep.islands.size());
    rep.islands.emplace_back();
    std::queue<int> q;
    q.push(s);
    rep.island_of_block[s] = island;
    while (!q.empty()) {
      int u = q.front();
      q.pop();
      rep.islands[island].push_back(u);
      for (int v : adj[u]) {
        if (rep.island_of_block[v] < 0) {
          rep.island_of_block[v] = island;
          q.push(v);
        }
      }
    }
  }

  rep.island_gfm_count.assign(rep.islands.size(), 0);
  for (const auto& [dg_id, active] : gfm_active) {
    if (!active) continue;
    const DgSpec& g = model.dg(dg_id);
    int z = graph.partition.block_of(g.bus);
    ++rep.island_gfm_count[rep.island_of_block[z]];
  }

  rep.block_energized.assign(nz, false);
  for (int z = 0; z < nz; ++z)
    rep.block_energized[z] = rep.island_gfm_count[rep.island_of_block[z]] == 1;

  return rep;
}

}  // namespace dsr
