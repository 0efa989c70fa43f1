#include "sops/boundary.hpp"

#include <algorithm>
#include <queue>

namespace sops {

namespace {

// Maximal runs of consecutive empty directions around node v, as
// (start_dir, length) pairs. A fully isolated node yields one run starting
// at direction 0 by convention.
std::vector<std::pair<Dir, int>> empty_runs(const SystemState& state, Node v) {
  bool occ[6];
  int occupied_count = 0;
  for (Dir d = 0; d < 6; ++d) {
    occ[d] = state.occupied(neighbor(v, d));
    occupied_count += occ[d] ? 1 : 0;
  }
  std::vector<std::pair<Dir, int>> runs;
  if (occupied_count == 0) {
    runs.push_back({0, 6});
    return runs;
  }
  if (occupied_count == 6) return runs;
  for (Dir d = 0; d < 6; ++d) {
    if (!occ[d] && occ[rotate_cw(d, -1)]) {
      int len = 0;
      for (Dir e = d; !occ[e] && len < 6; e = rotate_cw(e, 1)) ++len;
      runs.push_back({d, len});
    }
  }
  return runs;
}

}  // namespace

std::vector<Agent> local_agents(const SystemState& state, ParticleId p) {
  const Particle& part = state.particle(p);
  if (part.expanded()) throw shape_error("local_agents: particle must be contracted");
  auto runs = empty_runs(state, part.head);
  // local ids follow the clockwise order of the run starts as seen through
  // the particle's own port labels
  std::sort(runs.begin(), runs.end(), [&](auto a, auto b) {
    return part.dir_to_port(a.first) < part.dir_to_port(b.first);
  });
  std::vector<Agent> agents;
  int next_id = 1;
  for (auto [start, len] : runs) {
    Agent a;
    a.pid = p;
    a.local_id = next_id++;
    a.node = part.head;
    a.empty_start = start;
    a.run_len = len;
    agents.push_back(a);
  }
  return agents;
}

int AgentGraph::agent_with_dir(ParticleId pid, Dir d) const {
  for (int idx : particle_agents[pid]) {
    const Agent& a = agents[idx];
    for (int k = 0; k < a.run_len; ++k)
      if (rotate_cw(a.empty_start, k) == d) return idx;
  }
  return -1;
}

AgentGraph build_agent_graph(const SystemState& state) {
  AgentGraph g;
  g.particle_agents.resize(state.particle_count());
  for (ParticleId p = 0; p < static_cast<ParticleId>(state.particle_count()); ++p) {
    for (Agent& a : local_agents(state, p)) {
      g.particle_agents[p].push_back(static_cast<int>(g.agents.size()));
      g.agents.push_back(a);
    }
  }
  for (size_t i = 0; i < g.agents.size(); ++i) {
    Agent& a = g.agents[i];
    if (a.run_len == 6) {  // isolated particle: cycle of length one
      a.succ = a.pred = static_cast<int>(i);
      a.succ_dir = a.pred_dir = 0;
      continue;
    }
    // successor: first occupied direction scanning clockwise from the run
    Dir d = a.empty_start;
    while (!state.occupied(neighbor(a.node, d))) d = rotate_cw(d, 1);
    ParticleId q = state.occupant(neighbor(a.node, d))->pid;
    a.succ_dir = d;
    a.succ = g.agent_with_dir(q, rotate_cw(d, 4));
    // predecessor: first occupied direction scanning counter-clockwise
    Dir e = rotate_cw(a.empty_start, a.run_len - 1);
    while (!state.occupied(neighbor(a.node, e))) e = rotate_cw(e, -1);
    ParticleId w = state.occupant(neighbor(a.node, e))->pid;
    a.pred_dir = e;
    a.pred = g.agent_with_dir(w, rotate_cw(e, 2));
  }
  for (size_t i = 0; i < g.agents.size(); ++i) {
    SOPS_REQUIRE(g.agents[i].succ >= 0 && g.agents[i].pred >= 0,
                 "agent link resolution failed");
    SOPS_REQUIRE(g.agents[g.agents[i].succ].pred == static_cast<int>(i),
                 "predecessor(successor(a)) != a");
  }
  return g;
}

std::pair<ParticleId, int> successor(const SystemState& state, ParticleId p, int local_id) {
  AgentGraph g = build_agent_graph(state);
  const Agent& s = g.agents[g.agents[g.agent_at(p, local_id)].succ];
  return {s.pid, s.local_id};
}

std::pair<ParticleId, int> predecessor(const SystemState& state, ParticleId p, int local_id) {
  AgentGraph g = build_agent_graph(state);
  const Agent& s = g.agents[g.agents[g.agent_at(p, local_id)].pred];
  return {s.pid, s.local_id};
}

BoundaryOracle enumerate_boundaries(const SystemState& state) {
  if (state.particle_count() == 0) throw parameter_error("empty system");
  BoundaryOracle oracle;
  oracle.graph = build_agent_graph(state);
  AgentGraph& g = oracle.graph;

  // Flood-fill empty regions inside a padded bounding box. The region
  // reachable from the box corner is the infinite one; every other empty
  // component inside the box is a hole.
  int qmin = 1 << 30, qmax = -(1 << 30), rmin = 1 << 30, rmax = -(1 << 30);
  for (const auto& [node, occ] : state.occupancy()) {
    qmin = std::min(qmin, node.q);
    qmax = std::max(qmax, node.q);
    rmin = std::min(rmin, node.r);
    rmax = std::max(rmax, node.r);
  }
  qmin -= 2; qmax += 2; rmin -= 2; rmax += 2;
  auto in_box = [&](Node v) {
    return v.q >= qmin && v.q <= qmax && v.r >= rmin && v.r <= rmax;
  };
  std::unordered_map<Node, int, NodeHash> region;
  int region_count = 0;
  auto flood = [&](Node start, int id) {
    std::queue<Node> bfs;
    bfs.push(start);
    region[start] = id;
    while (!bfs.empty()) {
      Node v = bfs.front();
      bfs.pop();
      for (Dir d = 0; d < 6; ++d) {
        Node u = neighbor(v, d);
        if (in_box(u) && !state.occupied(u) && !region.count(u)) {
          region[u] = id;
          bfs.push(u);
        }
      }
    }
  };
  flood({qmin, rmin}, region_count++);  // the infinite region is id 0
  for (int q = qmin; q <= qmax; ++q)
    for (int r = rmin; r <= rmax; ++r) {
      Node v{q, r};
      if (!state.occupied(v) && !region.count(v)) flood(v, region_count++);
    }

  // Assemble cycles by following the local successor rule; cross-check each
  // cycle against the flood-fill region of its agents' empty runs.
  std::vector<int> agent_region(g.agents.size());
  for (size_t i = 0; i < g.agents.size(); ++i)
    agent_region[i] = region.at(neighbor(g.agents[i].node, g.agents[i].empty_start));

  std::vector<int> seen(g.agents.size(), 0);
  std::vector<std::vector<int>> cycles;
  for (size_t i = 0; i < g.agents.size(); ++i) {
    if (seen[i]) continue;
    std::vector<int> cyc;
    int cur = static_cast<int>(i);
    do {
      SOPS_REQUIRE(!seen[cur], "successor structure is not a disjoint cycle cover");
      seen[cur] = 1;
      cyc.push_back(cur);
      SOPS_REQUIRE(agent_region[cur] == agent_region[i],
                   "cycle crosses empty regions");
      cur = g.agents[cur].succ;
    } while (cur != static_cast<int>(i));
    cycles.push_back(std::move(cyc));
  }
  SOPS_REQUIRE(cycles.size() == static_cast<size_t>(region_count),
               "cycle count != empty region count");

  // Canonical order: outer cycle first, then by smallest member node; each
  // cycle starts at its lexicographically smallest (node, empty_start).
  auto cycle_key = [&](const std::vector<int>& cyc) {
    auto key = std::tuple{g.agents[cyc[0]].node.q, g.agents[cyc[0]].node.r,
                          g.agents[cyc[0]].empty_start};
    for (int idx : cyc)
      key = std::min(key, std::tuple{g.agents[idx].node.q, g.agents[idx].node.r,
                                     g.agents[idx].empty_start});
    return key;
  };
  for (auto& cyc : cycles) {
    size_t best = 0;
    for (size_t k = 1; k < cyc.size(); ++k) {
      auto kt = std::tuple{g.agents[cyc[k]].node.q, g.agents[cyc[k]].node.r,
                           g.agents[cyc[k]].empty_start};
      auto bt = std::tuple{g.agents[cyc[best]].node.q, g.agents[cyc[best]].node.r,
                           g.agents[cyc[best]].empty_start};
      if (kt < bt) best = k;
    }
    std::rotate(cyc.begin(), cyc.begin() + best, cyc.end());
  }
  std::sort(cycles.begin(), cycles.end(), [&](const auto& a, const auto& b) {
    bool ao = agent_region[a[0]] == 0, bo = agent_region[b[0]] == 0;
    if (ao != bo) return ao;
    return cycle_key(a) < cycle_key(b);
  });

  oracle.cycles = std::move(cycles);
  for (size_t c = 0; c < oracle.cycles.size(); ++c) {
    const auto& cyc = oracle.cycles[c];
    if (agent_region[cyc[0]] == 0) oracle.outer_index = static_cast<int>(c);
    oracle.lengths.push_back(static_cast<int>(cyc.size()));
    oracle.l_max = std::max(oracle.l_max, static_cast<int>(cyc.size()));
    for (size_t k = 0; k < cyc.size(); ++k) {
      g.agents[cyc[k]].cycle = static_cast<int>(c);
      g.agents[cyc[k]].pos = static_cast<int>(k);
    }
    int sum = 0;
    if (cyc.size() > 1) {
      for (int idx : cyc) {
        const Agent& a = g.agents[idx];
        sum += exterior_turn(opposite(a.pred_dir), a.succ_dir);
      }
    }
    oracle.turn_sums.push_back(sum);
  }
  SOPS_REQUIRE(oracle.outer_index == 0, "outer boundary must sort first");
  return oracle;
}

}  // namespace sops
