#pragma once

#include <vector>

#include "sops/system.hpp"

namespace sops {

/// A particle's per-boundary identity. A particle treats each maximal run of
/// consecutive empty neighbor directions in its local view as a distinct
/// empty region and hosts one agent per run (at most three).
struct Agent {
  ParticleId pid = -1;
  int local_id = 0;      // unique within the particle, in {1,2,3}
  Node node;             // the particle's node (agents exist on contracted particles)
  Dir empty_start = 0;   // clockwise-first empty direction of the run
  int run_len = 0;       // number of empty directions in the run
  // links filled in by build_agent_graph; succ == self index for a single
  // isolated particle
  int succ = -1;
  int pred = -1;
  Dir succ_dir = 0;  // direction of travel from this node to the successor's
  Dir pred_dir = 0;
  int cycle = -1;  // assigned by enumerate_boundaries
  int pos = -1;    // position within the cycle
};

/// Agents of particle p, ordered by local port label of their run start
/// (this order assigns local ids 1..3). Interior particles yield no agents.
std::vector<Agent> local_agents(const SystemState& state, ParticleId p);

struct AgentGraph {
  std::vector<Agent> agents;
  std::vector<std::vector<int>> particle_agents;  // pid -> agent indices

  int agent_at(ParticleId pid, int local_id) const {
    return particle_agents[pid][local_id - 1];
  }
  /// Agent of pid whose empty run contains global direction d, or -1.
  int agent_with_dir(ParticleId pid, Dir d) const;
};

/// Builds all agents and links successors/predecessors using only the local
/// clockwise / counter-clockwise scan rules.
AgentGraph build_agent_graph(const SystemState& state);

/// Successor of agent (p, local_id) under the local rule: first occupied node
/// in clockwise order starting from the agent's empty region.
std::pair<ParticleId, int> successor(const SystemState& state, ParticleId p, int local_id);
std::pair<ParticleId, int> predecessor(const SystemState& state, ParticleId p, int local_id);

/// Global view of all boundaries, for tests and metrics. Cycles are listed
/// outer boundary first; agents appear in cycle (successor) order.
struct BoundaryOracle {
  AgentGraph graph;
  std::vector<std::vector<int>> cycles;
  int outer_index = -1;
  std::vector<int> lengths;
  int l_max = 0;
  std::vector<int> turn_sums;  // +6 for the outer cycle, -6 for inner ones
};

/// Flood-fills empty regions inside a margin-padded bounding box to classify
/// the infinite region, then assembles cycles by iterating the local
/// successor rule. Requires a connected state of contracted particles.
BoundaryOracle enumerate_boundaries(const SystemState& state);

}  // namespace sops
