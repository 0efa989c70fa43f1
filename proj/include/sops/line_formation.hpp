#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sops/system.hpp"

namespace sops {

enum class LFRole : uint8_t { Idle, Follower, Root, Retired };

std::string lf_role_name(LFRole r);

/// Per-particle line-formation record: the role plus the shared-memory
/// flags. parent names the node the parent flag points at; linedir marks the
/// line-extension edges of a retired particle (two opposite ones for the
/// leader, one for everybody else).
struct LFFlags {
  LFRole role = LFRole::Idle;
  std::optional<Node> parent;
  std::vector<Dir> linedir;
};

class LineFormation {
 public:
  /// Marks the given particle as the retired leader with linedir on its
  /// local ports 0 and 3. All other particles start idle.
  LineFormation(SystemState& state, ParticleId leader);

  const LFFlags& flags(ParticleId p) const { return flags_[p]; }
  ParticleId leader() const { return leader_; }

  /// One activation of particle p: executes the spanning-forest state table.
  void act(ParticleId p);

  /// Contracted root p retires when a retired neighbor's linedir flag points
  /// at it, continuing the line on the opposite edge. Returns true if p
  /// retired.
  bool check_retire(ParticleId p);

  /// Direction a contracted root moves in: past all edges to retired
  /// particles in clockwise order, onto the first free one. The root thereby
  /// orbits the retired structure clockwise.
  Dir line_dir(ParticleId p) const;

  bool all_retired() const;

  /// Directed graph over the nodes of active (follower/root) particles:
  /// tail->head for expanded particles, head->parent for followers. Must be
  /// a forest at every configuration.
  struct ForestView {
    std::vector<std::pair<Node, Node>> edges;
    bool is_forest = false;
  };
  ForestView forest_view() const;
  /// Every follower's parent flag must point at a node occupied by a
  /// non-idle particle; every idle component must touch a non-idle particle.
  bool flags_consistent() const;

 private:
  bool adjacent_role(ParticleId p, LFRole role) const;
  std::optional<ParticleId> find_child(ParticleId p) const;
  bool has_tail_child(ParticleId p) const;
  bool has_idle_neighbor(ParticleId p) const;
  bool node_has_role(Node v, LFRole role) const;
  void emit_role(ParticleId p);

  SystemState& state_;
  std::vector<LFFlags> flags_;
  ParticleId leader_;
};

struct LineResult {
  uint64_t work = 0;
  uint64_t rounds = 0;
  uint64_t max_particle_moves = 0;
};

/// Runs the spanning-forest line formation to completion under the random
/// sequential scheduler. check_connectivity asserts connectivity after every
/// action (slow; meant for tests).
LineResult run_line_formation(SystemState& state, ParticleId leader,
                              uint64_t round_cap = 0, bool check_connectivity = false);

/// True iff all particles are retired, contracted and collinear along the
/// leader's line axis with no gaps.
bool validate_line(const SystemState& state, const LineFormation& lf);

}  // namespace sops
