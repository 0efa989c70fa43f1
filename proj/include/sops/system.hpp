#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "sops/grid.hpp"

namespace sops {

using ParticleId = int32_t;

/// A particle occupies one node (contracted) or two adjacent nodes (expanded,
/// head + tail). Port label l of a particle maps to global direction
/// (l + port_offset) mod 6; all particles share the clockwise chirality but
/// not the offset.
struct Particle {
  ParticleId id = -1;
  Node head;
  std::optional<Node> tail;  // present iff expanded
  int port_offset = 0;
  bool halted = false;

  bool expanded() const { return tail.has_value(); }
  Dir port_to_dir(int label) const { return rotate_cw(label, port_offset); }
  int dir_to_port(Dir d) const { return rotate_cw(d, -port_offset); }
};

struct Occupant {
  ParticleId pid = -1;
  bool is_head = true;
};

struct Metrics {
  uint64_t activations = 0;
  uint64_t rounds = 0;
  uint64_t work = 0;  // expansions + contractions; a handover counts 2
};

enum class TraceAction { Expand, Contract, Handover, Compute, Halt };

struct TraceEvent {
  uint64_t step = 0;
  uint64_t round = 0;
  ParticleId particle = -1;
  TraceAction action = TraceAction::Compute;
  std::vector<Node> nodes;
  std::string role;  // optional, used by line formation snapshots
};

struct TraceSink {
  virtual ~TraceSink() = default;
  virtual void on_event(const TraceEvent& ev) = 0;
};

/// Particle system state plus the sequential scheduler. A fixed seed fully
/// determines the activation sequence and therefore the entire trace.
class SystemState {
 public:
  SystemState() : rng_(0) {}
  explicit SystemState(uint64_t seed) : rng_(seed) {}

  ParticleId add_particle(Node at, int port_offset = 0);

  const Particle& particle(ParticleId p) const { return particles_[p]; }
  Particle& particle(ParticleId p) { return particles_[p]; }
  size_t particle_count() const { return particles_.size(); }

  bool occupied(const Node& v) const { return occupancy_.count(v) > 0; }
  const Occupant* occupant(const Node& v) const;
  const std::unordered_map<Node, Occupant, NodeHash>& occupancy() const { return occupancy_; }

  /// Expands contracted particle p through local port label; the new node
  /// becomes the head.
  void expand(ParticleId p, int port_label);
  void expand_dir(ParticleId p, Dir d);
  /// Contracts expanded particle p out of its tail.
  void contract(ParticleId p);
  /// Handover between p and q: push if p is contracted (expands into q's
  /// tail), pull if p is expanded (q expands into p's tail). Two shape
  /// changes, one atomic action, work += 2.
  void handover(ParticleId p, ParticleId q);

  bool is_connected() const;

  /// Picks a uniformly random non-halted particle, advancing round
  /// accounting. Returns nullopt once every particle has halted.
  std::optional<ParticleId> activate_next();
  /// Scheduler plug-in point: marks p activated with the same bookkeeping
  /// (used by scripted/adversarial schedules in tests).
  void activate(ParticleId p);

  void halt(ParticleId p);
  size_t alive_count() const { return alive_.size(); }

  const Metrics& metrics() const { return metrics_; }
  uint64_t moves_of(ParticleId p) const { return moves_[p]; }

  std::mt19937_64& rng() { return rng_; }

  TraceSink* trace = nullptr;  // non-owning; nullptr disables tracing
  void emit_compute(ParticleId p, const std::string& role = "");

 private:
  void emit_move(ParticleId p, TraceAction action);
  void check_round_boundary();

  std::vector<Particle> particles_;
  std::unordered_map<Node, Occupant, NodeHash> occupancy_;
  std::vector<ParticleId> alive_;       // non-halted ids
  std::vector<int32_t> alive_index_;    // pid -> index in alive_, -1 if halted
  std::vector<uint8_t> activated_;      // since last round boundary
  size_t pending_this_round_ = 0;
  std::vector<uint64_t> moves_;
  Metrics metrics_;
  std::mt19937_64 rng_;
};

}  // namespace sops
