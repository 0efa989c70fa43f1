#include "sops/system.hpp"

#include <queue>

namespace sops {

ParticleId SystemState::add_particle(Node at, int port_offset) {
  if (occupied(at)) throw movement_error("add_particle: node already occupied");
  ParticleId id = static_cast<ParticleId>(particles_.size());
  Particle p;
  p.id = id;
  p.head = at;
  p.port_offset = port_offset;
  particles_.push_back(p);
  occupancy_[at] = {id, true};
  alive_index_.push_back(static_cast<int32_t>(alive_.size()));
  alive_.push_back(id);
  activated_.push_back(0);
  moves_.push_back(0);
  pending_this_round_ += 1;
  return id;
}

const Occupant* SystemState::occupant(const Node& v) const {
  auto it = occupancy_.find(v);
  return it == occupancy_.end() ? nullptr : &it->second;
}

void SystemState::emit_move(ParticleId p, TraceAction action) {
  if (!trace) return;
  TraceEvent ev;
  ev.step = metrics_.activations;
  ev.round = metrics_.rounds;
  ev.particle = p;
  ev.action = action;
  ev.nodes.push_back(particles_[p].head);
  if (particles_[p].tail) ev.nodes.push_back(*particles_[p].tail);
  trace->on_event(ev);
}

void SystemState::emit_compute(ParticleId p, const std::string& role) {
  if (!trace) return;
  TraceEvent ev;
  ev.step = metrics_.activations;
  ev.round = metrics_.rounds;
  ev.particle = p;
  ev.action = TraceAction::Compute;
  ev.nodes.push_back(particles_[p].head);
  if (particles_[p].tail) ev.nodes.push_back(*particles_[p].tail);
  ev.role = role;
  trace->on_event(ev);
}

void SystemState::expand_dir(ParticleId pid, Dir d) {
  Particle& p = particles_[pid];
  if (p.expanded()) throw shape_error("expand: particle already expanded");
  Node target = neighbor(p.head, d);
  if (occupied(target)) throw movement_error("expand: target node occupied");
  p.tail = p.head;
  p.head = target;
  occupancy_[target] = {pid, true};
  occupancy_[*p.tail] = {pid, false};
  metrics_.work += 1;
  moves_[pid] += 1;
  emit_move(pid, TraceAction::Expand);
}

void SystemState::expand(ParticleId pid, int port_label) {
  expand_dir(pid, particles_[pid].port_to_dir(port_label));
}

void SystemState::contract(ParticleId pid) {
  Particle& p = particles_[pid];
  if (!p.expanded()) throw shape_error("contract: particle not expanded");
  occupancy_.erase(*p.tail);
  p.tail.reset();
  metrics_.work += 1;
  moves_[pid] += 1;
  emit_move(pid, TraceAction::Contract);
}

void SystemState::handover(ParticleId a, ParticleId b) {
  Particle& p = particles_[a];
  Particle& q = particles_[b];
  if (!p.expanded() && q.expanded()) {
    // push: p expands into q's tail while q contracts
    Node target = *q.tail;
    if (!adjacent(p.head, target))
      throw handover_error("push handover: p not adjacent to q's tail");
    occupancy_.erase(target);
    q.tail.reset();
    p.tail = p.head;
    p.head = target;
    occupancy_[target] = {a, true};
    occupancy_[*p.tail] = {a, false};
  } else if (p.expanded() && !q.expanded()) {
    // pull: q expands into p's tail while p contracts
    Node target = *p.tail;
    if (!adjacent(q.head, target))
      throw handover_error("pull handover: q not adjacent to p's tail");
    occupancy_.erase(target);
    p.tail.reset();
    q.tail = q.head;
    q.head = target;
    occupancy_[target] = {b, true};
    occupancy_[*q.tail] = {b, false};
  } else {
    throw handover_error("handover: need one contracted and one expanded particle");
  }
  metrics_.work += 2;
  moves_[a] += 1;
  moves_[b] += 1;
  if (trace) {
    TraceEvent ev;
    ev.step = metrics_.activations;
    ev.round = metrics_.rounds;
    ev.particle = a;
    ev.action = TraceAction::Handover;
    ev.nodes.push_back(particles_[a].head);
    if (particles_[a].tail) ev.nodes.push_back(*particles_[a].tail);
    ev.nodes.push_back(particles_[b].head);
    if (particles_[b].tail) ev.nodes.push_back(*particles_[b].tail);
    trace->on_event(ev);
  }
}

bool SystemState::is_connected() const {
  if (occupancy_.empty()) return true;
  std::unordered_map<Node, uint8_t, NodeHash> seen;
  std::queue<Node> frontier;
  frontier.push(occupancy_.begin()->first);
  seen[occupancy_.begin()->first] = 1;
  size_t visited = 1;
  while (!frontier.empty()) {
    Node v = frontier.front();
    frontier.pop();
    for (Dir d = 0; d < 6; ++d) {
      Node u = neighbor(v, d);
      if (occupied(u) && !seen.count(u)) {
        seen[u] = 1;
        ++visited;
        frontier.push(u);
      }
    }
  }
  return visited == occupancy_.size();
}

void SystemState::check_round_boundary() {
  if (!alive_.empty() && pending_this_round_ == 0) {
    metrics_.rounds += 1;
    for (ParticleId id : alive_) activated_[id] = 0;
    pending_this_round_ = alive_.size();
  }
}

std::optional<ParticleId> SystemState::activate_next() {
  if (alive_.empty()) return std::nullopt;
  std::uniform_int_distribution<size_t> dist(0, alive_.size() - 1);
  ParticleId pid = alive_[dist(rng_)];
  activate(pid);
  return pid;
}

void SystemState::activate(ParticleId pid) {
  if (particles_[pid].halted) throw parameter_error("activate: particle is halted");
  metrics_.activations += 1;
  if (!activated_[pid]) {
    activated_[pid] = 1;
    pending_this_round_ -= 1;
  }
  check_round_boundary();
}

void SystemState::halt(ParticleId pid) {
  Particle& p = particles_[pid];
  if (p.halted) return;
  p.halted = true;
  int32_t idx = alive_index_[pid];
  ParticleId last = alive_.back();
  alive_[idx] = last;
  alive_index_[last] = idx;
  alive_.pop_back();
  alive_index_[pid] = -1;
  if (!activated_[pid]) pending_this_round_ -= 1;
  if (trace) {
    TraceEvent ev;
    ev.step = metrics_.activations;
    ev.round = metrics_.rounds;
    ev.particle = pid;
    ev.action = TraceAction::Halt;
    ev.nodes.push_back(p.head);
    if (p.tail) ev.nodes.push_back(*p.tail);
    trace->on_event(ev);
  }
  check_round_boundary();
}

}  // namespace sops
