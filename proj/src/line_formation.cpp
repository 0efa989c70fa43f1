#include "sops/line_formation.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <queue>

namespace sops {

std::string lf_role_name(LFRole r) {
  switch (r) {
    case LFRole::Idle: return "idle";
    case LFRole::Follower: return "follower";
    case LFRole::Root: return "root";
    case LFRole::Retired: return "retired";
  }
  return "?";
}

LineFormation::LineFormation(SystemState& state, ParticleId leader)
    : state_(state), flags_(state.particle_count()), leader_(leader) {
  const Particle& lp = state_.particle(leader);
  if (lp.expanded()) throw parameter_error("leader must be contracted");
  flags_[leader].role = LFRole::Retired;
  flags_[leader].linedir = {lp.port_to_dir(0), lp.port_to_dir(3)};
  emit_role(leader);
  state_.halt(leader);  // retired particles perform no further actions
}

void LineFormation::emit_role(ParticleId p) {
  state_.emit_compute(p, lf_role_name(flags_[p].role));
}

bool LineFormation::node_has_role(Node v, LFRole role) const {
  const Occupant* o = state_.occupant(v);
  return o && flags_[o->pid].role == role;
}

bool LineFormation::adjacent_role(ParticleId p, LFRole role) const {
  const Particle& part = state_.particle(p);
  for (Dir d = 0; d < 6; ++d)
    if (node_has_role(neighbor(part.head, d), role)) return true;
  if (part.tail)
    for (Dir d = 0; d < 6; ++d)
      if (node_has_role(neighbor(*part.tail, d), role)) return true;
  return false;
}

bool LineFormation::has_idle_neighbor(ParticleId p) const {
  return adjacent_role(p, LFRole::Idle);
}

std::optional<ParticleId> LineFormation::find_child(ParticleId p) const {
  const Particle& part = state_.particle(p);
  if (!part.tail) return std::nullopt;
  for (Dir d = 0; d < 6; ++d) {
    const Occupant* o = state_.occupant(neighbor(*part.tail, d));
    if (!o || o->pid == p) continue;
    const Particle& q = state_.particle(o->pid);
    if (q.expanded()) continue;
    if (flags_[o->pid].role != LFRole::Follower) continue;
    const auto& parent = flags_[o->pid].parent;
    if (!parent) continue;
    if (*parent == part.head || (part.tail && *parent == *part.tail)) return o->pid;
  }
  return std::nullopt;
}

// A contraction vacates the tail, so it is blocked while some follower's
// parent flag sits there. Flags on the head survive a contraction unchanged.
bool LineFormation::has_tail_child(ParticleId p) const {
  const Particle& part = state_.particle(p);
  if (!part.tail) return false;
  for (Dir d = 0; d < 6; ++d) {
    const Occupant* o = state_.occupant(neighbor(*part.tail, d));
    if (!o || o->pid == p) continue;
    if (flags_[o->pid].role != LFRole::Follower) continue;
    const auto& parent = flags_[o->pid].parent;
    if (parent && *parent == *part.tail) return true;
  }
  return false;
}

Dir LineFormation::line_dir(ParticleId p) const {
  const Particle& part = state_.particle(p);
  if (part.expanded()) throw parameter_error("line_dir: root must be contracted");
  bool retired_at[6];
  int count = 0;
  for (Dir d = 0; d < 6; ++d) {
    retired_at[d] = node_has_role(neighbor(part.head, d), LFRole::Retired);
    count += retired_at[d] ? 1 : 0;
  }
  SOPS_REQUIRE(count >= 1, "line_dir: no retired neighbor");
  SOPS_REQUIRE(count < 6, "line_dir: root enclosed by retired particles");
  // start at a retired edge, walk clockwise past the whole retired run
  Dir d = 0;
  while (!retired_at[d]) d = rotate_cw(d, 1);
  while (retired_at[d]) d = rotate_cw(d, 1);
  // the retired neighbors of a straight line are consecutive; a second run
  // would make the scan result start-dependent
  Dir check = d;
  int runs = 0;
  for (int k = 0; k < 6; ++k) {
    Dir e = rotate_cw(check, k);
    if (retired_at[e] && !retired_at[rotate_cw(e, -1)]) ++runs;
  }
  SOPS_REQUIRE(runs == 1, "line_dir: retired neighbors form several runs");
  return d;
}

bool LineFormation::check_retire(ParticleId p) {
  const Particle& part = state_.particle(p);
  if (part.expanded() || flags_[p].role != LFRole::Root) return false;
  for (Dir d = 0; d < 6; ++d) {
    const Occupant* o = state_.occupant(neighbor(part.head, d));
    if (!o) continue;
    const LFFlags& nf = flags_[o->pid];
    if (nf.role != LFRole::Retired) continue;
    // the neighbor's linedir flag must sit on our shared edge
    bool points_here = false;
    for (Dir ld : nf.linedir)
      if (neighbor(state_.particle(o->pid).head, ld) == part.head) points_here = true;
    if (!points_here) continue;
    flags_[p].role = LFRole::Retired;
    flags_[p].parent.reset();
    flags_[p].linedir = {rotate_cw(d, 3)};  // continue on the opposite edge
    emit_role(p);
    state_.halt(p);
    return true;
  }
  return false;
}

void LineFormation::act(ParticleId p) {
  LFFlags& f = flags_[p];
  const Particle& part = state_.particle(p);
  switch (f.role) {
    case LFRole::Idle: {
      if (adjacent_role(p, LFRole::Retired)) {
        f.role = LFRole::Root;
        emit_role(p);
      } else {
        // follow the first root or follower in clockwise port order
        for (int label = 0; label < 6; ++label) {
          Node u = neighbor(part.head, part.port_to_dir(label));
          const Occupant* o = state_.occupant(u);
          if (!o) continue;
          LFRole r = flags_[o->pid].role;
          if (r == LFRole::Root || r == LFRole::Follower) {
            f.role = LFRole::Follower;
            f.parent = u;
            emit_role(p);
            break;
          }
        }
      }
      break;
    }
    case LFRole::Follower: {
      if (!part.expanded() && adjacent_role(p, LFRole::Retired)) {
        f.role = LFRole::Root;
        f.parent.reset();
        emit_role(p);
        break;
      }
      if (!part.expanded()) {
        // (i) expand into the parent's tail by a handover
        if (!f.parent) break;
        const Occupant* o = state_.occupant(*f.parent);
        if (!o) break;
        const Particle& q = state_.particle(o->pid);
        if (q.expanded() && adjacent(part.head, *q.tail)) {
          state_.handover(p, o->pid);
          f.parent = q.head;
        }
      } else {
        if (auto child = find_child(p)) {
          // (ii) pull the contracted child into the vacated tail
          state_.handover(p, *child);
          flags_[*child].parent = part.head;
        } else if (!has_tail_child(p) && !has_idle_neighbor(p)) {
          // (iii) nobody follows into the tail and no idle neighbor: contract
          state_.contract(p);
        }
      }
      break;
    }
    case LFRole::Root: {
      if (check_retire(p)) break;
      if (!part.expanded()) {
        Dir d = line_dir(p);
        if (!state_.occupied(neighbor(part.head, d))) state_.expand_dir(p, d);
      } else {
        if (auto child = find_child(p)) {
          state_.handover(p, *child);
          flags_[*child].parent = part.head;
        } else if (!has_tail_child(p) && !has_idle_neighbor(p)) {
          state_.contract(p);
        }
      }
      break;
    }
    case LFRole::Retired:
      break;
  }
}

bool LineFormation::all_retired() const {
  for (ParticleId p = 0; p < static_cast<ParticleId>(state_.particle_count()); ++p)
    if (flags_[p].role != LFRole::Retired) return false;
  return true;
}

LineFormation::ForestView LineFormation::forest_view() const {
  ForestView view;
  for (ParticleId p = 0; p < static_cast<ParticleId>(state_.particle_count()); ++p) {
    const LFFlags& f = flags_[p];
    if (f.role != LFRole::Follower && f.role != LFRole::Root) continue;
    const Particle& part = state_.particle(p);
    if (part.expanded()) view.edges.push_back({*part.tail, part.head});
    if (f.role == LFRole::Follower && f.parent) {
      const Occupant* o = state_.occupant(*f.parent);
      if (o) {
        LFRole pr = flags_[o->pid].role;
        if (pr == LFRole::Follower || pr == LFRole::Root)
          view.edges.push_back({part.head, *f.parent});
      }
    }
  }
  // union-find cycle check over the edge set
  std::map<std::pair<int, int>, int> ids;
  auto id_of = [&](Node v) {
    auto [it, fresh] = ids.insert({{v.q, v.r}, static_cast<int>(ids.size())});
    (void)fresh;
    return it->second;
  };
  std::vector<int> parent;
  std::function<int(int)> find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  view.is_forest = true;
  for (const auto& [a, b] : view.edges) {
    int ia = id_of(a), ib = id_of(b);
    while (static_cast<int>(parent.size()) < static_cast<int>(ids.size()))
      parent.push_back(static_cast<int>(parent.size()));
    int ra = find(ia), rb = find(ib);
    if (ra == rb) {
      view.is_forest = false;
      break;
    }
    parent[ra] = rb;
  }
  return view;
}

bool LineFormation::flags_consistent() const {
  for (ParticleId p = 0; p < static_cast<ParticleId>(state_.particle_count()); ++p) {
    const LFFlags& f = flags_[p];
    if (f.role == LFRole::Follower) {
      if (!f.parent) return false;
      const Occupant* o = state_.occupant(*f.parent);
      if (!o || flags_[o->pid].role == LFRole::Idle) return false;
    }
  }
  // every idle component touches a non-idle particle
  std::vector<uint8_t> seen(state_.particle_count(), 0);
  for (ParticleId p = 0; p < static_cast<ParticleId>(state_.particle_count()); ++p) {
    if (flags_[p].role != LFRole::Idle || seen[p]) continue;
    std::queue<ParticleId> bfs;
    bfs.push(p);
    seen[p] = 1;
    bool touches_active = false;
    while (!bfs.empty()) {
      ParticleId cur = bfs.front();
      bfs.pop();
      for (Dir d = 0; d < 6; ++d) {
        const Occupant* o = state_.occupant(neighbor(state_.particle(cur).head, d));
        if (!o) continue;
        if (flags_[o->pid].role == LFRole::Idle) {
          if (!seen[o->pid]) {
            seen[o->pid] = 1;
            bfs.push(o->pid);
          }
        } else {
          touches_active = true;
        }
      }
    }
    if (!touches_active) return false;
  }
  return true;
}

LineResult run_line_formation(SystemState& state, ParticleId leader,
                              uint64_t round_cap, bool check_connectivity) {
  if (!state.is_connected()) throw parameter_error("initial state must be connected");
  uint64_t n = state.particle_count();
  if (round_cap == 0) round_cap = 5000 + 25 * n * n;
  uint64_t work_before = state.metrics().work;
  uint64_t rounds_before = state.metrics().rounds;

  LineFormation lf(state, leader);
  while (true) {
    auto pid = state.activate_next();
    if (!pid) break;
    lf.act(*pid);
    if (check_connectivity)
      SOPS_REQUIRE(state.is_connected(), "connectivity lost during line formation");
    if (state.metrics().rounds - rounds_before > round_cap)
      throw protocol_error("line formation watchdog expired");
  }
  SOPS_REQUIRE(lf.all_retired(), "line formation halted with active particles");
  SOPS_REQUIRE(validate_line(state, lf), "final configuration is not a line");

  LineResult res;
  res.work = state.metrics().work - work_before;
  res.rounds = state.metrics().rounds - rounds_before;
  for (ParticleId p = 0; p < static_cast<ParticleId>(n); ++p)
    res.max_particle_moves = std::max(res.max_particle_moves, state.moves_of(p));
  return res;
}

bool validate_line(const SystemState& state, const LineFormation& lf) {
  ParticleId leader = lf.leader();
  const LFFlags& leader_flags = lf.flags(leader);
  if (leader_flags.linedir.empty()) return false;
  Node origin = state.particle(leader).head;
  Node axis = kDirOffset[leader_flags.linedir[0]];
  std::vector<int> ks;
  for (ParticleId p = 0; p < static_cast<ParticleId>(state.particle_count()); ++p) {
    const Particle& part = state.particle(p);
    if (part.expanded()) return false;
    if (lf.flags(p).role != LFRole::Retired) return false;
    int dq = part.head.q - origin.q;
    int dr = part.head.r - origin.r;
    int k;
    if (axis.q != 0) {
      if (dq % axis.q != 0) return false;
      k = dq / axis.q;
      if (k * axis.r != dr) return false;
    } else {
      if (dq != 0 || dr % axis.r != 0) return false;
      k = dr / axis.r;
    }
    ks.push_back(k);
  }
  std::sort(ks.begin(), ks.end());
  for (size_t i = 0; i < ks.size(); ++i)
    if (ks[i] != ks[0] + static_cast<int>(i)) return false;
  return std::find(ks.begin(), ks.end(), 0) != ks.end();
}

}  // namespace sops
