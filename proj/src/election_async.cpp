#include "sops/election_async.hpp"

#include <algorithm>
#include <sstream>

namespace sops {

namespace {

constexpr Travel slot_travel(int slot) {
  switch (slot) {
    case kCoverPassiveBwd:
    case kCoverActiveBwd:
    case kFinalCoverPassiveBwd:
    case kFinalCoverActiveBwd:
    case kCleaningActiveBwd:
    case kConfirmationBwd:
    case kTailSyncBwd:
    case kActivationBwd:
    case kMatchingBwd:
      return Travel::Backward;
    default:
      return Travel::Forward;
  }
}

constexpr TokenKind slot_kind(int slot) {
  switch (slot) {
    case kStartFwd: return TokenKind::Start;
    case kCoverPassiveBwd:
    case kCoverActiveBwd: return TokenKind::Cover;
    case kFinalCoverPassiveBwd:
    case kFinalCoverActiveBwd: return TokenKind::FinalCover;
    case kCleaningPassiveFwd:
    case kCleaningActiveBwd: return TokenKind::Cleaning;
    case kFinalCleaningFwd: return TokenKind::FinalCleaning;
    case kCandidacyFwd: return TokenKind::Candidacy;
    case kConfirmationBwd: return TokenKind::Confirmation;
    case kTailSyncBwd:
    case kTailSyncFwd: return TokenKind::TailSync;
    case kActivationFwd:
    case kActivationBwd: return TokenKind::Activation;
    case kMatchingFwd:
    case kMatchingBwd: return TokenKind::Matching;
    default: return TokenKind::BoundaryAngle;
  }
}

constexpr Lane slot_lane(int slot) {
  switch (slot) {
    case kCoverActiveBwd:
    case kFinalCoverActiveBwd:
    case kCleaningActiveBwd:
    case kFinalCleaningFwd:
      return Lane::Active;
    default:
      return Lane::Passive;
  }
}

// Token kinds a passive cleaning token removes: the demoted candidate's own
// subphase-1 passives plus its candidacy/solitude/boundary leftovers.
// Confirmations, tail-sync bounces and final cleanings are exempt; they
// terminate at their own awaiting owner and may belong to live schemes.
constexpr bool passive_deletable(int slot) {
  switch (slot) {
    case kStartFwd:
    case kCoverPassiveBwd:
    case kFinalCoverPassiveBwd:
    case kCandidacyFwd:
    case kActivationFwd:
    case kActivationBwd:
    case kMatchingFwd:
    case kMatchingBwd:
    case kBoundaryFwd:
      return true;
    default:
      return false;
  }
}

// Backward-moving deletables meet the forward passive cleaning head on and
// die on entry; forward-moving ones trail behind it and are spared.
constexpr bool passive_headon_suicide(int slot) {
  switch (slot) {
    case kCoverPassiveBwd:
    case kFinalCoverPassiveBwd:
    case kActivationBwd:
    case kMatchingBwd:
      return true;
    default:
      return false;
  }
}

constexpr int kBwdOrder[] = {
    kCoverActiveBwd, kFinalCoverActiveBwd, kCleaningActiveBwd,
    kCoverPassiveBwd, kFinalCoverPassiveBwd, kConfirmationBwd,
    kTailSyncBwd, kActivationBwd, kMatchingBwd,
};
constexpr int kFwdOrder[] = {
    kStartFwd, kCleaningPassiveFwd, kFinalCleaningFwd, kCandidacyFwd,
    kTailSyncFwd, kActivationFwd, kMatchingFwd, kBoundaryFwd,
};

constexpr int kMaxPending = 8;

}  // namespace

AsyncMachine::AsyncMachine(SystemState& state, AsyncOptions opt)
    : state_(state), opt_(opt), oracle_(enumerate_boundaries(state)) {
  agents_.resize(oracle_.graph.agents.size());
  announce_.assign(state.particle_count(), 0);
  for (auto& a : agents_) {
    a.role = AgentRole::Candidate;
    a.phase_entry_candidate = true;
  }
  // a single isolated particle forms a one-agent cycle; it elects itself
  for (size_t i = 0; i < agents_.size(); ++i)
    if (oracle_.graph.agents[i].succ == static_cast<int>(i)) become_leader(static_cast<int>(i));
}

void AsyncMachine::set_candidates(const std::vector<int>& agent_indices) {
  for (auto& a : agents_) {
    a.role = AgentRole::None;
    a.phase_entry_candidate = false;
  }
  leader_agent_ = -1;
  for (int idx : agent_indices) {
    agents_[idx].role = AgentRole::Candidate;
    agents_[idx].phase_entry_candidate = true;
  }
}

void AsyncMachine::set_dormant(int agent, bool dormant) { agents_[agent].dormant = dormant; }

void AsyncMachine::force_subphase(int agent, AsyncSubphase sp) {
  agents_[agent].subphase = sp;
}

bool AsyncMachine::candidate_like(int agent) const {
  AgentRole r = agents_[agent].role;
  return r == AgentRole::Candidate || r == AgentRole::Virtual || r == AgentRole::Leader;
}

bool AsyncMachine::is_live_candidate(int agent) const { return candidate_like(agent); }

bool AsyncMachine::stops_comparison_tokens(int agent) const {
  if (candidate_like(agent)) return true;
  return opt_.lockstep && agents_[agent].phase_entry_candidate;
}

bool AsyncMachine::stops_candidacy(int agent) const { return stops_comparison_tokens(agent); }

std::vector<int> AsyncMachine::live_candidates() const {
  std::vector<int> out;
  for (size_t i = 0; i < agents_.size(); ++i)
    if (candidate_like(static_cast<int>(i))) out.push_back(static_cast<int>(i));
  return out;
}

std::optional<int> AsyncMachine::leader_agent() const {
  if (leader_agent_ < 0) return std::nullopt;
  return leader_agent_;
}

bool AsyncMachine::all_halted() const { return state_.alive_count() == 0; }

uint64_t AsyncMachine::total_tokens_present() const {
  uint64_t n = 0;
  for (const auto& a : agents_) {
    for (const auto& t : a.slots) n += t.present ? 1 : 0;
    n += a.pending.size();
  }
  return n;
}

bool AsyncMachine::tokens_quiescent() const { return total_tokens_present() == 0; }

int AsyncMachine::turn_at(int agent) const {
  const Agent& a = oracle_.graph.agents[agent];
  return exterior_turn(opposite(a.pred_dir), a.succ_dir);
}

void AsyncMachine::trace_token(int agent, int slot, const char* event) {
  if (opt_.token_trace)
    opt_.token_trace->on_token(state_.metrics().activations, agent, slot_kind(slot),
                               slot_lane(slot), slot_travel(slot), event);
}

bool AsyncMachine::slot_free(int agent, int slot) const {
  return !agents_[agent].slots[slot].present;
}

void AsyncMachine::queue_emit(int agent, int slot, Token tok) {
  tok.present = true;
  tok.emitted_here = true;
  AgentState& a = agents_[agent];
  bool pending_same_slot = false;
  for (const auto& p : a.pending)
    if (p.slot == slot) pending_same_slot = true;
  if (!pending_same_slot && !a.slots[slot].present) {
    a.slots[slot] = tok;
  } else {
    SOPS_REQUIRE(static_cast<int>(a.pending.size()) < kMaxPending,
                 "pending emission queue overflow");
    a.pending.push_back({slot, tok});
  }
  trace_token(agent, slot, "emit");
}

void AsyncMachine::flush_pending(int agent) {
  AgentState& a = agents_[agent];
  for (size_t i = 0; i < a.pending.size();) {
    if (!a.slots[a.pending[i].slot].present) {
      a.slots[a.pending[i].slot] = a.pending[i].tok;
      a.pending.erase(a.pending.begin() + static_cast<long>(i));
    } else {
      // keep order within a slot class: a blocked entry blocks later ones
      ++i;
    }
  }
}

void AsyncMachine::clear_own_solitude(int agent) {
  AgentState& a = agents_[agent];
  a.slots[kActivationFwd].present = false;
  a.slots[kActivationBwd].present = false;
  a.slots[kMatchingFwd].present = false;
  a.slots[kMatchingBwd].present = false;
  a.slots[kBoundaryFwd].present = false;
  a.pending.erase(std::remove_if(a.pending.begin(), a.pending.end(),
                                 [](const Pending& p) {
                                   return p.slot == kActivationFwd || p.slot == kActivationBwd ||
                                          p.slot == kMatchingFwd || p.slot == kMatchingBwd ||
                                          p.slot == kBoundaryFwd;
                                 }),
                  a.pending.end());
  a.sv_started = false;
  a.sv_fail = false;
  a.sv_id_ok = false;
  a.sv_pass3_sent = false;
  a.bt_sent = false;
}

void AsyncMachine::demote_covered(int agent) {
  AgentState& a = agents_[agent];
  a.role = AgentRole::None;
  a.covered_candidate = true;
  a.matched = true;
  a.covered_pending = false;
  // drop own in-flight scheme tokens still held locally; travelling ones are
  // collected by the cleaning tokens
  a.slots[kStartFwd].present = false;
  a.slots[kCoverPassiveBwd].present = false;
  a.slots[kFinalCoverPassiveBwd].present = false;
  a.slots[kCandidacyFwd].present = false;
  a.pending.erase(std::remove_if(a.pending.begin(), a.pending.end(),
                                 [](const Pending& p) {
                                   return p.slot == kStartFwd || p.slot == kCoverPassiveBwd ||
                                          p.slot == kFinalCoverPassiveBwd ||
                                          p.slot == kCandidacyFwd || p.slot == kCoverActiveBwd ||
                                          p.slot == kFinalCoverActiveBwd;
                                 }),
                  a.pending.end());
  clear_own_solitude(agent);
  // reset the front segment's irrelevant work and the back segment's state
  queue_emit(agent, kCleaningPassiveFwd, {});
  queue_emit(agent, kCleaningActiveBwd, {});
}

void AsyncMachine::conclude_comparison(int agent, bool end_was_candidate, bool saw_covered) {
  AgentState& a = agents_[agent];
  a.awaiting_final_cleaning = false;
  if (a.role != AgentRole::Candidate && a.role != AgentRole::Virtual) return;
  if (saw_covered || end_was_candidate) {
    // covered somebody, or equal segment lengths: stay a candidate
    a.subphase = AsyncSubphase::CoinFlip;
    a.cf_flipped = false;
    a.got_candidacy = false;
    a.tailsync_returned = false;
  } else {
    // front segment strictly shorter than the back segment: withdraw
    a.role = AgentRole::None;
  }
}

void AsyncMachine::become_leader(int agent) {
  agents_[agent].role = AgentRole::Leader;
  leader_agent_ = agent;
  announce_[oracle_.graph.agents[agent].pid] = 1;
}

bool AsyncMachine::gate_allows(const AgentState& a, AsyncSubphase sp) const {
  if (!gated_) return true;
  int level = std::min(static_cast<int>(sp), static_cast<int>(AsyncSubphase::Solitude));
  return a.phase == gate_phase_ && level <= static_cast<int>(gate_sub_);
}

bool AsyncMachine::coin_flip(int agent) {
  const Agent& ag = oracle_.graph.agents[agent];
  if (opt_.coins) return opt_.coins->flip(ag.cycle, ag.pos, agents_[agent].phase);
  return (state_.rng()() & 1) != 0;
}

void AsyncMachine::handle_arrivals(int agent) {
  AgentState& a = agents_[agent];
  const Agent& ag = oracle_.graph.agents[agent];

  // starting token: the succeeding candidate consumes it and answers with a
  // final cover token
  if (Token& t = a.slots[kStartFwd]; t.present && !t.emitted_here) {
    if (stops_comparison_tokens(agent)) {
      t.present = false;
      trace_token(agent, kStartFwd, "consume");
      queue_emit(agent, kFinalCoverPassiveBwd, {});
    }
  }

  // passive covers return to the owning candidate and turn active
  if (Token& t = a.slots[kCoverPassiveBwd]; t.present && !t.emitted_here) {
    if (a.awaiting_final_cleaning || stops_comparison_tokens(agent)) {
      t.present = false;
      trace_token(agent, kCoverPassiveBwd, "consume");
      if (a.awaiting_final_cleaning && candidate_like(agent))
        queue_emit(agent, kCoverActiveBwd, {});
    }
  }
  if (Token& t = a.slots[kFinalCoverPassiveBwd]; t.present && !t.emitted_here) {
    if (a.awaiting_final_cleaning || stops_comparison_tokens(agent)) {
      t.present = false;
      trace_token(agent, kFinalCoverPassiveBwd, "consume");
      if (a.awaiting_final_cleaning && candidate_like(agent))
        queue_emit(agent, kFinalCoverActiveBwd, {});
    }
  }

  // active covers match with back-segment agents; one reaching a candidate
  // covers it
  if (Token& t = a.slots[kCoverActiveBwd]; t.present && !t.emitted_here) {
    if (stops_comparison_tokens(agent)) {
      t.present = false;
      trace_token(agent, kCoverActiveBwd, "consume");
      if (a.role == AgentRole::Candidate || a.role == AgentRole::Virtual) {
        if (a.sv_started) {
          // mid-solitude: finish draining the matching tokens first
          a.covered_pending = true;
          a.covered_candidate = true;
          a.matched = true;
        } else {
          demote_covered(agent);
        }
      } else if (a.role == AgentRole::None) {
        a.covered_candidate = true;  // an already-demoted phase-entry candidate
        a.matched = true;
      }
    } else if (!a.matched) {
      t.present = false;
      a.matched = true;
      trace_token(agent, kCoverActiveBwd, "match");
    }
  }

  // the active final cover stops at the first unmatched agent, which reports
  // back with a final cleaning token
  if (Token& t = a.slots[kFinalCoverActiveBwd]; t.present && !t.emitted_here) {
    if (!a.matched) {
      bool end_candidate = stops_comparison_tokens(agent);
      t.present = false;
      trace_token(agent, kFinalCoverActiveBwd, "consume");
      Token fc;
      fc.a = end_candidate ? 1 : 0;
      fc.b = 0;
      queue_emit(agent, kFinalCleaningFwd, fc);
    }
  }

  if (Token& t = a.slots[kCleaningPassiveFwd]; t.present && !t.emitted_here) {
    if (stops_comparison_tokens(agent)) {
      t.present = false;
      trace_token(agent, kCleaningPassiveFwd, "consume");
    }
  }
  if (Token& t = a.slots[kCleaningActiveBwd]; t.present && !t.emitted_here) {
    if (is_live_candidate(agent)) {
      t.present = false;
      trace_token(agent, kCleaningActiveBwd, "consume");
    }
  }

  if (Token& t = a.slots[kFinalCleaningFwd]; t.present && !t.emitted_here) {
    if (a.awaiting_final_cleaning) {
      bool end_candidate = t.a != 0;
      bool saw = t.b != 0;
      t.present = false;
      trace_token(agent, kFinalCleaningFwd, "consume");
      conclude_comparison(agent, end_candidate, saw);
    } else {
      // scan: reset matched state, record covered candidates
      if (a.covered_candidate) {
        t.b = 1;
        a.covered_candidate = false;
      }
      a.matched = false;
    }
  }

  if (Token& t = a.slots[kCandidacyFwd]; t.present && !t.emitted_here) {
    if (stops_candidacy(agent)) {
      t.present = false;
      trace_token(agent, kCandidacyFwd, "consume");
      queue_emit(agent, kConfirmationBwd, {});
      if (a.role == AgentRole::Candidate || a.role == AgentRole::Virtual) {
        a.got_candidacy = true;  // merge; a virtual copy keeps its candidacy
      } else if (a.role == AgentRole::None) {
        // lockstep: the recorded transfer position was demoted this phase;
        // the candidacy revives it
        a.role = AgentRole::Candidate;
        a.subphase = AsyncSubphase::Solitude;
        a.covered_candidate = false;
        a.covered_pending = false;
        a.matched = false;
        a.cf_flipped = false;
        a.got_candidacy = false;
        a.sv_started = false;
        a.bt_sent = false;
      }
    }
  }

  if (Token& t = a.slots[kConfirmationBwd]; t.present && !t.emitted_here) {
    if (a.awaiting_confirmation) {
      t.present = false;
      trace_token(agent, kConfirmationBwd, "consume");
      a.awaiting_confirmation = false;
      if (a.role == AgentRole::Virtual) {
        if (a.got_candidacy) {
          a.role = AgentRole::Candidate;
          a.subphase = AsyncSubphase::Solitude;
          a.sv_started = false;
          a.bt_sent = false;
        } else {
          a.role = AgentRole::None;  // candidacy handed over
        }
      }
    }
  }

  if (Token& t = a.slots[kTailSyncBwd]; t.present && !t.emitted_here) {
    if (stops_comparison_tokens(agent)) {
      t.present = false;
      trace_token(agent, kTailSyncBwd, "consume");
      queue_emit(agent, kTailSyncFwd, {});  // bounce
    }
  }
  if (Token& t = a.slots[kTailSyncFwd]; t.present && !t.emitted_here) {
    if (a.awaiting_tailsync) {
      t.present = false;
      trace_token(agent, kTailSyncFwd, "consume");
      a.awaiting_tailsync = false;
      a.tailsync_returned = true;
    }
  }

  if (Token& t = a.slots[kActivationFwd]; t.present && !t.emitted_here) {
    if (is_live_candidate(agent)) {
      // anchor duty: turn pass 1 into pass 2 (carrying the identifier
      // comparison) and pass 3 into pass 4
      if (t.a == 1) {
        Token back;
        back.a = 2;
        back.vy = (t.b == static_cast<uint8_t>(ag.local_id)) ? 1 : 0;
        t.present = false;
        trace_token(agent, kActivationFwd, "consume");
        queue_emit(agent, kActivationBwd, back);
      } else if (t.a == 3) {
        if (!a.slots[kMatchingFwd].present && !a.slots[kMatchingBwd].present) {
          Token back;
          back.a = 4;
          t.present = false;
          trace_token(agent, kActivationFwd, "consume");
          queue_emit(agent, kActivationBwd, back);
        }
        // otherwise wait: the final passes may not surpass matching tokens
      }
    }
  }

  if (Token& t = a.slots[kActivationBwd]; t.present && !t.emitted_here) {
    if (candidate_like(agent)) {
      if (a.sv_started && t.a == 2 && !a.sv_pass3_sent) {
        a.sv_id_ok = t.vy != 0;
        a.sv_pass3_sent = true;
        t.present = false;
        trace_token(agent, kActivationBwd, "consume");
        Token p3;
        p3.a = 3;
        queue_emit(agent, kActivationFwd, p3);
      } else if (a.sv_started && t.a == 4) {
        bool solitary = !a.sv_fail && a.sv_id_ok;
        t.present = false;
        trace_token(agent, kActivationBwd, "consume");
        last_solitude_ok_ = solitary ? 1 : 0;
        if (a.covered_pending) {
          a.covered_pending = false;
          a.role = AgentRole::None;
          clear_own_solitude(agent);
        } else if (solitary) {
          a.subphase = AsyncSubphase::BoundaryCheck;
          a.sv_started = false;
          a.bt_sent = false;
        } else {
          // not alone: start the next phase with segment comparison
          a.phase += 1;
          a.subphase = AsyncSubphase::SegCompare;
          a.sc_started = false;
          a.cf_flipped = false;
          a.got_candidacy = false;
          a.tailsync_returned = false;
          a.sv_started = false;
        }
      } else {
        t.present = false;  // stale
        trace_token(agent, kActivationBwd, "consume");
      }
    }
  }

  if (Token& t = a.slots[kMatchingFwd]; t.present && !t.emitted_here) {
    if (is_live_candidate(agent)) {
      // matching tokens turn around at the succeeding candidate
      if (!a.slots[kMatchingBwd].present) {
        Token back = t;
        back.emitted_here = true;
        a.slots[kMatchingBwd] = back;
        t.present = false;
        trace_token(agent, kMatchingBwd, "forward");
      }
    }
  }
  if (Token& t = a.slots[kMatchingBwd]; t.present && !t.emitted_here) {
    if (is_live_candidate(agent)) {
      t.present = false;
      trace_token(agent, kMatchingBwd, "consume");
      if (a.sv_started) a.sv_fail = true;  // a surviving vector reached me
    }
  }

  if (Token& t = a.slots[kBoundaryFwd]; t.present && !t.emitted_here) {
    if (is_live_candidate(agent)) {
      int k = t.a;
      t.present = false;
      trace_token(agent, kBoundaryFwd, "consume");
      last_boundary_k_ = k;
      SOPS_REQUIRE(k == 1 || k == 4, "boundary angle sum must be +-360 degrees");
      if (a.covered_pending) {
        a.covered_pending = false;
        a.role = AgentRole::None;
      } else if (k == 1) {
        become_leader(agent);
      } else {
        a.role = AgentRole::None;  // sole candidate of an inner boundary
      }
    }
  }
}

void AsyncMachine::try_match(int agent) {
  AgentState& a = agents_[agent];
  Token& f = a.slots[kMatchingFwd];
  Token& b = a.slots[kMatchingBwd];
  if (!f.present || !b.present) return;
  bool changed = false;
  if ((f.vx > 0 && b.vx < 0) || (f.vx < 0 && b.vx > 0)) {
    f.vx = 0;
    b.vx = 0;
    changed = true;
  }
  if ((f.vy > 0 && b.vy < 0) || (f.vy < 0 && b.vy > 0)) {
    f.vy = 0;
    b.vy = 0;
    changed = true;
  }
  if (changed) trace_token(agent, kMatchingFwd, "match");
  if (f.vx == 0 && f.vy == 0) f.present = false;
  if (b.vx == 0 && b.vy == 0) b.present = false;
}

bool AsyncMachine::move_token(int agent, int slot) {
  AgentState& src = agents_[agent];
  Token& t = src.slots[slot];
  if (!t.present) return false;

  // pipelining constraints
  if (slot == kMatchingFwd && src.slots[kActivationFwd].present &&
      src.slots[kActivationFwd].a == 1)
    return false;  // matchings do not surpass the first-pass activation
  if (slot == kActivationFwd && t.a == 3 &&
      (src.slots[kMatchingFwd].present || src.slots[kMatchingBwd].present))
    return false;  // final passes do not surpass matching tokens
  if (slot == kActivationBwd && t.a == 4 &&
      (src.slots[kMatchingFwd].present || src.slots[kMatchingBwd].present))
    return false;

  int dest = slot_travel(slot) == Travel::Forward ? fwd_neighbor(agent) : bwd_neighbor(agent);
  AgentState& d = agents_[dest];

  // a final cover stays behind the cover tokens of its own lane
  if (slot == kFinalCoverPassiveBwd && d.slots[kCoverPassiveBwd].present) return false;
  if (slot == kFinalCoverActiveBwd && d.slots[kCoverActiveBwd].present) return false;

  // head-on meeting with a sweeping passive cleaning token
  if (passive_headon_suicide(slot) && d.slots[kCleaningPassiveFwd].present) {
    t.present = false;
    trace_token(agent, slot, "consume");
    return true;
  }

  if (slot == kCleaningPassiveFwd) {
    // sweep the destination before entering: in-transit passive tokens of
    // the dead scheme die here
    for (int s = 0; s < kSlotCount; ++s)
      if (passive_deletable(s) && d.slots[s].present && !d.slots[s].emitted_here) {
        d.slots[s].present = false;
        trace_token(dest, s, "consume");
      }
  }
  if (slot == kCleaningActiveBwd) {
    for (int s : {static_cast<int>(kCoverActiveBwd), static_cast<int>(kFinalCoverActiveBwd),
                  static_cast<int>(kCleaningPassiveFwd)})
      if (d.slots[s].present && !d.slots[s].emitted_here) {
        d.slots[s].present = false;
        trace_token(dest, s, "consume");
      }
    if (!d.covered_candidate && !candidate_like(dest)) d.matched = false;
    if (d.slots[kCleaningActiveBwd].present) {
      // a later cleaning absorbs an earlier one
      d.slots[kCleaningActiveBwd].present = false;
    }
  }

  if (d.slots[slot].present) return false;

  Token moved = t;
  moved.emitted_here = false;
  bool was_arrival = !t.emitted_here;
  t.present = false;

  if (slot == kBoundaryFwd) {
    int turn = turn_at(dest);
    moved.a = static_cast<uint8_t>(((moved.a + turn) % 5 + 5) % 5);
  }
  d.slots[slot] = moved;
  trace_token(agent, slot, "forward");

  // generation duties happen when an agent forwards a token onward
  if (was_arrival && slot == kStartFwd) {
    queue_emit(agent, kCoverPassiveBwd, {});
  }
  if (was_arrival && slot == kActivationFwd && moved.a == 1) {
    Dir frame_dir = rotate_cw(oracle_.graph.agents[agent].succ_dir,
                              static_cast<int>(moved.vx));
    Token m;
    m.vx = static_cast<int8_t>(kDirOffset[frame_dir].q);
    m.vy = static_cast<int8_t>(kDirOffset[frame_dir].r);
    queue_emit(agent, kMatchingFwd, m);
  }
  return true;
}

void AsyncMachine::forward_tokens(int agent) {
  for (int slot : kBwdOrder) move_token(agent, slot);
  for (int slot : kFwdOrder) move_token(agent, slot);
}

void AsyncMachine::advance_fsm(int agent) {
  AgentState& a = agents_[agent];
  if (a.dormant) return;
  if (a.role != AgentRole::Candidate) return;  // virtuals wait for confirmation
  const Agent& ag = oracle_.graph.agents[agent];

  switch (a.subphase) {
    case AsyncSubphase::SegCompare:
      if (!a.sc_started && gate_allows(a, AsyncSubphase::SegCompare)) {
        a.sc_started = true;
        a.awaiting_final_cleaning = true;
        queue_emit(agent, kStartFwd, {});
      }
      break;
    case AsyncSubphase::CoinFlip:
      if (!a.cf_flipped && gate_allows(a, AsyncSubphase::CoinFlip)) {
        a.cf_flipped = true;
        if (coin_flip(agent)) {
          a.role = AgentRole::Virtual;
          a.awaiting_confirmation = true;
          queue_emit(agent, kCandidacyFwd, {});
        } else {
          a.awaiting_tailsync = true;
          a.tailsync_returned = false;
          queue_emit(agent, kTailSyncBwd, {});
        }
      } else if (a.cf_flipped && a.tailsync_returned) {
        a.tailsync_returned = false;
        a.subphase = AsyncSubphase::Solitude;
        a.sv_started = false;
      }
      break;
    case AsyncSubphase::Solitude:
      if (!a.sv_started && gate_allows(a, AsyncSubphase::Solitude)) {
        a.sv_started = true;
        a.sv_fail = false;
        a.sv_id_ok = false;
        a.sv_pass3_sent = false;
        int delta = (6 - state_.particle(ag.pid).port_offset) % 6;
        Token act;
        act.a = 1;
        act.b = static_cast<uint8_t>(ag.local_id);
        act.vx = static_cast<int8_t>(delta);
        queue_emit(agent, kActivationFwd, act);
        Dir frame_dir = rotate_cw(ag.succ_dir, delta);
        Token m;
        m.vx = static_cast<int8_t>(kDirOffset[frame_dir].q);
        m.vy = static_cast<int8_t>(kDirOffset[frame_dir].r);
        queue_emit(agent, kMatchingFwd, m);
      }
      break;
    case AsyncSubphase::BoundaryCheck:
      if (!a.bt_sent && gate_allows(a, AsyncSubphase::BoundaryCheck)) {
        a.bt_sent = true;
        Token b;
        b.a = 0;
        queue_emit(agent, kBoundaryFwd, b);
      }
      break;
  }
}

void AsyncMachine::note_tokens(int agent) {
  const AgentState& a = agents_[agent];
  int n = static_cast<int>(a.pending.size());
  for (const auto& t : a.slots) n += t.present ? 1 : 0;
  max_tokens_held_ = std::max(max_tokens_held_, n);
  SOPS_REQUIRE(n <= kSlotCapacity, "agent exceeded the documented token capacity");
}

void AsyncMachine::process_agent(int agent) {
  flush_pending(agent);
  handle_arrivals(agent);
  try_match(agent);
  advance_fsm(agent);
  flush_pending(agent);
  forward_tokens(agent);
  note_tokens(agent);
}

void AsyncMachine::step(ParticleId p) {
  if (announce_[p]) {
    // leader broadcast: tell every neighbor, then halt for good
    const Particle& part = state_.particle(p);
    for (Dir d = 0; d < 6; ++d) {
      const Occupant* o = state_.occupant(neighbor(part.head, d));
      if (o) announce_[o->pid] = 1;
    }
    state_.halt(p);
    return;
  }
  for (int ai : oracle_.graph.particle_agents[p]) process_agent(ai);
}

void AsyncMachine::sweep_phase_entry_flags() {
  for (auto& a : agents_)
    a.phase_entry_candidate = (a.role == AgentRole::Candidate);
}

void AsyncMachine::lockstep_begin(int phase) {
  gated_ = true;
  gate_phase_ = phase;
  gate_sub_ = AsyncSubphase::SegCompare;
  sweep_phase_entry_flags();
}

void AsyncMachine::set_gate(AsyncSubphase sub) { gate_sub_ = sub; }

int AsyncMachine::phase_of(int agent) const { return agents_[agent].phase; }

std::optional<bool> AsyncMachine::last_solitude_result() const {
  if (last_solitude_ok_ < 0) return std::nullopt;
  return last_solitude_ok_ == 1;
}

std::optional<int> AsyncMachine::last_boundary_k() const {
  if (last_boundary_k_ < 0) return std::nullopt;
  return last_boundary_k_;
}

AsyncResult AsyncMachine::run() {
  uint64_t cap = opt_.round_cap ? opt_.round_cap
                                : 4000 + 800 * static_cast<uint64_t>(oracle_.l_max);
  while (true) {
    auto pid = state_.activate_next();
    if (!pid) break;
    step(*pid);
    if (state_.metrics().rounds > cap)
      throw protocol_error("async election watchdog expired after " +
                           std::to_string(state_.metrics().rounds) + " rounds");
  }
  SOPS_REQUIRE(leader_agent_ >= 0, "system halted without a leader");
  AsyncResult res;
  res.leader_agent = leader_agent_;
  res.leader_pid = oracle_.graph.agents[leader_agent_].pid;
  res.rounds = state_.metrics().rounds;
  res.max_tokens_held = max_tokens_held_;
  return res;
}

AsyncResult run_async_election(SystemState& state, AsyncOptions opt) {
  AsyncMachine machine(state, opt);
  return machine.run();
}

namespace {

// round-robin driver for probes and lockstep windows
template <typename Done>
bool drive_round_robin(SystemState& state, AsyncMachine& m, Done done, uint64_t max_passes) {
  for (uint64_t pass = 0; pass < max_passes; ++pass) {
    if (done()) return true;
    bool any = false;
    for (ParticleId p = 0; p < static_cast<ParticleId>(state.particle_count()); ++p) {
      if (state.particle(p).halted) continue;
      state.activate(p);
      m.step(p);
      any = true;
    }
    if (!any) return done();
  }
  return done();
}

}  // namespace

bool probe_solitude(SystemState& state, const std::vector<int>& candidate_agents,
                    int probe_agent) {
  AsyncMachine m(state, {});
  if (m.oracle().graph.agents[probe_agent].succ == probe_agent) return true;
  m.set_candidates(candidate_agents);
  for (int c : candidate_agents)
    if (c != probe_agent) m.set_dormant(c, true);
  m.force_subphase(probe_agent, AsyncSubphase::Solitude);
  uint64_t cap = 200 + 20 * m.oracle().graph.agents.size();
  bool done = drive_round_robin(state, m,
                                [&] { return m.last_solitude_result().has_value(); }, cap);
  SOPS_REQUIRE(done, "solitude probe did not converge");
  return *m.last_solitude_result();
}

int probe_boundary(SystemState& state, int probe_agent) {
  AsyncMachine m(state, {});
  SOPS_REQUIRE(m.oracle().graph.agents[probe_agent].succ != probe_agent,
               "boundary probe needs a cycle of length at least two");
  m.set_candidates({probe_agent});
  m.force_subphase(probe_agent, AsyncSubphase::BoundaryCheck);
  uint64_t cap = 200 + 20 * m.oracle().graph.agents.size();
  bool done = drive_round_robin(state, m,
                                [&] { return m.last_boundary_k().has_value(); }, cap);
  SOPS_REQUIRE(done, "boundary probe did not converge");
  return *m.last_boundary_k();
}

LockstepReport run_lockstep_compare(SystemState& state, CoinSource& coins, int max_phases) {
  AsyncOptions opt;
  opt.lockstep = true;
  opt.coins = &coins;
  AsyncMachine m(state, opt);
  const BoundaryOracle& oracle = m.oracle();

  std::vector<Cycle> mirror;
  for (size_t i = 0; i < oracle.cycles.size(); ++i)
    mirror.push_back(Cycle::fresh(static_cast<int>(i),
                                  static_cast<int>(oracle.cycles[i].size()),
                                  static_cast<int>(i) == oracle.outer_index));

  LockstepReport report;
  auto mirror_candidates = [&] {
    std::vector<int> out;
    for (const Cycle& c : mirror)
      for (int pos = 0; pos < c.length; ++pos)
        if (c.candidate[pos]) out.push_back(oracle.cycles[c.id][pos]);
    std::sort(out.begin(), out.end());
    return out;
  };
  auto machine_candidates = [&] {
    auto v = m.live_candidates();
    std::sort(v.begin(), v.end());
    return v;
  };
  auto mismatch = [&](const std::string& where) {
    report.ok = false;
    std::ostringstream os;
    os << where << ": machine {";
    for (int x : machine_candidates()) os << x << ' ';
    os << "} mirror {";
    for (int x : mirror_candidates()) os << x << ' ';
    os << '}';
    report.mismatch = os.str();
    return report;
  };

  if (state.particle_count() == 1) {
    // one particle elects itself immediately in both models
    mirror[0].resolved = true;
    mirror[0].has_leader = true;
    mirror[0].leader_pos = 0;
    report.phases = 0;
    return report;
  }

  uint64_t window_cap = 500 + 50 * static_cast<uint64_t>(oracle.graph.agents.size());

  for (int phase = 1; phase <= max_phases; ++phase) {
    report.phases = phase;
    m.lockstep_begin(phase);

    // subphase 1: segment comparison
    bool ok = drive_round_robin(state, m, [&] {
      if (!m.tokens_quiescent()) return false;
      for (int c : m.live_candidates())
        if (m.phase_of(c) == phase && m.subphase_of(c) == AsyncSubphase::SegCompare)
          return false;
      return true;
    }, window_cap);
    if (!ok) return mismatch("subphase 1 stalled at phase " + std::to_string(phase));
    for (Cycle& c : mirror)
      if (!c.resolved) run_subphase1(c);
    if (machine_candidates() != mirror_candidates())
      return mismatch("after subphase 1 of phase " + std::to_string(phase));

    // subphase 2: coin flips and candidacy transfer
    m.set_gate(AsyncSubphase::CoinFlip);
    ok = drive_round_robin(state, m, [&] {
      if (!m.tokens_quiescent()) return false;
      for (int c : m.live_candidates()) {
        if (m.role_of(c) == AgentRole::Virtual) return false;
        if (m.phase_of(c) == phase && m.subphase_of(c) != AsyncSubphase::Solitude)
          return false;
      }
      return true;
    }, window_cap);
    if (!ok) return mismatch("subphase 2 stalled at phase " + std::to_string(phase));
    for (Cycle& c : mirror)
      if (!c.resolved) run_subphase2(c, coins, phase);
    if (machine_candidates() != mirror_candidates())
      return mismatch("after subphase 2 of phase " + std::to_string(phase));

    // subphase 3: solitude verification and the boundary test
    m.set_gate(AsyncSubphase::Solitude);
    ok = drive_round_robin(state, m, [&] {
      if (m.leader_agent()) return true;
      if (!m.tokens_quiescent()) return false;
      for (int c : m.live_candidates())
        if (m.phase_of(c) == phase) return false;  // still inside this phase
      return true;
    }, window_cap);
    if (!ok) return mismatch("subphase 3 stalled at phase " + std::to_string(phase));
    for (Cycle& c : mirror)
      if (!c.resolved) run_subphase3(c);
    if (machine_candidates() != mirror_candidates())
      return mismatch("after subphase 3 of phase " + std::to_string(phase));

    if (auto leader = m.leader_agent()) {
      Cycle& outer = mirror[oracle.outer_index];
      if (!outer.has_leader ||
          oracle.cycles[outer.id][outer.leader_pos] != *leader)
        return mismatch("leader disagreement at phase " + std::to_string(phase));
      return report;
    }
  }
  report.ok = false;
  report.mismatch = "no leader within the phase budget";
  return report;
}

}  // namespace sops
