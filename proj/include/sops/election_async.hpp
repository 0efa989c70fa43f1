#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sops/election_sync.hpp"

namespace sops {

enum class TokenKind : uint8_t {
  Start, Cover, FinalCover, Cleaning, FinalCleaning, Candidacy,
  Confirmation, TailSync, Activation, Matching, BoundaryAngle,
};
enum class Lane : uint8_t { Passive, Active };
enum class Travel : uint8_t { Forward, Backward };

struct TokenTraceSink {
  virtual ~TokenTraceSink() = default;
  virtual void on_token(uint64_t step, int agent, TokenKind kind, Lane lane,
                        Travel dir, const char* event) = 0;
};

/// Per-agent token table: one slot per (kind, lane, travel direction) that
/// the protocol uses. Pipelining falls out of the capacity-one slots: a
/// token waits until the next agent's slot is free and can never overtake a
/// token of its own slot class.
enum SlotIndex : int {
  kStartFwd = 0,
  kCoverPassiveBwd,
  kCoverActiveBwd,
  kFinalCoverPassiveBwd,
  kFinalCoverActiveBwd,
  kCleaningPassiveFwd,
  kCleaningActiveBwd,
  kFinalCleaningFwd,
  kCandidacyFwd,
  kConfirmationBwd,
  kTailSyncBwd,
  kTailSyncFwd,
  kActivationFwd,
  kActivationBwd,
  kMatchingFwd,
  kMatchingBwd,
  kBoundaryFwd,
  kSlotCount,
};

/// Documented agent token capacity: the 17 slots above plus a small queue of
/// emissions waiting for a free slot (at most 4 observed; asserted).
constexpr int kSlotCapacity = kSlotCount + 4;

enum class AgentRole : uint8_t { None, Candidate, Virtual, Leader };
enum class AsyncSubphase : uint8_t { SegCompare, CoinFlip, Solitude, BoundaryCheck };

struct AsyncResult {
  ParticleId leader_pid = -1;
  int leader_agent = -1;
  uint64_t rounds = 0;
  int max_tokens_held = 0;
  int slot_capacity = kSlotCapacity;
};

struct AsyncOptions {
  /// Freeze subphase-1/2 token anchoring on the phase-entry candidate set
  /// and gate candidates at subphase boundaries (used by the lockstep
  /// harness). Free-running mode anchors on live candidates.
  bool lockstep = false;
  CoinSource* coins = nullptr;  // nullptr: fair coins from the system RNG
  uint64_t round_cap = 0;       // 0: default watchdog of 2000 + 500 * L_max
  TokenTraceSink* token_trace = nullptr;
};

/// The asynchronous local-control protocol: constant-size token passing over
/// the boundary agents realizing segment comparison, candidacy transfer,
/// solitude verification and the inner/outer boundary test, ending in a
/// leader broadcast that halts every particle.
class AsyncMachine {
 public:
  AsyncMachine(SystemState& state, AsyncOptions opt = {});

  /// Restricts the initial candidate set (all boundary agents by default);
  /// used by the solitude and boundary-test harnesses.
  void set_candidates(const std::vector<int>& agent_indices);

  const BoundaryOracle& oracle() const { return oracle_; }
  AgentRole role_of(int agent) const { return agents_[agent].role; }
  AsyncSubphase subphase_of(int agent) const { return agents_[agent].subphase; }
  bool candidate_like(int agent) const;
  std::vector<int> live_candidates() const;  // candidate/virtual/leader agents
  std::optional<int> leader_agent() const;
  bool all_halted() const;
  int max_tokens_held() const { return max_tokens_held_; }
  uint64_t total_tokens_present() const;

  /// Processes one particle activation: every agent of the particle handles
  /// arrivals, matches, forwards tokens and advances its own protocol.
  void step(ParticleId p);

  // lockstep and harness controls
  void sweep_phase_entry_flags();
  void lockstep_begin(int phase);
  void set_gate(AsyncSubphase max_subphase);
  bool tokens_quiescent() const;
  int phase_of(int agent) const;
  void set_dormant(int agent, bool dormant);
  void force_subphase(int agent, AsyncSubphase sp);
  std::optional<bool> last_solitude_result() const;
  std::optional<int> last_boundary_k() const;

  /// Drives random activations until every particle halted. Throws
  /// protocol_error when the round watchdog expires.
  AsyncResult run();

 private:
  struct Token {
    bool present = false;
    bool emitted_here = false;
    uint8_t a = 0, b = 0;
    int8_t vx = 0, vy = 0;
  };
  struct Pending {
    int slot = -1;
    Token tok;
  };
  struct AgentState {
    AgentRole role = AgentRole::Candidate;
    AsyncSubphase subphase = AsyncSubphase::SegCompare;
    int phase = 1;
    // segment comparison
    bool sc_started = false;
    bool awaiting_final_cleaning = false;
    bool matched = false;
    bool covered_candidate = false;
    bool covered_pending = false;  // covered mid-solitude; demote once drained
    // candidacy transfer
    bool cf_flipped = false;
    bool awaiting_confirmation = false;
    bool got_candidacy = false;
    bool awaiting_tailsync = false;
    bool tailsync_returned = false;
    // solitude verification
    bool sv_started = false;
    bool sv_fail = false;
    bool sv_id_ok = false;
    bool sv_pass3_sent = false;
    // boundary test
    bool bt_sent = false;
    // lockstep / harness
    bool phase_entry_candidate = false;
    bool dormant = false;  // passive anchor, used by the probe harnesses
    Token slots[kSlotCount];
    std::vector<Pending> pending;
  };

  // topology helpers
  int fwd_neighbor(int agent) const { return oracle_.graph.agents[agent].succ; }
  int bwd_neighbor(int agent) const { return oracle_.graph.agents[agent].pred; }
  int turn_at(int agent) const;

  bool stops_comparison_tokens(int agent) const;  // start/cover anchoring, tailsync bounce
  bool stops_candidacy(int agent) const;
  bool is_live_candidate(int agent) const;  // candidate/virtual/leader

  void queue_emit(int agent, int slot, Token tok);
  void flush_pending(int agent);
  bool slot_free(int agent, int slot) const;
  void process_agent(int agent);
  void handle_arrivals(int agent);
  void try_match(int agent);
  void forward_tokens(int agent);
  bool move_token(int agent, int slot);
  void advance_fsm(int agent);
  void demote_covered(int agent);
  void clear_own_solitude(int agent);
  void conclude_comparison(int agent, bool end_was_candidate, bool saw_covered);
  void become_leader(int agent);
  void note_tokens(int agent);
  void trace_token(int agent, int slot, const char* event);
  bool gate_allows(const AgentState& a, AsyncSubphase sp) const;
  bool coin_flip(int agent);

  SystemState& state_;
  AsyncOptions opt_;
  BoundaryOracle oracle_;
  std::vector<AgentState> agents_;
  std::vector<uint8_t> announce_;  // per particle: 0 none, 1 pending
  int leader_agent_ = -1;
  int max_tokens_held_ = 0;
  int last_solitude_ok_ = -1;
  int last_boundary_k_ = -1;
  bool gated_ = false;
  int gate_phase_ = 1;
  AsyncSubphase gate_sub_ = AsyncSubphase::SegCompare;
};

/// Runs the full asynchronous election with the random sequential scheduler.
AsyncResult run_async_election(SystemState& state, AsyncOptions opt = {});

/// Token-protocol solitude verification probe: installs the given candidate
/// set, runs only the probed candidate's solitude scheme and reports whether
/// it concluded solitude. The other candidates stay passive anchors.
bool probe_solitude(SystemState& state, const std::vector<int>& candidate_agents,
                    int probe_agent);

/// Boundary-test probe: the agent is made the sole candidate of its cycle
/// and runs the angle-summation token; returns k mod 5 (1 outer, 4 inner).
int probe_boundary(SystemState& state, int probe_agent);

struct LockstepReport {
  bool ok = true;
  int phases = 0;
  std::string mismatch;
};

/// Drives the async machine one globally synchronized subphase at a time
/// with injected coins and checks the surviving-candidate set against the
/// synchronized model after every subphase.
LockstepReport run_lockstep_compare(SystemState& state, CoinSource& coins,
                                    int max_phases = 10000);

}  // namespace sops
