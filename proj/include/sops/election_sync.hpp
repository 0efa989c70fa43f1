#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "sops/boundary.hpp"

namespace sops {

/// Coin source keyed by (cycle, position, phase) so the same outcomes can be
/// injected into the synchronized model and the asynchronous protocol.
struct CoinSource {
  virtual ~CoinSource() = default;
  virtual bool flip(int cycle, int pos, int phase) = 0;
};

struct RngCoins final : CoinSource {
  explicit RngCoins(std::mt19937_64& rng) : rng_(&rng) {}
  bool flip(int, int, int) override { return ((*rng_)() & 1) != 0; }

 private:
  std::mt19937_64* rng_;
};

/// One boundary cycle in the synchronized model: a global view of candidate
/// positions. Initially every agent is a candidate.
struct Cycle {
  int id = 0;
  int length = 0;
  bool is_outer = false;
  std::vector<uint8_t> candidate;  // indexed by position
  // subphase-1 snapshot of each candidate's succeeding-candidate position,
  // the transfer target of subphase 2
  std::vector<int> transfer_target;
  bool resolved = false;
  bool has_leader = false;
  int leader_pos = -1;
  int phases_run = 0;

  static Cycle fresh(int id, int length, bool outer);
  std::vector<int> candidate_positions() const;
  int candidate_count() const;
  /// Position of the next candidate strictly after pos (wraps; returns pos
  /// itself when it is the only candidate).
  int next_candidate(int pos) const;
  int prev_candidate(int pos) const;
};

/// Number of agents strictly between c1 and c2 walking in cycle direction
/// from c1 to c2; equals length-1 when c1 == c2.
int dist(const Cycle& c, int c1, int c2);
/// Length of the segment of non-candidates following candidate pos.
int segment_length(const Cycle& c, int pos);
/// True when candidate c1 covers candidate c2: |seg(c1)| > d(c2, c1).
bool covers(const Cycle& c, int c1, int c2);
/// Longest segment length; the length itself when the cycle has no candidate.
int longest_segment(const Cycle& c);

/// Subphase 1: every candidate records the position of its succeeding
/// candidate, then all withdrawal predicates (covered by any candidate, or
/// front segment strictly shorter than the predecessor's) are evaluated on
/// the entry snapshot and applied simultaneously.
void run_subphase1(Cycle& c);
/// Subphase 2: surviving candidates flip fair coins; heads moves the
/// candidacy to the recorded target position. All transfers are simultaneous;
/// a position that is both vacated and filled stays a candidate.
void run_subphase2(Cycle& c, CoinSource& coins, int phase);
enum class SubphaseOutcome { Continue, Leader, CycleDead };
/// Subphase 3: a sole candidate becomes leader on the outer cycle and
/// withdraws on an inner one.
SubphaseOutcome run_subphase3(Cycle& c);

/// Per-phase metrics row (one CSV line per cycle per phase).
struct PhaseRow {
  int cycle = 0;
  int phase = 0;
  int l_i = 0;
  int candidates = 0;
  int withdrawals = 0;
  int bits = 0;
};

struct DoublingSample {
  int l_before = 0;
  int l_after = 0;  // cycle length when the phase resolved the cycle
  int length = 0;
  bool resolved = false;
};

struct ElectionStats {
  std::vector<PhaseRow> rows;
  std::vector<DoublingSample> doubling;        // one per cycle phase
  uint64_t equal_segment_phases = 0;           // >= 2 candidates, all segments equal
  uint64_t equal_segment_withdrawals = 0;      // such phases that lost a candidate
  uint64_t whp_max_phases_per_cycle = 0;
};

struct SyncResult {
  ParticleId leader_pid = -1;
  int leader_local_id = 0;
  int leader_agent = -1;
  int phases = 0;
  uint64_t charged_rounds = 0;
  int l_max = 0;
};

/// Runs Algorithm-1 phases on every cycle of the structure until the outer
/// cycle elects a leader. Phase i charges the current longest live segment
/// length. Hard-asserts the safety invariant (outer cycle never candidate
/// free) and segment monotonicity.
SyncResult run_election_sync(const SystemState& state, CoinSource& coins,
                             ElectionStats* stats = nullptr);

inline SyncResult run_election_sync(const SystemState& state, std::mt19937_64& rng,
                                    ElectionStats* stats = nullptr) {
  RngCoins coins(rng);
  return run_election_sync(state, coins, stats);
}

/// Bit streams of the w.h.p. variant's candidate competition.
using BitStream = std::vector<uint8_t>;
/// Lexicographic comparison at the first differing bit. The streams must
/// differ at some index.
bool bit_less(const BitStream& b1, const BitStream& b2);

/// The w.h.p. variant: subphase 1 twice, then a pipelined random-bit
/// competition between neighboring candidates (withdraw unless strictly
/// greater than both neighbors), then subphase 3. Hard-asserts that the
/// longest segment at least doubles per phase (capped at length-1) and that
/// every cycle finishes within ceil(log2 length) + 1 phases. Charges
/// l_{i+1} + bits consumed per phase.
SyncResult run_election_whp(const SystemState& state, std::mt19937_64& rng,
                            ElectionStats* stats = nullptr);

}  // namespace sops
