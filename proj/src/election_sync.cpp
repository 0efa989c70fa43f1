#include "sops/election_sync.hpp"

#include <algorithm>
#include <cmath>

namespace sops {

Cycle Cycle::fresh(int id, int length, bool outer) {
  Cycle c;
  c.id = id;
  c.length = length;
  c.is_outer = outer;
  c.candidate.assign(length, 1);
  c.transfer_target.assign(length, -1);
  return c;
}

std::vector<int> Cycle::candidate_positions() const {
  std::vector<int> out;
  for (int i = 0; i < length; ++i)
    if (candidate[i]) out.push_back(i);
  return out;
}

int Cycle::candidate_count() const {
  int n = 0;
  for (uint8_t c : candidate) n += c;
  return n;
}

int Cycle::next_candidate(int pos) const {
  for (int k = 1; k <= length; ++k) {
    int p = (pos + k) % length;
    if (candidate[p]) return p;
  }
  return pos;
}

int Cycle::prev_candidate(int pos) const {
  for (int k = 1; k <= length; ++k) {
    int p = (pos - k % length + length) % length;
    if (candidate[p]) return p;
  }
  return pos;
}

int dist(const Cycle& c, int c1, int c2) {
  return ((c2 - c1 - 1) % c.length + c.length) % c.length;
}

int segment_length(const Cycle& c, int pos) {
  return dist(c, pos, c.next_candidate(pos));
}

bool covers(const Cycle& c, int c1, int c2) {
  return segment_length(c, c1) > dist(c, c2, c1);
}

int longest_segment(const Cycle& c) {
  int best = -1;
  for (int p = 0; p < c.length; ++p)
    if (c.candidate[p]) best = std::max(best, segment_length(c, p));
  return best < 0 ? c.length : best;
}

void run_subphase1(Cycle& c) {
  auto cands = c.candidate_positions();
  if (cands.empty()) return;
  // snapshot of segment lengths and targets on the entry state
  std::vector<int> seg(cands.size());
  for (size_t i = 0; i < cands.size(); ++i) {
    seg[i] = segment_length(c, cands[i]);
    c.transfer_target[cands[i]] = c.next_candidate(cands[i]);
  }
  std::vector<uint8_t> withdraw(cands.size(), 0);
  for (size_t i = 0; i < cands.size(); ++i) {
    size_t prev = (i + cands.size() - 1) % cands.size();
    if (seg[i] < seg[prev]) withdraw[i] = 1;
    for (size_t j = 0; !withdraw[i] && j < cands.size(); ++j)
      if (seg[j] > dist(c, cands[i], cands[j])) withdraw[i] = 1;
  }
  for (size_t i = 0; i < cands.size(); ++i)
    if (withdraw[i]) c.candidate[cands[i]] = 0;
}

void run_subphase2(Cycle& c, CoinSource& coins, int phase) {
  auto cands = c.candidate_positions();
  std::vector<uint8_t> next(c.length, 0);
  for (int pos : cands) {
    if (coins.flip(c.id, pos, phase)) {
      SOPS_REQUIRE(c.transfer_target[pos] >= 0, "transfer without recorded target");
      next[c.transfer_target[pos]] = 1;
    } else {
      next[pos] = 1;
    }
  }
  c.candidate = std::move(next);
}

SubphaseOutcome run_subphase3(Cycle& c) {
  if (c.candidate_count() != 1) return SubphaseOutcome::Continue;
  int pos = c.candidate_positions()[0];
  c.resolved = true;
  if (c.is_outer) {
    c.has_leader = true;
    c.leader_pos = pos;
    return SubphaseOutcome::Leader;
  }
  c.candidate[pos] = 0;
  return SubphaseOutcome::CycleDead;
}

namespace {

std::vector<Cycle> cycles_from_oracle(const BoundaryOracle& oracle) {
  std::vector<Cycle> cycles;
  for (size_t i = 0; i < oracle.cycles.size(); ++i)
    cycles.push_back(Cycle::fresh(static_cast<int>(i),
                                  static_cast<int>(oracle.cycles[i].size()),
                                  static_cast<int>(i) == oracle.outer_index));
  return cycles;
}

void fill_leader(SyncResult& res, const BoundaryOracle& oracle, const Cycle& outer) {
  int agent_idx = oracle.cycles[outer.id][outer.leader_pos];
  res.leader_agent = agent_idx;
  res.leader_pid = oracle.graph.agents[agent_idx].pid;
  res.leader_local_id = oracle.graph.agents[agent_idx].local_id;
}

constexpr int kPhaseWatchdog = 100000;

}  // namespace

SyncResult run_election_sync(const SystemState& state, CoinSource& coins,
                             ElectionStats* stats) {
  BoundaryOracle oracle = enumerate_boundaries(state);
  std::vector<Cycle> cycles = cycles_from_oracle(oracle);
  Cycle& outer = cycles[oracle.outer_index];

  SyncResult res;
  res.l_max = oracle.l_max;
  for (int phase = 1; !outer.resolved; ++phase) {
    SOPS_REQUIRE(phase < kPhaseWatchdog, "sync election failed to converge");
    // charge the longest live segment for this phase
    int l_sys = 0;
    for (const Cycle& c : cycles)
      if (!c.resolved) l_sys = std::max(l_sys, longest_segment(c));
    res.charged_rounds += static_cast<uint64_t>(l_sys);
    res.phases = phase;

    for (Cycle& c : cycles) {
      if (c.resolved) continue;
      int entry_count = c.candidate_count();
      int l_before = longest_segment(c);
      bool equal_segs = true;
      for (int pos : c.candidate_positions())
        if (segment_length(c, pos) != l_before) equal_segs = false;

      run_subphase1(c);
      run_subphase2(c, coins, phase);
      run_subphase3(c);
      c.phases_run += 1;

      int l_after = c.resolved ? c.length : longest_segment(c);
      SOPS_REQUIRE(l_after >= l_before, "segment monotonicity violated");
      if (stats) {
        PhaseRow row;
        row.cycle = c.id;
        row.phase = phase;
        row.l_i = l_before;
        row.candidates = entry_count;
        row.withdrawals = entry_count - (c.resolved && !c.has_leader
                                             ? 0
                                             : c.candidate_count());
        stats->rows.push_back(row);
        stats->doubling.push_back({l_before, l_after, c.length, c.resolved});
        if (entry_count >= 2 && equal_segs) {
          stats->equal_segment_phases += 1;
          int post = c.resolved ? (c.has_leader ? 1 : 0) : c.candidate_count();
          if (post < entry_count) stats->equal_segment_withdrawals += 1;
        }
      }
    }
    // safety: the outer boundary always keeps a candidate
    SOPS_REQUIRE(outer.has_leader || outer.candidate_count() >= 1,
                 "outer boundary lost all candidates");
  }
  fill_leader(res, oracle, outer);
  return res;
}

bool bit_less(const BitStream& b1, const BitStream& b2) {
  size_t n = std::min(b1.size(), b2.size());
  for (size_t i = 0; i < n; ++i) {
    if (b1[i] != b2[i]) return b1[i] < b2[i];
  }
  SOPS_REQUIRE(b1.size() == b2.size(), "bit streams compared at unequal extension");
  throw protocol_error("bit_less requires streams that differ");
}

namespace {

// Pipelined bit competition of the w.h.p. variant. Every candidate extends
// its stream until it differs from both neighbors'; a candidate withdraws
// unless its stream is strictly greater than both. Returns the maximum
// number of bits consumed by any candidate.
int run_bit_competition(Cycle& c, std::mt19937_64& rng) {
  auto cands = c.candidate_positions();
  size_t k = cands.size();
  if (k < 2) return 0;
  std::vector<BitStream> bits(k);
  // first index at which the pair (i, i+1) differs, -1 while unresolved
  std::vector<int> first_diff(k, -1);
  bool all_resolved = false;
  while (!all_resolved) {
    // a candidate extends its stream only while one of its pairs is open
    for (size_t i = 0; i < k; ++i) {
      size_t prev = (i + k - 1) % k;
      if (first_diff[i] < 0 || first_diff[prev] < 0)
        bits[i].push_back((rng() & 1) != 0);
    }
    all_resolved = true;
    for (size_t i = 0; i < k; ++i) {
      if (first_diff[i] >= 0) continue;
      size_t j = (i + 1) % k;
      size_t idx = bits[i].size() - 1;
      if (bits[i][idx] != bits[j][idx]) first_diff[i] = static_cast<int>(idx);
      else all_resolved = false;
    }
  }
  int max_bits = 0;
  for (size_t i = 0; i < k; ++i) {
    size_t prev = (i + k - 1) % k;
    max_bits = std::max(max_bits, static_cast<int>(bits[i].size()));
    size_t succ = (i + 1) % k;
    bool lose_succ = bits[i][first_diff[i]] < bits[succ][first_diff[i]];
    bool lose_pred = bits[i][first_diff[prev]] < bits[prev][first_diff[prev]];
    if (lose_succ || lose_pred) c.candidate[cands[i]] = 0;
  }
  SOPS_REQUIRE(c.candidate_count() >= 1, "bit competition eliminated every candidate");
  return max_bits;
}

}  // namespace

SyncResult run_election_whp(const SystemState& state, std::mt19937_64& rng,
                            ElectionStats* stats) {
  BoundaryOracle oracle = enumerate_boundaries(state);
  std::vector<Cycle> cycles = cycles_from_oracle(oracle);
  Cycle& outer = cycles[oracle.outer_index];

  SyncResult res;
  res.l_max = oracle.l_max;
  for (int phase = 1; !outer.resolved; ++phase) {
    SOPS_REQUIRE(phase < kPhaseWatchdog, "whp election failed to converge");
    res.phases = phase;
    uint64_t charge = 0;
    for (Cycle& c : cycles) {
      if (c.resolved) continue;
      int entry_count = c.candidate_count();
      int l_before = longest_segment(c);

      run_subphase1(c);
      run_subphase1(c);
      int bits = run_bit_competition(c, rng);
      run_subphase3(c);
      c.phases_run += 1;

      int l_after = c.resolved ? c.length : longest_segment(c);
      if (entry_count >= 2) {
        // guaranteed doubling, capped by the longest possible segment; a
        // phase entered with l_i >= L/2 must finish the cycle
        int required = std::min(std::max(2 * l_before, 1), c.length - 1);
        SOPS_REQUIRE(l_after >= required, "whp segment doubling violated");
        if (2 * l_before >= c.length)
          SOPS_REQUIRE(c.resolved, "whp phase with l_i >= L/2 must resolve the cycle");
      }
      int cap = static_cast<int>(std::ceil(std::log2(std::max(c.length, 2)))) + 1;
      SOPS_REQUIRE(c.phases_run <= cap, "whp phase count exceeded log bound");

      charge = std::max(charge, static_cast<uint64_t>(l_after + bits));
      if (stats) {
        PhaseRow row;
        row.cycle = c.id;
        row.phase = phase;
        row.l_i = l_before;
        row.candidates = entry_count;
        row.withdrawals = entry_count - (c.resolved && !c.has_leader
                                             ? 0
                                             : c.candidate_count());
        row.bits = bits;
        stats->rows.push_back(row);
        stats->whp_max_phases_per_cycle =
            std::max(stats->whp_max_phases_per_cycle,
                     static_cast<uint64_t>(c.phases_run));
      }
    }
    res.charged_rounds += charge;
    SOPS_REQUIRE(outer.has_leader || outer.candidate_count() >= 1,
                 "outer boundary lost all candidates");
  }
  fill_leader(res, oracle, outer);
  return res;
}

}  // namespace sops
