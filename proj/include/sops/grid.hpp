#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <functional>

#include "sops/errors.hpp"

namespace sops {

/// Direction on the triangular grid, an index in {0..5} increasing clockwise.
using Dir = int;

/// Node of the infinite equilateral triangular grid in axial coordinates.
struct Node {
  int q = 0;
  int r = 0;
  auto operator<=>(const Node&) const = default;
};

struct NodeHash {
  size_t operator()(const Node& n) const {
    uint64_t h = (static_cast<uint64_t>(static_cast<uint32_t>(n.q)) << 32) |
                 static_cast<uint32_t>(n.r);
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdULL;
    h ^= h >> 33;
    return static_cast<size_t>(h);
  }
};

// Offsets for the six directions, d increasing clockwise:
// d=0 E, d=1 SE, d=2 SW, d=3 W, d=4 NW, d=5 NE (y axis up).
inline constexpr std::array<Node, 6> kDirOffset = {
    Node{1, 0},  Node{1, -1}, Node{0, -1},
    Node{-1, 0}, Node{-1, 1}, Node{0, 1},
};

inline Dir rotate_cw(Dir d, int steps) {
  int v = (d + steps) % 6;
  return v < 0 ? v + 6 : v;
}

inline Dir opposite(Dir d) { return rotate_cw(d, 3); }

inline Node neighbor(const Node& v, Dir d) {
  return {v.q + kDirOffset[d].q, v.r + kDirOffset[d].r};
}

/// Direction from u to an adjacent node v; throws if u and v are not adjacent.
Dir direction_between(const Node& u, const Node& v);

inline bool adjacent(const Node& u, const Node& v) {
  for (Dir d = 0; d < 6; ++d)
    if (neighbor(u, d) == v) return true;
  return false;
}

/// Number of clockwise 60-degree steps from t_in to t_out, normalized into
/// {-2,-1,0,1,2,3}. A 180-degree U-turn counts as +3 so a clockwise traversal
/// of the outer boundary sums to +6 and an inner boundary to -6.
inline int exterior_turn(Dir t_in, Dir t_out) {
  int k = (t_out - t_in) % 6;
  if (k < 0) k += 6;
  return k > 3 ? k - 6 : k;
}

/// Hex distance between nodes (minimum number of grid steps).
inline int grid_distance(const Node& a, const Node& b) {
  int dq = a.q - b.q, dr = a.r - b.r;
  return std::max({std::abs(dq), std::abs(dr), std::abs(dq + dr)});
}

}  // namespace sops
