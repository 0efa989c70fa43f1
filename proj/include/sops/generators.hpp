#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sops/system.hpp"

namespace sops {

enum class Shape { RandomConnected, Hexagon, Line, RingWithHoles };
enum class PortOffsets { Zero, Random };

struct InstanceSpec {
  Shape shape = Shape::RandomConnected;
  int n = 1;
  uint64_t seed = 0;
  PortOffsets port_offsets = PortOffsets::Zero;
};

Shape shape_from_string(const std::string& s);
std::string shape_to_string(Shape s);

/// True when n is a centered hexagonal number 3k(k+1)+1.
bool is_centered_hex_number(int n);
/// Smallest centered hexagonal number >= n... the list {1, 7, 19, 37, ...}.
std::vector<int> centered_hex_numbers_up_to(int n_max);

/// Builds a connected configuration of contracted particles with empty
/// memories. The state's RNG is seeded from spec.seed; port offsets are
/// drawn first when requested so the activation stream stays reproducible.
SystemState generate(const InstanceSpec& spec);

/// Explicit node list helper for tests.
SystemState make_from_nodes(const std::vector<Node>& nodes, uint64_t seed = 0);

}  // namespace sops
