#include "sops/generators.hpp"

#include <algorithm>
#include <set>

namespace sops {

Shape shape_from_string(const std::string& s) {
  if (s == "random" || s == "random-connected") return Shape::RandomConnected;
  if (s == "hexagon") return Shape::Hexagon;
  if (s == "line") return Shape::Line;
  if (s == "ring-with-holes") return Shape::RingWithHoles;
  throw parameter_error("unknown shape: " + s);
}

std::string shape_to_string(Shape s) {
  switch (s) {
    case Shape::RandomConnected: return "random";
    case Shape::Hexagon: return "hexagon";
    case Shape::Line: return "line";
    case Shape::RingWithHoles: return "ring-with-holes";
  }
  return "?";
}

bool is_centered_hex_number(int n) {
  for (int k = 0;; ++k) {
    int h = 3 * k * (k + 1) + 1;
    if (h == n) return true;
    if (h > n) return false;
  }
}

std::vector<int> centered_hex_numbers_up_to(int n_max) {
  std::vector<int> out;
  for (int k = 0;; ++k) {
    int h = 3 * k * (k + 1) + 1;
    if (h > n_max) break;
    out.push_back(h);
  }
  return out;
}

namespace {

std::vector<Node> hexagon_nodes(int n) {
  if (!is_centered_hex_number(n))
    throw parameter_error("hexagon shape requires a centered hexagonal particle count");
  int radius = 0;
  while (3 * radius * (radius + 1) + 1 != n) ++radius;
  std::vector<Node> nodes;
  for (int q = -radius; q <= radius; ++q)
    for (int r = -radius; r <= radius; ++r)
      if (grid_distance({q, r}, {0, 0}) <= radius) nodes.push_back({q, r});
  return nodes;
}

std::vector<Node> random_connected_nodes(int n, std::mt19937_64& rng) {
  std::vector<Node> nodes = {{0, 0}};
  std::set<std::pair<int, int>> occupied = {{0, 0}};
  std::set<std::pair<int, int>> frontier;
  auto add_frontier = [&](Node v) {
    for (Dir d = 0; d < 6; ++d) {
      Node u = neighbor(v, d);
      if (!occupied.count({u.q, u.r})) frontier.insert({u.q, u.r});
    }
  };
  add_frontier({0, 0});
  while (static_cast<int>(nodes.size()) < n) {
    std::uniform_int_distribution<size_t> pick(0, frontier.size() - 1);
    auto it = frontier.begin();
    std::advance(it, pick(rng));
    Node v{it->first, it->second};
    frontier.erase(it);
    occupied.insert({v.q, v.r});
    nodes.push_back(v);
    add_frontier(v);
  }
  return nodes;
}

std::vector<Node> ring_with_holes_nodes() {
  // hexagon of radius 3 with two interior nodes removed: one outer boundary
  // plus two one-node holes
  std::vector<Node> nodes;
  for (Node v : hexagon_nodes(37)) {
    if (v == Node{1, 0} || v == Node{-1, 1}) continue;
    nodes.push_back(v);
  }
  return nodes;
}

}  // namespace

SystemState make_from_nodes(const std::vector<Node>& nodes, uint64_t seed) {
  SystemState state(seed);
  for (const Node& v : nodes) state.add_particle(v);
  return state;
}

SystemState generate(const InstanceSpec& spec) {
  if (spec.n < 1 && spec.shape != Shape::RingWithHoles)
    throw parameter_error("instance needs n >= 1");
  std::mt19937_64 gen(spec.seed);
  std::vector<Node> nodes;
  switch (spec.shape) {
    case Shape::Hexagon:
      nodes = hexagon_nodes(spec.n);
      break;
    case Shape::Line:
      for (int i = 0; i < spec.n; ++i) nodes.push_back({i, 0});
      break;
    case Shape::RingWithHoles:
      nodes = ring_with_holes_nodes();
      if (spec.n != 0 && spec.n != static_cast<int>(nodes.size()))
        throw parameter_error("ring-with-holes is a fixed preset of 35 particles");
      break;
    case Shape::RandomConnected:
      nodes = random_connected_nodes(spec.n, gen);
      break;
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const Node& a, const Node& b) { return std::tie(a.q, a.r) < std::tie(b.q, b.r); });
  std::vector<int> offsets(nodes.size(), 0);
  if (spec.port_offsets == PortOffsets::Random) {
    std::uniform_int_distribution<int> d(0, 5);
    for (auto& o : offsets) o = d(gen);
  }
  SystemState out(spec.seed ^ 0x9e3779b97f4a7c15ULL);
  for (size_t i = 0; i < nodes.size(); ++i) out.add_particle(nodes[i], offsets[i]);
  if (!out.is_connected()) throw protocol_error("generated instance is not connected");
  return out;
}

}  // namespace sops
