#include "sops/grid.hpp"

#include <string>

namespace sops {

Dir direction_between(const Node& u, const Node& v) {
  for (Dir d = 0; d < 6; ++d)
    if (neighbor(u, d) == v) return d;
  throw adjacency_error("nodes (" + std::to_string(u.q) + "," + std::to_string(u.r) +
                        ") and (" + std::to_string(v.q) + "," + std::to_string(v.r) +
                        ") are not adjacent");
}

}  // namespace sops
