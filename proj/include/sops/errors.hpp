#pragma once

#include <stdexcept>
#include <string>

namespace sops {

struct adjacency_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct movement_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct shape_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct handover_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct parameter_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when a protocol invariant that must be unreachable is hit.
struct protocol_error : std::logic_error {
  using std::logic_error::logic_error;
};

#define SOPS_REQUIRE(cond, msg)                                        \
  do {                                                                 \
    if (!(cond)) throw ::sops::protocol_error(std::string("protocol invariant violated: ") + (msg)); \
  } while (0)

}  // namespace sops
