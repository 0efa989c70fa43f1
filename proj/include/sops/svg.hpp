#pragma once

#include <string>

#include "sops/trace.hpp"

namespace sops {

struct RenderOptions {
  uint64_t stride = 1;  // one frame every this-many trace events
  double unit = 24.0;   // pixels per lattice step
};

/// Renders a trace into frame_%06d.svg files under out_dir: particles as
/// dots (contracted) or dumbbells (expanded), roles color coded, initial
/// boundaries outlined. A stride beyond the trace length yields exactly the
/// first and the last frame. Returns the number of frames written.
int render_svg(const ParsedTrace& trace, const std::string& out_dir,
               const RenderOptions& opt = {});

}  // namespace sops
