#include "sops/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <vector>

namespace sops {

namespace {

struct ParticleSnapshot {
  std::vector<Node> nodes;
  std::string role;
};

// axial -> cartesian; the svg y axis points down, so r grows upward here to
// keep the clockwise direction order visually clockwise
double px(const Node& n) { return n.q + n.r / 2.0; }
double py(const Node& n) { return -n.r * 0.8660254037844386; }

const char* role_color(const std::string& role) {
  if (role == "idle") return "#9e9e9e";
  if (role == "follower") return "#2b6cb0";
  if (role == "root") return "#dd6b20";
  if (role == "retired") return "#1a202c";
  if (role == "leader") return "#c53030";
  if (role == "candidate") return "#2f855a";
  return "#4a5568";
}

void write_frame(const std::string& path,
                 const std::map<ParticleId, ParticleSnapshot>& particles,
                 const RenderOptions& opt) {
  double minx = 1e18, maxx = -1e18, miny = 1e18, maxy = -1e18;
  for (const auto& [pid, snap] : particles)
    for (const Node& n : snap.nodes) {
      minx = std::min(minx, px(n));
      maxx = std::max(maxx, px(n));
      miny = std::min(miny, py(n));
      maxy = std::max(maxy, py(n));
    }
  double pad = 1.0;
  double w = (maxx - minx + 2 * pad) * opt.unit;
  double h = (maxy - miny + 2 * pad) * opt.unit;
  auto X = [&](const Node& n) { return (px(n) - minx + pad) * opt.unit; };
  auto Y = [&](const Node& n) { return (py(n) - miny + pad) * opt.unit; };

  std::ofstream out(path);
  if (!out) throw parameter_error("cannot write frame: " + path);
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\">\n",
                w, h);
  out << buf;
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  double r = opt.unit * 0.32;
  for (const auto& [pid, snap] : particles) {
    const char* color = role_color(snap.role);
    if (snap.nodes.size() == 2) {
      std::snprintf(buf, sizeof(buf),
                    "<line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" "
                    "stroke=\"%s\" stroke-width=\"%.1f\"/>\n",
                    X(snap.nodes[0]), Y(snap.nodes[0]), X(snap.nodes[1]),
                    Y(snap.nodes[1]), color, r);
      out << buf;
    }
    for (const Node& n : snap.nodes) {
      std::snprintf(buf, sizeof(buf),
                    "<circle cx=\"%.1f\" cy=\"%.1f\" r=\"%.1f\" fill=\"%s\"/>\n",
                    X(n), Y(n), r, color);
      out << buf;
    }
  }
  out << "</svg>\n";
}

}  // namespace

int render_svg(const ParsedTrace& trace, const std::string& out_dir,
               const RenderOptions& opt) {
  if (trace.events.empty()) throw parse_error("trace holds no events");
  std::filesystem::create_directories(out_dir);

  std::map<ParticleId, ParticleSnapshot> particles;
  uint64_t stride = std::max<uint64_t>(1, opt.stride);
  int frames = 0;
  auto emit = [&](int idx) {
    char name[64];
    std::snprintf(name, sizeof(name), "frame_%06d.svg", idx);
    write_frame(out_dir + "/" + name, particles, opt);
  };

  std::vector<size_t> frame_points;
  for (size_t i = 0; i < trace.events.size(); ++i)
    if (i % stride == 0) frame_points.push_back(i);
  if (frame_points.empty() || frame_points.back() != trace.events.size() - 1)
    frame_points.push_back(trace.events.size() - 1);

  size_t next_frame = 0;
  for (size_t i = 0; i < trace.events.size(); ++i) {
    const TraceEvent& ev = trace.events[i];
    ParticleSnapshot& snap = particles[ev.particle];
    if (ev.action == TraceAction::Handover) {
      // handover events carry both particles' nodes; keep only the mover's
      snap.nodes.assign(ev.nodes.begin(), ev.nodes.begin() + (ev.nodes.size() >= 3 ? 2 : 1));
    } else {
      snap.nodes = ev.nodes;
    }
    if (!ev.role.empty()) snap.role = ev.role;
    if (ev.action == TraceAction::Halt && snap.role.empty()) snap.role = "retired";
    while (next_frame < frame_points.size() && frame_points[next_frame] == i) {
      emit(frames++);
      ++next_frame;
    }
  }
  return frames;
}

}  // namespace sops
