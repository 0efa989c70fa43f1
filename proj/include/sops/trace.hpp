#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "sops/system.hpp"

namespace sops {

std::string trace_action_name(TraceAction a);

/// Writes one JSON line per event:
///   {"step":0,"round":0,"particle":3,"action":"expand","nodes":[[q,r],...]}
/// Line-formation runs add a "role" key to compute snapshots.
class JsonlTraceWriter final : public TraceSink {
 public:
  explicit JsonlTraceWriter(const std::string& path);
  explicit JsonlTraceWriter(std::ostream& out) : out_(&out) {}
  void on_event(const TraceEvent& ev) override;

 private:
  std::ofstream file_;
  std::ostream* out_ = nullptr;
};

struct ParsedTrace {
  std::vector<TraceEvent> events;
};

/// Parses a JSONL trace file; throws parse_error on malformed input.
ParsedTrace read_trace(const std::string& path);

/// One result row per run, serialized as CSV.
struct RunReport {
  std::string shape;
  int n = 0;
  uint64_t seed = 0;
  std::string algorithm;  // sync | whp | async | line
  std::optional<ParticleId> leader;
  uint64_t rounds = 0;
  uint64_t charged_rounds = 0;
  uint64_t work = 0;
  int l_max = 0;
  int max_tokens = 0;
  int phases = 0;
};

std::string run_report_csv_header();
std::string run_report_csv_row(const RunReport& r);

}  // namespace sops
