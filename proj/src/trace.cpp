#include "sops/trace.hpp"

#include <sstream>

#include "json.hpp"

namespace sops {

std::string trace_action_name(TraceAction a) {
  switch (a) {
    case TraceAction::Expand: return "expand";
    case TraceAction::Contract: return "contract";
    case TraceAction::Handover: return "handover";
    case TraceAction::Compute: return "compute";
    case TraceAction::Halt: return "halt";
  }
  return "?";
}

JsonlTraceWriter::JsonlTraceWriter(const std::string& path) : file_(path) {
  if (!file_) throw parameter_error("cannot open trace file: " + path);
  out_ = &file_;
}

void JsonlTraceWriter::on_event(const TraceEvent& ev) {
  std::ostream& os = *out_;
  os << "{\"step\":" << ev.step << ",\"round\":" << ev.round
     << ",\"particle\":" << ev.particle << ",\"action\":\""
     << trace_action_name(ev.action) << "\",\"nodes\":[";
  for (size_t i = 0; i < ev.nodes.size(); ++i) {
    if (i) os << ',';
    os << '[' << ev.nodes[i].q << ',' << ev.nodes[i].r << ']';
  }
  os << ']';
  if (!ev.role.empty()) os << ",\"role\":\"" << ev.role << '"';
  os << "}\n";
}

ParsedTrace read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open trace file: " + path);
  ParsedTrace out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("action") || !j.contains("nodes"))
      throw parse_error("malformed trace line " + std::to_string(lineno));
    TraceEvent ev;
    ev.step = j.value("step", 0ULL);
    ev.round = j.value("round", 0ULL);
    ev.particle = j.value("particle", -1);
    std::string act = j["action"];
    if (act == "expand") ev.action = TraceAction::Expand;
    else if (act == "contract") ev.action = TraceAction::Contract;
    else if (act == "handover") ev.action = TraceAction::Handover;
    else if (act == "compute") ev.action = TraceAction::Compute;
    else if (act == "halt") ev.action = TraceAction::Halt;
    else throw parse_error("unknown action in trace line " + std::to_string(lineno));
    for (const auto& nd : j["nodes"]) {
      if (!nd.is_array() || nd.size() != 2)
        throw parse_error("bad node in trace line " + std::to_string(lineno));
      ev.nodes.push_back({nd[0].get<int>(), nd[1].get<int>()});
    }
    ev.role = j.value("role", std::string());
    out.events.push_back(std::move(ev));
  }
  return out;
}

std::string run_report_csv_header() {
  return "shape,n,seed,algorithm,leader,rounds,charged_rounds,work,l_max,max_tokens,phases";
}

std::string run_report_csv_row(const RunReport& r) {
  std::ostringstream os;
  os << r.shape << ',' << r.n << ',' << r.seed << ',' << r.algorithm << ',';
  if (r.leader) os << *r.leader;
  os << ',' << r.rounds << ',' << r.charged_rounds << ',' << r.work << ','
     << r.l_max << ',' << r.max_tokens << ',' << r.phases;
  return os.str();
}

}  // namespace sops
