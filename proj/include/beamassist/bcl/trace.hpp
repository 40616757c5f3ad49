#pragma once

#include <set>
#include <string>
#include <vector>

#include "json.hpp"

namespace beamassist::bcl {

using json = nlohmann::ordered_json;

enum class EventKind { Measure, Snap, SeriesFrame, MotorMove, TempSet, RateSet, Align, OriginSet, Output, ToolCall };

std::string event_kind_name(EventKind k);
EventKind event_kind_from_name(const std::string& name);

struct Snapshot {
  double x = 0, y = 0, th = 0, phi = 0, temperature = 0;
};

struct TraceEvent {
  double t_start = 0;
  EventKind kind = EventKind::Output;
  json args = json::object();  // canonical parameter names
  Snapshot snapshot;
};

struct Trace {
  std::vector<TraceEvent> events;

  std::size_t count(EventKind k) const;
};

json event_to_json(const TraceEvent& e);
TraceEvent event_from_json(const json& j);

// One event per line, fields in the order t_start, kind, args, snapshot.
std::string trace_to_jsonl(const Trace& t);
Trace trace_from_jsonl(const std::string& text);

struct TraceTolerance {
  double float_tol = 1e-9;
  double time_tol = 1e-9;
  std::set<EventKind> ignore{EventKind::Output};
};

// Rounds every number to the decimal place implied by the tolerance before
// comparing, so the relation is transitive as well as reflexive and symmetric.
bool trace_equivalent(const Trace& a, const Trace& b, const TraceTolerance& tol = {});

// Normalized form used by trace_equivalent; exposed for diagnostics.
std::vector<std::string> normalize_trace(const Trace& t, const TraceTolerance& tol = {});

}  // namespace beamassist::bcl
