#include "beamassist/bcl/trace.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "beamassist/error.hpp"

namespace beamassist::bcl {

namespace {

const std::pair<EventKind, const char*> kKindNames[] = {
    {EventKind::Measure, "Measure"},     {EventKind::Snap, "Snap"},       {EventKind::SeriesFrame, "SeriesFrame"},
    {EventKind::MotorMove, "MotorMove"}, {EventKind::TempSet, "TempSet"}, {EventKind::RateSet, "RateSet"},
    {EventKind::Align, "Align"},         {EventKind::OriginSet, "OriginSet"}, {EventKind::Output, "Output"},
    {EventKind::ToolCall, "ToolCall"},
};

int decimals_for(double tol) {
  if (!(tol > 0)) return 12;
  return std::max(0, static_cast<int>(std::lround(-std::log10(tol))));
}

std::string rounded(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  double r = std::round(v * scale) / scale;
  if (r == 0) r = 0;  // drop negative zero
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, r);
  std::string s = buf;
  if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
  return s;
}

std::string normalize_value(const json& v, int decimals) {
  if (v.is_number()) return rounded(v.get<double>(), decimals);
  if (v.is_array()) {
    std::string out = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ",";
      out += normalize_value(v[i], decimals);
    }
    return out + "]";
  }
  if (v.is_object()) {
    std::map<std::string, std::string> sorted;
    for (auto it = v.begin(); it != v.end(); ++it) sorted[it.key()] = normalize_value(it.value(), decimals);
    std::string out = "{";
    bool first = true;
    for (const auto& [k, s] : sorted) {
      if (!first) out += ",";
      first = false;
      out += k + "=" + s;
    }
    return out + "}";
  }
  return v.dump();
}

}  // namespace

std::string event_kind_name(EventKind k) {
  for (const auto& [kind, name] : kKindNames)
    if (kind == k) return name;
  return "?";
}

EventKind event_kind_from_name(const std::string& name) {
  for (const auto& [kind, n] : kKindNames)
    if (name == n) return kind;
  throw Error("InvalidTrace", "unknown event kind '" + name + "'");
}

std::size_t Trace::count(EventKind k) const {
  std::size_t n = 0;
  for (const auto& e : events) n += e.kind == k;
  return n;
}

json event_to_json(const TraceEvent& e) {
  json j;
  j["t_start"] = e.t_start;
  j["kind"] = event_kind_name(e.kind);
  j["args"] = e.args;
  j["snapshot"] = {{"x", e.snapshot.x},
                   {"y", e.snapshot.y},
                   {"th", e.snapshot.th},
                   {"phi", e.snapshot.phi},
                   {"temperature", e.snapshot.temperature}};
  return j;
}

TraceEvent event_from_json(const json& j) {
  TraceEvent e;
  e.t_start = j.at("t_start").get<double>();
  e.kind = event_kind_from_name(j.at("kind").get<std::string>());
  e.args = j.value("args", json::object());
  if (j.contains("snapshot")) {
    const auto& s = j["snapshot"];
    e.snapshot = {s.value("x", 0.0), s.value("y", 0.0), s.value("th", 0.0), s.value("phi", 0.0),
                  s.value("temperature", 0.0)};
  }
  return e;
}

std::string trace_to_jsonl(const Trace& t) {
  std::string out;
  for (const auto& e : t.events) {
    out += event_to_json(e).dump();
    out += '\n';
  }
  return out;
}

Trace trace_from_jsonl(const std::string& text) {
  Trace t;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      t.events.push_back(event_from_json(json::parse(line)));
    } catch (const json::exception& ex) {
      throw Error("InvalidTrace", ex.what());
    }
  }
  return t;
}

std::vector<std::string> normalize_trace(const Trace& t, const TraceTolerance& tol) {
  const int fd = decimals_for(tol.float_tol);
  const int td = decimals_for(tol.time_tol);
  std::vector<std::string> out;
  for (const auto& e : t.events) {
    if (tol.ignore.count(e.kind)) continue;
    std::string s = event_kind_name(e.kind);
    s += " t=" + rounded(e.t_start, td);
    s += " args=" + normalize_value(e.args, fd);
    const auto& p = e.snapshot;
    s += " at=(" + rounded(p.x, fd) + "," + rounded(p.y, fd) + "," + rounded(p.th, fd) + "," + rounded(p.phi, fd) +
         "," + rounded(p.temperature, fd) + ")";
    out.push_back(std::move(s));
  }
  return out;
}

bool trace_equivalent(const Trace& a, const Trace& b, const TraceTolerance& tol) {
  return normalize_trace(a, tol) == normalize_trace(b, tol);
}

}  // namespace beamassist::bcl
