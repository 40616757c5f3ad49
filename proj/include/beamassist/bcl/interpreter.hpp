#pragma once

#include <string>

#include "beamassist/bcl/ast.hpp"
#include "beamassist/bcl/trace.hpp"
#include "beamassist/error.hpp"

namespace beamassist::bcl {

struct InstrumentState {
  std::string sample_name = "sample";
  // Motor positions in the raw stage frame; the user frame subtracts origins.
  double x = 0, y = 0, th = 0, phi = 0;
  double origin_x = 0, origin_y = 0, origin_th = 0;
  double temperature = 25.0;
  double ramp_rate = 30.0;  // degC per minute
  double temperature_setpoint = 25.0;
  bool aligned = false;
  std::string detector = "pilatus800";
  double sim_time = 0;

  double user_x() const { return x - origin_x; }
  double user_y() const { return y - origin_y; }
  double user_th() const { return th - origin_th; }
};

json state_to_json(const InstrumentState& s);
InstrumentState state_from_json(const json& j);

struct Limits {
  double max_sim_time = 86400;
  std::size_t max_events = 100000;
  std::size_t max_steps = 2000000;
  double poll_interval = 0.1;
  double measure_overhead = 0;
  double align_duration = 0;
};

struct ExecResult {
  InstrumentState state;
  Trace trace;
  bool halted = false;  // RE.abort() / beam.off()
};

// Runtime failures. kind() is one of SimBudgetExceeded, DivisionByZero,
// NameError, InvalidArgs. The trace and state up to the failure are kept.
class SimError : public Error {
 public:
  SimError(std::string kind, const std::string& message, int line)
      : Error(std::move(kind), message + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const noexcept { return line_; }
  Trace partial_trace;
  InstrumentState partial_state;

 private:
  int line_;
};

ExecResult execute(const Program& p, const InstrumentState& s0 = {}, const Limits& limits = {});

}  // namespace beamassist::bcl
