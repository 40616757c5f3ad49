#include <cmath>

#include "beamassist/bcl/ast.hpp"
#include "beamassist/bcl/interpreter.hpp"
#include "beamassist/bcl/trace.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace beamassist::bcl;

namespace {

std::string parse_error_kind(const std::string& src) {
  try {
    parse_program(src);
  } catch (const ParseError& e) {
    return e.kind();
  }
  return "ok";
}

std::string sim_error_kind(const std::string& src, const Limits& lim = {}) {
  try {
    execute(parse_program(src), {}, lim);
  } catch (const SimError& e) {
    return e.kind();
  }
  return "ok";
}

ExecResult run(const std::string& src, const InstrumentState& s0 = {}) { return execute(parse_program(src), s0); }

}  // namespace

TEST_SUITE("bcl.parse") {
  TEST_CASE("timed loop program has one while loop with four body statements") {
    Program p = parse_program(fixtures::kTimedLoop);
    int whiles = 0;
    for (const auto& s : p.root.children) {
      if (s.kind == NodeKind::WhileStatement) {
        ++whiles;
        CHECK(s.child(1).children.size() == 4);
      }
    }
    CHECK(whiles == 1);
    CHECK(p.root.children.size() == 4);
    REQUIRE(p.imports.size() == 1);
    CHECK(p.imports[0] == "time");
  }

  TEST_CASE("single call statement") {
    Program p = parse_program("sam.measure(5)");
    REQUIRE(p.root.children.size() == 1);
    const Node& s = p.root.child(0);
    CHECK(s.kind == NodeKind::ExpressionStatement);
    CHECK(call_target(s.child(0)) == "sam.measure");
    CHECK(sexp(p.root) ==
          "(module (expression_statement (call (attribute (identifier) (identifier)) (argument_list (integer)))))");
  }

  TEST_CASE("unknown method is rejected with its name") {
    try {
      parse_program("sam.levitate(3)");
      FAIL("expected UnknownFunction");
    } catch (const ParseError& e) {
      CHECK(e.kind() == "UnknownFunction");
      CHECK(e.subject() == "sam.levitate");
      CHECK(e.line() == 1);
    }
    CHECK(parse_error_kind("levitate()") == "UnknownFunction");
    CHECK(parse_error_kind("os.system('rm')") == "UnknownFunction");
    CHECK(parse_error_kind("sam.x") == "UnknownFunction");
  }

  TEST_CASE("registry-added targets extend the whitelist") {
    ParseOptions opts;
    opts.extra_functions = {"sam.levitate", "hover"};
    CHECK_NOTHROW(parse_program("sam.levitate(3)\nhover()", opts));
  }

  TEST_CASE("unsupported constructs") {
    CHECK(parse_error_kind("def f():\n    pass") == "UnsupportedConstruct");
    CHECK(parse_error_kind("with open('x') as f:\n    pass") == "UnsupportedConstruct");
    CHECK(parse_error_kind("x = [1, 2]\ny = x[0]") == "UnsupportedConstruct");
    CHECK(parse_error_kind("class A:\n    pass") == "UnsupportedConstruct");
    CHECK(parse_error_kind("from time import sleep") == "UnsupportedConstruct");
    CHECK(parse_error_kind("x = {}") == "UnsupportedConstruct");
  }

  TEST_CASE("syntax errors carry a location") {
    try {
      parse_program("sam.measure(5)\nfor x in range(3)\n    sam.measure(1)");
      FAIL("expected SyntaxError");
    } catch (const ParseError& e) {
      CHECK(e.kind() == "SyntaxError");
      CHECK(e.line() == 2);
    }
    CHECK(parse_error_kind("  sam.measure(1)") == "SyntaxError");
    CHECK(parse_error_kind("if True:\n  sam.measure(1)") == "SyntaxError");
    CHECK(parse_error_kind("if True:\n\tsam.measure(1)") == "SyntaxError");
    CHECK(parse_error_kind("sam.measure(5") == "SyntaxError");
    CHECK(parse_error_kind("x = 'abc") == "SyntaxError");
    CHECK(parse_error_kind("sam.measure(exposure_time=1, 2)") == "SyntaxError");
  }

  TEST_CASE("operator prompt loop idioms parse") {
    CHECK_NOTHROW(parse_program(fixtures::kBusyWait));
    CHECK_NOTHROW(parse_program("for _ in range(3):\n    sam.measure(5)\n    sam.yr(0.1)"));
    CHECK_NOTHROW(parse_program("import numpy as np\n\nfor _ in np.arange(0, 5+0.5, 0.5):\n    sam.yr(0.5)\n    sam.measure(10)"));
    CHECK_NOTHROW(parse_program("sam.setOrigin(['x', 'y', 'th'])"));
    CHECK_NOTHROW(parse_program("sam = Sample('perovskite')"));
    CHECK_NOTHROW(parse_program("detselect(pilatus800)"));
  }

  TEST_CASE("comparison chains and precedence") {
    Program p = parse_program("x = 1 + 2 * 3 < 10 <= 11");
    const Node& cmp = p.root.child(0).child(1);
    CHECK(cmp.kind == NodeKind::ComparisonOperator);
    CHECK(cmp.ops == std::vector<std::string>{"<", "<="});
    CHECK(cmp.child(0).text == "+");
  }

  TEST_CASE("continuation lines and comments") {
    Program p = parse_program("sam.measureSpots(num_spots=10,\n    translation_amount=0.1,  # step\n    axis='y', exposure_time=2)\n");
    CHECK(p.root.children.size() == 1);
  }
}

TEST_SUITE("bcl.execute") {
  TEST_CASE("timed loop yields six measures ten seconds apart") {
    ExecResult r = run(fixtures::kTimedLoop);
    std::vector<double> times;
    for (const auto& e : r.trace.events)
      if (e.kind == EventKind::Measure) times.push_back(e.t_start);
    CHECK(times == std::vector<double>{0, 10, 20, 30, 40, 50});
    CHECK(r.state.sim_time == doctest::Approx(60).epsilon(1e-12));
  }

  TEST_CASE("linear ramp from 20 C at 2 C/min for 60 s") {
    InstrumentState s0;
    s0.temperature = s0.temperature_setpoint = 20;
    ExecResult r = run(fixtures::kRamp, s0);
    CHECK(std::abs(r.state.temperature - 22.0) < 1e-6);
    CHECK(r.trace.count(EventKind::RateSet) == 1);
    CHECK(r.trace.count(EventKind::TempSet) == 1);
  }

  TEST_CASE("ramp never overshoots the setpoint") {
    InstrumentState s0;
    s0.temperature = s0.temperature_setpoint = 20;
    ExecResult r = run("sam.setLinkamRate(30)\nsam.setLinkamTemperature(21)\ntime.sleep(600)", s0);
    CHECK(r.state.temperature == 21);
    r = run("sam.setLinkamRate(6)\nsam.setLinkamTemperature(10)\ntime.sleep(60)", s0);
    CHECK(r.state.temperature == doctest::Approx(14));
  }

  TEST_CASE("busy-wait idiom terminates near each goal") {
    InstrumentState s0;
    s0.temperature = s0.temperature_setpoint = 20;
    ExecResult r = run(fixtures::kBusyWait, s0);
    std::vector<double> temps;
    for (const auto& e : r.trace.events)
      if (e.kind == EventKind::Measure) temps.push_back(e.snapshot.temperature);
    REQUIRE(temps.size() == 39);
    for (std::size_t k = 0; k < temps.size(); ++k) {
      const double goal = 22 + 2.0 * static_cast<double>(k);
      CHECK(std::abs(temps[k] - goal) <= 0.1 + 1e-9);
    }
  }

  TEST_CASE("empty program leaves the state unchanged") {
    InstrumentState s0;
    s0.x = 1.5;
    ExecResult r = run("", s0);
    CHECK(r.trace.events.empty());
    CHECK(state_to_json(r.state) == state_to_json(s0));
  }

  TEST_CASE("non-advancing loop trips the guard") {
    Limits lim;
    lim.max_steps = 10000;
    CHECK(sim_error_kind("while True:\n    pass", lim) == "SimBudgetExceeded");
    CHECK(sim_error_kind("sam.measureTimeSeries(5, 9999, 10)") == "SimBudgetExceeded");
  }

  TEST_CASE("runtime errors") {
    CHECK(sim_error_kind("x = 1 / 0") == "DivisionByZero");
    CHECK(sim_error_kind("sam.measure(y)") == "NameError");
    CHECK(sim_error_kind("sam.series_measure(10, 0.5, 0.52, None)") == "InvalidArgs");
    CHECK(sim_error_kind("sam.measure()") == "InvalidArgs");
    CHECK(sim_error_kind("sam.measure(foo=1)") == "InvalidArgs");
    CHECK(sim_error_kind("sam.setOrigin([])") == "InvalidArgs");
    CHECK(sim_error_kind("sam.measureIncidentAngle(0.1)") == "InvalidArgs");
  }

  TEST_CASE("errors keep the partial trace") {
    try {
      run("sam.measure(1)\nsam.measure(2)\nx = 1 // 0");
      FAIL("expected error");
    } catch (const SimError& e) {
      CHECK(e.line() == 3);
      CHECK(e.partial_trace.events.size() == 2);
      CHECK(e.partial_state.sim_time == 3);
    }
  }

  TEST_CASE("measure and snap") {
    ExecResult r = run("sam.measure(5)\nsam.snap(2)");
    REQUIRE(r.trace.events.size() == 2);
    CHECK(r.trace.events[0].args["saved"] == true);
    CHECK(r.trace.events[0].args["exposure_s"] == 5.0);
    CHECK(r.trace.events[1].kind == EventKind::Snap);
    CHECK(r.trace.events[1].args["saved"] == false);
    CHECK(r.trace.events[1].t_start == 5);
    CHECK(r.state.sim_time == 7);
  }

  TEST_CASE("time series and burst series") {
    ExecResult r = run("sam.measureTimeSeries(2, 3, 4)");
    CHECK(r.trace.count(EventKind::Measure) == 3);
    CHECK(r.trace.events[2].t_start == 12);
    r = run("sam.series_measure(num_frames=4, exposure_time=0.5, exposure_period=0.55, wait_time=None)");
    CHECK(r.trace.count(EventKind::SeriesFrame) == 4);
    CHECK(r.trace.events[3].t_start == doctest::Approx(1.65));
  }

  TEST_CASE("spots move before measuring") {
    ExecResult r = run("sam.measureSpots(num_spots=3, translation_amount=0.1, axis='y', exposure_time=2)");
    REQUIRE(r.trace.events.size() == 6);
    CHECK(r.trace.events[0].kind == EventKind::MotorMove);
    CHECK(r.trace.events[1].kind == EventKind::Measure);
    CHECK(r.state.y == doctest::Approx(0.3));
  }

  TEST_CASE("origins rebase the user frame") {
    ExecResult r = run("sam.xabs(2)\nsam.setOrigin(['x'])\nsam.xr(0.5)\nwsam()");
    CHECK(r.state.user_x() == doctest::Approx(0.5));
    CHECK(r.state.x == doctest::Approx(2.5));
    CHECK(r.trace.events.back().args["text"] == "smx = 2.5\nsmy = 0\nsth = 0");
    r = run("sam.setOrigin(['y'], [0.5])\nsam.yabs(1)");
    CHECK(r.state.y == doctest::Approx(1.5));
  }

  TEST_CASE("align zeroes theta") {
    ExecResult r = run("sam.thabs(0.3)\nsam.align()");
    CHECK(r.state.aligned);
    CHECK(r.state.user_th() == 0);
    CHECK(r.trace.events.back().kind == EventKind::Align);
  }

  TEST_CASE("abort halts execution") {
    ExecResult r = run("sam.measure(1)\nRE.abort()\nsam.measure(2)");
    CHECK(r.halted);
    CHECK(r.trace.count(EventKind::Measure) == 1);
    CHECK(r.trace.events.back().kind == EventKind::ToolCall);
  }

  TEST_CASE("sample naming and detector selection") {
    ExecResult r = run("sam = Sample('perovskite')\ndetselect(pilatus2M)\nsam.measure(1)");
    CHECK(r.state.sample_name == "perovskite");
    CHECK(r.state.detector == "pilatus2M");
  }

  TEST_CASE("arange is half-open and index-accumulated") {
    ExecResult r = run(fixtures::kScanRef1);
    CHECK(r.trace.count(EventKind::Measure) == 74);
    CHECK(r.trace.events.front().args["position"] == 0.05);
    CHECK(r.trace.events[146].args["position"].get<double>() == doctest::Approx(1.51));
    r = run("for _ in np.arange(0, 5+0.5, 0.5):\n    sam.yr(0.5)\n    sam.measure(10)");
    CHECK(r.trace.count(EventKind::Measure) == 11);
  }

  TEST_CASE("top-level values are echoed as output") {
    InstrumentState s0;
    s0.temperature = 31.5;
    ExecResult r = run("sam.linkamTemperature()", s0);
    REQUIRE(r.trace.events.size() == 1);
    CHECK(r.trace.events[0].kind == EventKind::Output);
    CHECK(r.trace.events[0].args["text"] == "31.5");
  }

  TEST_CASE("python arithmetic") {
    ExecResult r = run("print(7 // 2, -7 // 2, 7 % 3, -7 % 3, 2 ** 10, 1 / 4, 'a' + 'b', min(3, 1, 2), max([4, 9]), abs(-2.5))");
    CHECK(r.trace.events[0].args["text"] == "3 -4 1 2 1024 0.25 ab 1 9 2.5");
  }

  TEST_CASE("clock is monotone over a mixed program") {
    ExecResult r = run(fixtures::kTimedLoop);
    for (std::size_t k = 1; k < r.trace.events.size(); ++k)
      CHECK(r.trace.events[k].t_start >= r.trace.events[k - 1].t_start);
  }
}

TEST_SUITE("bcl.trace") {
  TEST_CASE("angle scan implementations are pairwise equivalent") {
    const char* progs[] = {fixtures::kScanRef1, fixtures::kScanRef2, fixtures::kScanQwen,
                           fixtures::kScanMistral};
    std::vector<Trace> traces;
    for (const char* p : progs) traces.push_back(run(p).trace);
    for (const auto& a : traces)
      for (const auto& b : traces) CHECK(trace_equivalent(a, b));
  }

  TEST_CASE("differing arguments are not equivalent") {
    CHECK_FALSE(trace_equivalent(run("sam.measure(5)").trace, run("sam.measure(6)").trace));
    CHECK_FALSE(trace_equivalent(run("sam.measure(5)").trace, run("sam.snap(5)").trace));
    CHECK(trace_equivalent(run("sam.measure(5)").trace, run("sam.measure(exposure_time=5.0)").trace));
  }

  TEST_CASE("relative and absolute moves agree") {
    CHECK(trace_equivalent(run("sam.xr(1.5)").trace, run("sam.xabs(1.5)").trace));
  }

  TEST_CASE("output is ignored by default") {
    CHECK(trace_equivalent(run("wsam()\nsam.measure(1)").trace, run("sam.measure(1)").trace));
    TraceTolerance strict;
    strict.ignore.clear();
    CHECK_FALSE(trace_equivalent(run("wsam()\nsam.measure(1)").trace, run("sam.measure(1)").trace, strict));
  }

  TEST_CASE("rounding is to fixed decimals") {
    Trace a, b, c;
    TraceEvent e;
    e.kind = EventKind::Measure;
    e.args = json{{"exposure_s", 1.0}};
    a.events.push_back(e);
    e.args["exposure_s"] = 1.0 + 4e-10;
    b.events.push_back(e);
    e.args["exposure_s"] = 1.0 + 8e-10;
    c.events.push_back(e);
    CHECK(trace_equivalent(a, b));
    CHECK_FALSE(trace_equivalent(a, c));
    CHECK(trace_equivalent(b, a));
  }

  TEST_CASE("jsonl round trip") {
    Trace t = run(fixtures::kTimedLoop).trace;
    const std::string text = trace_to_jsonl(t);
    CHECK(text.rfind("{\"t_start\":", 0) == 0);
    Trace back = trace_from_jsonl(text);
    CHECK(trace_equivalent(t, back));
    CHECK(trace_to_jsonl(back) == text);
  }
}
