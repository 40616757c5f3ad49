#include "beamassist/bcl/interpreter.hpp"

#include <cmath>
#include <map>
#include <memory>
#include <optional>

#include "beamassist/bcl/signatures.hpp"
#include "beamassist/text.hpp"

namespace beamassist::bcl {

json state_to_json(const InstrumentState& s) {
  return json{{"sample_name", s.sample_name},
              {"x", s.x},
              {"y", s.y},
              {"th", s.th},
              {"phi", s.phi},
              {"origin_x", s.origin_x},
              {"origin_y", s.origin_y},
              {"origin_th", s.origin_th},
              {"temperature", s.temperature},
              {"ramp_rate", s.ramp_rate},
              {"temperature_setpoint", s.temperature_setpoint},
              {"aligned", s.aligned},
              {"detector", s.detector},
              {"sim_time", s.sim_time}};
}

InstrumentState state_from_json(const json& j) {
  InstrumentState s;
  s.sample_name = j.value("sample_name", s.sample_name);
  s.x = j.value("x", s.x);
  s.y = j.value("y", s.y);
  s.th = j.value("th", s.th);
  s.phi = j.value("phi", s.phi);
  s.origin_x = j.value("origin_x", s.origin_x);
  s.origin_y = j.value("origin_y", s.origin_y);
  s.origin_th = j.value("origin_th", s.origin_th);
  s.temperature = j.value("temperature", s.temperature);
  s.ramp_rate = j.value("ramp_rate", s.ramp_rate);
  s.temperature_setpoint = j.value("temperature_setpoint", s.temperature);
  s.aligned = j.value("aligned", s.aligned);
  s.detector = j.value("detector", s.detector);
  s.sim_time = j.value("sim_time", s.sim_time);
  if (!(s.ramp_rate > 0)) throw Error("InvalidArgs", "ramp_rate must be positive");
  return s;
}

namespace {

struct Value;
using List = std::vector<Value>;

struct Value {
  enum class T { None, Bool, Int, Float, Str, List, Sample };
  T t = T::None;
  bool b = false;
  long long i = 0;
  double f = 0;
  std::string s;
  std::shared_ptr<List> list;

  static Value none() { return {}; }
  static Value boolean(bool v) {
    Value x;
    x.t = T::Bool;
    x.b = v;
    return x;
  }
  static Value integer(long long v) {
    Value x;
    x.t = T::Int;
    x.i = v;
    return x;
  }
  static Value real(double v) {
    Value x;
    x.t = T::Float;
    x.f = v;
    return x;
  }
  static Value str(std::string v) {
    Value x;
    x.t = T::Str;
    x.s = std::move(v);
    return x;
  }
  static Value make_list(List items) {
    Value x;
    x.t = T::List;
    x.list = std::make_shared<List>(std::move(items));
    return x;
  }
  static Value sample() {
    Value x;
    x.t = T::Sample;
    return x;
  }

  bool is_number() const { return t == T::Int || t == T::Float || t == T::Bool; }
  bool is_intlike() const { return t == T::Int || t == T::Bool; }
  double num() const { return t == T::Float ? f : t == T::Int ? static_cast<double>(i) : (b ? 1.0 : 0.0); }
  long long as_int() const { return t == T::Int ? i : (b ? 1 : 0); }
};

std::string type_name(const Value& v) {
  switch (v.t) {
    case Value::T::None: return "NoneType";
    case Value::T::Bool: return "bool";
    case Value::T::Int: return "int";
    case Value::T::Float: return "float";
    case Value::T::Str: return "str";
    case Value::T::List: return "list";
    case Value::T::Sample: return "Sample";
  }
  return "?";
}

std::string float_repr(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::string s = text::format_number(v);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

std::string repr(const Value& v, bool quote_strings);

std::string to_str(const Value& v) { return repr(v, false); }

std::string repr(const Value& v, bool quote_strings) {
  switch (v.t) {
    case Value::T::None: return "None";
    case Value::T::Bool: return v.b ? "True" : "False";
    case Value::T::Int: return std::to_string(v.i);
    case Value::T::Float: return float_repr(v.f);
    case Value::T::Str: return quote_strings ? "'" + v.s + "'" : v.s;
    case Value::T::List: {
      std::string out = "[";
      for (std::size_t k = 0; k < v.list->size(); ++k) {
        if (k) out += ", ";
        out += repr((*v.list)[k], true);
      }
      return out + "]";
    }
    case Value::T::Sample: return "<Sample>";
  }
  return "?";
}

bool truthy(const Value& v) {
  switch (v.t) {
    case Value::T::None: return false;
    case Value::T::Bool: return v.b;
    case Value::T::Int: return v.i != 0;
    case Value::T::Float: return v.f != 0;
    case Value::T::Str: return !v.s.empty();
    case Value::T::List: return !v.list->empty();
    case Value::T::Sample: return true;
  }
  return false;
}

bool values_equal(const Value& a, const Value& b) {
  if (a.is_number() && b.is_number()) return a.num() == b.num();
  if (a.t != b.t) return false;
  switch (a.t) {
    case Value::T::None: return true;
    case Value::T::Str: return a.s == b.s;
    case Value::T::List: {
      if (a.list->size() != b.list->size()) return false;
      for (std::size_t k = 0; k < a.list->size(); ++k)
        if (!values_equal((*a.list)[k], (*b.list)[k])) return false;
      return true;
    }
    case Value::T::Sample: return true;
    default: return false;
  }
}

json to_json(const Value& v) {
  switch (v.t) {
    case Value::T::None: return nullptr;
    case Value::T::Bool: return v.b;
    case Value::T::Int: return static_cast<double>(v.i);
    case Value::T::Float: return v.f;
    case Value::T::Str: return v.s;
    case Value::T::List: {
      json arr = json::array();
      for (const auto& x : *v.list) arr.push_back(to_json(x));
      return arr;
    }
    case Value::T::Sample: return "<Sample>";
  }
  return nullptr;
}

enum class Flow { Normal, Break, Continue, Halt };

// Arguments bound to a signature: one slot per parameter, plus the variadic tail.
struct Bound {
  std::vector<std::optional<Value>> slots;
  std::vector<Value> rest;
};

const char* kDetectors[] = {"pilatus800", "pilatus2M", "pilatus300", "pilatus8002"};

class Interpreter {
 public:
  Interpreter(const InstrumentState& s0, const Limits& limits) : st_(s0), lim_(limits) {
    env_["sam"] = Value::sample();
    for (const char* d : kDetectors) env_[d] = Value::str(d);
  }

  ExecResult run(const Program& p) {
    try {
      for (const auto& stmt : p.root.children) {
        if (exec(stmt, 0) == Flow::Halt || halt_requested_) {
          halted_ = true;
          break;
        }
      }
    } catch (SimError& e) {
      e.partial_trace = trace_;
      e.partial_state = st_;
      throw;
    }
    return ExecResult{st_, trace_, halted_};
  }

 private:
  [[noreturn]] void fail(const std::string& kind, const std::string& msg) const { throw SimError(kind, msg, line_); }

  void step() {
    if (++steps_ > lim_.max_steps) fail("SimBudgetExceeded", "step budget of " + std::to_string(lim_.max_steps) + " exhausted");
  }

  void advance(double dt) {
    if (dt < 0 || std::isnan(dt)) fail("InvalidArgs", "negative duration " + text::format_number(dt));
    const double t1 = st_.sim_time + dt;
    if (t1 > lim_.max_sim_time)
      fail("SimBudgetExceeded", "simulated time would exceed " + text::format_number(lim_.max_sim_time) + " s");
    const double delta = st_.ramp_rate * dt / 60.0;
    const double gap = st_.temperature_setpoint - st_.temperature;
    if (std::abs(gap) <= delta)
      st_.temperature = st_.temperature_setpoint;
    else
      st_.temperature += gap > 0 ? delta : -delta;
    st_.sim_time = t1;
  }

  void emit(EventKind kind, json args) {
    if (trace_.events.size() >= lim_.max_events)
      fail("SimBudgetExceeded", "event budget of " + std::to_string(lim_.max_events) + " exhausted");
    TraceEvent e;
    e.t_start = st_.sim_time;
    e.kind = kind;
    e.args = std::move(args);
    e.snapshot = {st_.user_x(), st_.user_y(), st_.user_th(), st_.phi, st_.temperature};
    trace_.events.push_back(std::move(e));
  }

  // ---- statements ----

  Flow exec(const Node& n, int depth) {
    step();
    line_ = n.line;
    switch (n.kind) {
      case NodeKind::ExpressionStatement: {
        Value v = eval(n.child(0));
        // Top-level values are echoed, as an interactive session would.
        if (halt_requested_) return Flow::Halt;
        if (depth == 0 && v.t != Value::T::None) emit(EventKind::Output, json{{"text", repr(v, true)}});
        return Flow::Normal;
      }
      case NodeKind::Assignment: {
        Value v = eval(n.child(1));
        if (halt_requested_) return Flow::Halt;
        assign(n.child(0), std::move(v));
        return Flow::Normal;
      }
      case NodeKind::AugmentedAssignment: {
        const std::string& name = n.child(0).text;
        Value cur = lookup(name);
        Value rhs = eval(n.child(1));
        env_[name] = binop(n.text.substr(0, 1), cur, rhs);
        return Flow::Normal;
      }
      case NodeKind::ForStatement: return exec_for(n, depth);
      case NodeKind::WhileStatement: return exec_while(n, depth);
      case NodeKind::IfStatement: {
        if (truthy(eval(n.child(0)))) return exec_block(n.child(1), depth);
        for (std::size_t k = 2; k < n.children.size(); ++k) {
          const Node& clause = n.children[k];
          if (clause.kind == NodeKind::ElifClause) {
            if (truthy(eval(clause.child(0)))) return exec_block(clause.child(1), depth);
          } else {
            return exec_block(clause.child(0), depth);
          }
        }
        return Flow::Normal;
      }
      case NodeKind::ImportStatement:
      case NodeKind::PassStatement:
        return Flow::Normal;
      case NodeKind::BreakStatement:
        return Flow::Break;
      case NodeKind::ContinueStatement:
        return Flow::Continue;
      default:
        fail("InvalidArgs", "unexpected statement " + std::string(node_kind_name(n.kind)));
    }
  }

  Flow exec_block(const Node& block, int depth) {
    for (const auto& s : block.children) {
      Flow f = exec(s, depth + 1);
      if (halt_requested_) return Flow::Halt;
      if (f != Flow::Normal) return f;
    }
    return Flow::Normal;
  }

  Flow exec_for(const Node& n, int depth) {
    Value it = eval(n.child(1));
    if (halt_requested_) return Flow::Halt;
    if (it.t != Value::T::List) fail("InvalidArgs", "cannot iterate over " + type_name(it));
    const auto items = it.list;
    for (const auto& v : *items) {
      step();
      env_[n.child(0).text] = v;
      Flow f = exec_block(n.child(2), depth);
      if (f == Flow::Halt) return f;
      if (f == Flow::Break) break;
    }
    return Flow::Normal;
  }

  Flow exec_while(const Node& n, int depth) {
    while (true) {
      step();
      line_ = n.line;
      const bool outer_reads = reads_clock_;
      reads_clock_ = false;
      const bool cond = truthy(eval(n.child(0)));
      const bool cond_reads = reads_clock_;
      reads_clock_ = outer_reads || cond_reads;
      if (halt_requested_) return Flow::Halt;
      if (!cond) break;
      const double t0 = st_.sim_time;
      Flow f = exec_block(n.child(1), depth);
      if (f == Flow::Halt) return f;
      if (f == Flow::Break) break;
      // Busy-wait on the clock or the heater: let simulated time pass.
      if (st_.sim_time == t0 && cond_reads) advance(lim_.poll_interval);
    }
    return Flow::Normal;
  }

  void assign(const Node& target, Value v) {
    if (target.kind == NodeKind::Identifier) {
      env_[target.text] = std::move(v);
      return;
    }
    const std::string dotted = target.child(0).text + "." + target.child(1).text;
    if (dotted == "sam.name") {
      if (v.t != Value::T::Str) fail("InvalidArgs", "sample name must be a string");
      st_.sample_name = v.s;
      return;
    }
    fail("InvalidArgs", "cannot assign to " + dotted);
  }

  Value lookup(const std::string& name) {
    auto it = env_.find(name);
    if (it == env_.end()) fail("NameError", "name '" + name + "' is not defined");
    return it->second;
  }

  // ---- expressions ----

  Value eval(const Node& n) {
    if (halt_requested_) return Value::none();
    switch (n.kind) {
      case NodeKind::Identifier: return lookup(n.text);
      case NodeKind::Integer: {
        try {
          return Value::integer(std::stoll(n.text));
        } catch (const std::exception&) {
          return Value::real(std::stod(n.text));
        }
      }
      case NodeKind::Float: return Value::real(std::stod(n.text));
      case NodeKind::String: return Value::str(n.text);
      case NodeKind::True: return Value::boolean(true);
      case NodeKind::False: return Value::boolean(false);
      case NodeKind::None: return Value::none();
      case NodeKind::ParenthesizedExpression: return eval(n.child(0));
      case NodeKind::List: {
        List items;
        for (const auto& c : n.children) items.push_back(eval(c));
        return Value::make_list(std::move(items));
      }
      case NodeKind::Attribute: {
        const std::string dotted = n.child(0).text + "." + n.child(1).text;
        if (dotted == "np.pi") return Value::real(M_PI);
        if (dotted == "sam.name") {
          expect_sample(n.child(0));
          return Value::str(st_.sample_name);
        }
        fail("InvalidArgs", "unknown attribute " + dotted);
      }
      case NodeKind::UnaryOperator: {
        Value v = eval(n.child(0));
        if (!v.is_number()) fail("InvalidArgs", "bad operand type for unary " + n.text + ": " + type_name(v));
        if (n.text == "+") return v.is_intlike() ? Value::integer(v.as_int()) : v;
        return v.is_intlike() ? Value::integer(-v.as_int()) : Value::real(-v.f);
      }
      case NodeKind::NotOperator: return Value::boolean(!truthy(eval(n.child(0))));
      case NodeKind::BooleanOperator: {
        Value lhs = eval(n.child(0));
        if (n.text == "and") return truthy(lhs) ? eval(n.child(1)) : lhs;
        return truthy(lhs) ? lhs : eval(n.child(1));
      }
      case NodeKind::BinaryOperator: {
        Value a = eval(n.child(0));
        Value b = eval(n.child(1));
        return binop(n.text, a, b);
      }
      case NodeKind::ComparisonOperator: {
        Value lhs = eval(n.child(0));
        for (std::size_t k = 0; k < n.ops.size(); ++k) {
          Value rhs = eval(n.child(k + 1));
          if (!compare(n.ops[k], lhs, rhs)) return Value::boolean(false);
          lhs = std::move(rhs);
        }
        return Value::boolean(true);
      }
      case NodeKind::Call: return call(n);
      default: fail("InvalidArgs", "cannot evaluate " + std::string(node_kind_name(n.kind)));
    }
  }

  static long long floor_div(long long a, long long b) {
    long long q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
  }

  Value binop(const std::string& op, const Value& a, const Value& b) {
    if (op == "+" && a.t == Value::T::Str && b.t == Value::T::Str) return Value::str(a.s + b.s);
    if (op == "+" && a.t == Value::T::List && b.t == Value::T::List) {
      List items = *a.list;
      items.insert(items.end(), b.list->begin(), b.list->end());
      return Value::make_list(std::move(items));
    }
    if (op == "*" && a.t == Value::T::Str && b.is_intlike()) {
      std::string out;
      for (long long k = 0; k < b.as_int(); ++k) out += a.s;
      return Value::str(out);
    }
    if (!a.is_number() || !b.is_number())
      fail("InvalidArgs", "unsupported operand types for " + op + ": " + type_name(a) + " and " + type_name(b));
    const bool ints = a.is_intlike() && b.is_intlike();
    const double x = a.num(), y = b.num();
    if (op == "+") return ints ? Value::integer(a.as_int() + b.as_int()) : Value::real(x + y);
    if (op == "-") return ints ? Value::integer(a.as_int() - b.as_int()) : Value::real(x - y);
    if (op == "*") return ints ? Value::integer(a.as_int() * b.as_int()) : Value::real(x * y);
    if (op == "/") {
      if (y == 0) fail("DivisionByZero", "division by zero");
      return Value::real(x / y);
    }
    if (op == "//" || op == "%") {
      if (y == 0) fail("DivisionByZero", "integer division or modulo by zero");
      if (ints) {
        const long long q = floor_div(a.as_int(), b.as_int());
        return op == "//" ? Value::integer(q) : Value::integer(a.as_int() - q * b.as_int());
      }
      const double q = std::floor(x / y);
      return op == "//" ? Value::real(q) : Value::real(x - q * y);
    }
    if (op == "**") {
      if (ints && b.as_int() >= 0) {
        long long r = 1;
        for (long long k = 0; k < b.as_int(); ++k) r *= a.as_int();
        return Value::integer(r);
      }
      if (x == 0 && y < 0) fail("DivisionByZero", "0.0 cannot be raised to a negative power");
      return Value::real(std::pow(x, y));
    }
    fail("InvalidArgs", "unknown operator " + op);
  }

  bool compare(const std::string& op, const Value& a, const Value& b) {
    if (op == "==") return values_equal(a, b);
    if (op == "!=") return !values_equal(a, b);
    int c;
    if (a.is_number() && b.is_number()) {
      c = a.num() < b.num() ? -1 : (a.num() > b.num() ? 1 : 0);
    } else if (a.t == Value::T::Str && b.t == Value::T::Str) {
      c = a.s.compare(b.s);
    } else {
      fail("InvalidArgs", "'" + op + "' not supported between " + type_name(a) + " and " + type_name(b));
    }
    if (op == "<") return c < 0;
    if (op == "<=") return c <= 0;
    if (op == ">") return c > 0;
    return c >= 0;
  }

  void expect_sample(const Node& receiver) {
    Value v = lookup(receiver.text);
    if (v.t != Value::T::Sample) fail("InvalidArgs", "'" + receiver.text + "' is not a Sample");
  }

  // ---- calls ----

  Bound bind(const std::string& target, const Signature& sig, const Node& arglist) {
    Bound b;
    b.slots.resize(sig.params.size());
    std::size_t pos = 0;
    for (const auto& a : arglist.children) {
      if (a.kind == NodeKind::KeywordArgument) {
        const std::string& name = a.child(0).text;
        std::size_t k = 0;
        while (k < sig.params.size() && sig.params[k].name != name) ++k;
        if (k == sig.params.size()) fail("InvalidArgs", target + "() got an unexpected keyword argument '" + name + "'");
        if (b.slots[k]) fail("InvalidArgs", target + "() got multiple values for argument '" + name + "'");
        b.slots[k] = eval(a.child(1));
      } else if (pos < sig.params.size()) {
        b.slots[pos++] = eval(a);
      } else if (sig.variadic) {
        b.rest.push_back(eval(a));
      } else {
        fail("InvalidArgs", target + "() takes " + std::to_string(sig.params.size()) + " positional arguments");
      }
    }
    for (std::size_t k = 0; k < sig.params.size(); ++k) {
      if (b.slots[k]) continue;
      switch (sig.params[k].default_kind) {
        case DefaultKind::Required:
          fail("InvalidArgs", target + "() missing required argument '" + sig.params[k].name + "'");
        case DefaultKind::None: b.slots[k] = Value::none(); break;
        case DefaultKind::Number: b.slots[k] = Value::real(sig.params[k].default_number); break;
      }
    }
    return b;
  }

  double number_arg(const Bound& b, std::size_t k, const std::string& what) {
    const Value& v = *b.slots[k];
    if (!v.is_number()) fail("InvalidArgs", what + " must be a number, got " + type_name(v));
    return v.num();
  }

  long long int_arg(const Bound& b, std::size_t k, const std::string& what) {
    const Value& v = *b.slots[k];
    if (v.is_intlike()) return v.as_int();
    if (v.t == Value::T::Float && v.f == std::floor(v.f)) return static_cast<long long>(v.f);
    fail("InvalidArgs", what + " must be an integer, got " + type_name(v));
  }

  List number_list(const Value& v, const std::string& what) {
    if (v.t != Value::T::List) fail("InvalidArgs", what + " must be a list");
    for (const auto& x : *v.list)
      if (!x.is_number()) fail("InvalidArgs", what + " must contain numbers");
    return *v.list;
  }

  Value call(const Node& n) {
    line_ = n.line;
    const std::string target = call_target(n);
    const Node& arglist = n.child(1);
    const Signature* sig = find_signature(target);
    if (!sig) return registry_call(target, arglist);
    const auto dot = target.find('.');
    if (dot != std::string::npos && target.compare(0, dot, "sam") == 0) expect_sample(n.child(0).child(0));
    Bound b = bind(target, *sig, arglist);
    if (halt_requested_) return Value::none();
    return dispatch(target, b);
  }

  // Registry-added targets have no simulator semantics; they are recorded.
  Value registry_call(const std::string& target, const Node& arglist) {
    json args = json::array();
    json kwargs = json::object();
    for (const auto& a : arglist.children) {
      if (a.kind == NodeKind::KeywordArgument)
        kwargs[a.child(0).text] = to_json(eval(a.child(1)));
      else
        args.push_back(to_json(eval(a)));
    }
    json j{{"name", target}, {"args", args}};
    if (!kwargs.empty()) j["kwargs"] = kwargs;
    emit(EventKind::ToolCall, std::move(j));
    return Value::none();
  }

  void measure(double exposure, bool saved) {
    if (exposure < 0) fail("InvalidArgs", "exposure_time must be non-negative");
    emit(saved ? EventKind::Measure : EventKind::Snap, json{{"exposure_s", exposure}, {"saved", saved}});
    advance(exposure + lim_.measure_overhead);
  }

  void move_to(const std::string& axis, double user_target) {
    if (axis == "x")
      st_.x = user_target + st_.origin_x;
    else if (axis == "y")
      st_.y = user_target + st_.origin_y;
    else if (axis == "th")
      st_.th = user_target + st_.origin_th;
    else if (axis == "phi")
      st_.phi = user_target;
    else
      fail("InvalidArgs", "unknown axis '" + axis + "'");
    emit(EventKind::MotorMove, json{{"axis", axis}, {"position", user_target}});
  }

  double user_position(const std::string& axis) {
    if (axis == "x") return st_.user_x();
    if (axis == "y") return st_.user_y();
    if (axis == "th") return st_.user_th();
    if (axis == "phi") return st_.phi;
    fail("InvalidArgs", "unknown axis '" + axis + "'");
  }

  Value make_range(double start, double stop, double step, bool ints) {
    if (step == 0) fail("InvalidArgs", "step must not be zero");
    const double span = std::ceil((stop - start) / step);
    const double count = std::max(0.0, span);
    if (count > static_cast<double>(lim_.max_steps)) fail("SimBudgetExceeded", "range too large");
    List items;
    items.reserve(static_cast<std::size_t>(count));
    for (std::size_t k = 0; k < static_cast<std::size_t>(count); ++k) {
      if (ints)
        items.push_back(Value::integer(static_cast<long long>(start) + static_cast<long long>(k) * static_cast<long long>(step)));
      else
        items.push_back(Value::real(start + static_cast<double>(k) * step));
    }
    return Value::make_list(std::move(items));
  }

  Value dispatch(const std::string& t, const Bound& b) {
    // Sample API
    if (t == "sam.measure" || t == "sam.snap") {
      measure(number_arg(b, 0, "exposure_time"), t == "sam.measure");
      return Value::none();
    }
    if (t == "sam.measureTimeSeries") {
      const double e = number_arg(b, 0, "exposure_time");
      const long long n = int_arg(b, 1, "num_frames");
      const double w = number_arg(b, 2, "wait_time");
      for (long long k = 0; k < n; ++k) {
        step();
        measure(e, true);
        advance(w);
      }
      return Value::none();
    }
    if (t == "sam.series_measure") {
      const long long n = int_arg(b, 0, "num_frames");
      const double e = number_arg(b, 1, "exposure_time");
      const double p = number_arg(b, 2, "exposure_period");
      const Value& w = *b.slots[3];
      if (!w.is_number() && w.t != Value::T::None) fail("InvalidArgs", "wait_time must be a number or None");
      if (p < e + 0.05 - 1e-9) fail("InvalidArgs", "exposure_period must be at least exposure_time + 0.05");
      for (long long k = 0; k < n; ++k) {
        step();
        emit(EventKind::SeriesFrame, json{{"frame", static_cast<double>(k)},
                                          {"exposure_s", e},
                                          {"exposure_period_s", p},
                                          {"wait_s", to_json(w)}});
        advance(p);
      }
      return Value::none();
    }
    if (t == "sam.measureSpots") {
      const long long n = int_arg(b, 0, "num_spots");
      const double amount = number_arg(b, 1, "translation_amount");
      const Value& axis = *b.slots[2];
      if (axis.t != Value::T::Str) fail("InvalidArgs", "axis must be a string");
      const double e = number_arg(b, 3, "exposure_time");
      for (long long k = 0; k < n; ++k) {
        step();
        move_to(axis.s, user_position(axis.s) + amount);
        measure(e, true);
      }
      return Value::none();
    }
    if (t == "sam.setLinkamRate") {
      const double r = number_arg(b, 0, "rate");
      if (!(r > 0)) fail("InvalidArgs", "ramp rate must be positive");
      st_.ramp_rate = r;
      emit(EventKind::RateSet, json{{"rate", r}});
      return Value::none();
    }
    if (t == "sam.setLinkamTemperature") {
      st_.temperature_setpoint = number_arg(b, 0, "temperature");
      emit(EventKind::TempSet, json{{"setpoint", st_.temperature_setpoint}});
      return Value::none();
    }
    if (t == "sam.linkamTemperature") {
      reads_clock_ = true;
      return Value::real(st_.temperature);
    }
    if (t == "sam.align") {
      st_.aligned = true;
      st_.th = st_.origin_th;
      emit(EventKind::Align, json::object());
      advance(lim_.align_duration);
      return Value::none();
    }
    if (t == "sam.measureIncidentAngle") {
      const double a = number_arg(b, 0, "angle");
      if (b.slots[1]->t == Value::T::None) fail("InvalidArgs", "measureIncidentAngle() requires exposure_time");
      const double e = number_arg(b, 1, "exposure_time");
      move_to("th", a);
      measure(e, true);
      return Value::none();
    }
    if (t == "sam.measureIncidentAngles") {
      if (b.slots[0]->t == Value::T::None || b.slots[1]->t == Value::T::None)
        fail("InvalidArgs", "measureIncidentAngles() requires angles and exposure_time");
      const List angles = number_list(*b.slots[0], "angles");
      const double e = number_arg(b, 1, "exposure_time");
      for (const auto& a : angles) {
        step();
        move_to("th", a.num());
        measure(e, true);
      }
      return Value::none();
    }
    if (t == "sam.setOrigin") {
      const Value& axes = *b.slots[0];
      if (axes.t != Value::T::List || axes.list->empty()) fail("InvalidArgs", "setOrigin() requires a non-empty list of axes");
      std::optional<List> positions;
      if (b.slots[1]->t != Value::T::None) {
        positions = number_list(*b.slots[1], "positions");
        if (positions->size() != axes.list->size()) fail("InvalidArgs", "positions must match axes in length");
      }
      for (std::size_t k = 0; k < axes.list->size(); ++k) {
        const Value& a = (*axes.list)[k];
        if (a.t != Value::T::Str) fail("InvalidArgs", "axes must be strings");
        double* raw = a.s == "x" ? &st_.x : a.s == "y" ? &st_.y : a.s == "th" ? &st_.th : nullptr;
        double* origin = a.s == "x" ? &st_.origin_x : a.s == "y" ? &st_.origin_y : a.s == "th" ? &st_.origin_th : nullptr;
        if (!raw) fail("InvalidArgs", "unknown axis '" + a.s + "'");
        *origin = positions ? (*positions)[k].num() : *raw;
        emit(EventKind::OriginSet, json{{"axis", a.s}, {"origin", *origin}});
      }
      return Value::none();
    }
    if (t == "sam.xabs") return move_to("x", number_arg(b, 0, "position")), Value::none();
    if (t == "sam.yabs") return move_to("y", number_arg(b, 0, "position")), Value::none();
    if (t == "sam.thabs") return move_to("th", number_arg(b, 0, "angle")), Value::none();
    if (t == "sam.phiabs") return move_to("phi", number_arg(b, 0, "angle")), Value::none();
    if (t == "sam.xr") return move_to("x", st_.user_x() + number_arg(b, 0, "offset")), Value::none();
    if (t == "sam.yr") return move_to("y", st_.user_y() + number_arg(b, 0, "offset")), Value::none();
    if (t == "sam.thr") return move_to("th", st_.user_th() + number_arg(b, 0, "offset")), Value::none();

    // Clock
    if (t == "time.time") {
      reads_clock_ = true;
      return Value::real(st_.sim_time);
    }
    if (t == "time.sleep") {
      advance(number_arg(b, 0, "seconds"));
      return Value::none();
    }

    // Ranges
    if (t == "np.arange" || t == "range") {
      std::vector<Value> given;
      for (const auto& s : b.slots)
        if (s->t != Value::T::None) given.push_back(*s);
      bool ints = true;
      for (const auto& v : given) {
        if (!v.is_number()) fail("InvalidArgs", t + "() arguments must be numbers");
        ints = ints && v.is_intlike();
      }
      if (t == "range" && !ints) fail("InvalidArgs", "range() arguments must be integers");
      double start = 0, stop = 0, stp = 1;
      if (given.size() == 1) {
        stop = given[0].num();
      } else {
        start = given[0].num();
        stop = given[1].num();
        if (given.size() == 3) stp = given[2].num();
      }
      return make_range(start, stop, stp, ints);
    }
    if (t == "np.linspace") {
      const double a = number_arg(b, 0, "start"), z = number_arg(b, 1, "stop");
      const long long n = int_arg(b, 2, "num");
      if (n < 0) fail("InvalidArgs", "num must be non-negative");
      if (static_cast<std::size_t>(n) > lim_.max_steps) fail("SimBudgetExceeded", "linspace too large");
      List items;
      for (long long k = 0; k < n; ++k)
        items.push_back(Value::real(n == 1 ? a : a + (z - a) * static_cast<double>(k) / static_cast<double>(n - 1)));
      return Value::make_list(std::move(items));
    }

    // Session tools
    if (t == "RE.abort" || t == "beam.off") {
      emit(EventKind::ToolCall, json{{"name", t}});
      halt_requested_ = true;
      return Value::none();
    }
    if (t == "Sample") {
      const Value& name = *b.slots[0];
      if (name.t != Value::T::Str) fail("InvalidArgs", "Sample() name must be a string");
      st_.sample_name = name.s;
      return Value::sample();
    }
    if (t == "wsam") {
      emit(EventKind::Output, json{{"text", "smx = " + text::format_number(st_.x) + "\nsmy = " +
                                                text::format_number(st_.y) + "\nsth = " + text::format_number(st_.th)}});
      return Value::none();
    }
    if (t == "wbs") {
      emit(EventKind::ToolCall, json{{"name", "wbs"}});
      return Value::none();
    }
    if (t == "detselect") {
      const Value& d = *b.slots[0];
      if (d.t != Value::T::Str) fail("InvalidArgs", "detselect() expects a detector name");
      st_.detector = d.s;
      emit(EventKind::ToolCall, json{{"name", "detselect"}, {"detector", d.s}});
      return Value::none();
    }

    // Builtins
    if (t == "print") {
      std::vector<std::string> parts;
      for (const auto& v : b.rest) parts.push_back(to_str(v));
      emit(EventKind::Output, json{{"text", text::join(parts, " ")}});
      return Value::none();
    }
    if (t == "abs") {
      const Value& v = *b.slots[0];
      if (!v.is_number()) fail("InvalidArgs", "bad operand type for abs()");
      return v.is_intlike() ? Value::integer(std::llabs(v.as_int())) : Value::real(std::abs(v.f));
    }
    if (t == "round") {
      const double x = number_arg(b, 0, "number");
      if (b.slots[1]->t == Value::T::None) return Value::integer(static_cast<long long>(std::nearbyint(x)));
      const double scale = std::pow(10.0, static_cast<double>(int_arg(b, 1, "ndigits")));
      return Value::real(std::nearbyint(x * scale) / scale);
    }
    if (t == "int") {
      const Value& v = *b.slots[0];
      if (v.t == Value::T::Str) {
        try {
          return Value::integer(std::stoll(v.s));
        } catch (const std::exception&) {
          fail("InvalidArgs", "invalid literal for int(): '" + v.s + "'");
        }
      }
      return Value::integer(static_cast<long long>(std::trunc(number_arg(b, 0, "x"))));
    }
    if (t == "float") {
      const Value& v = *b.slots[0];
      if (v.t == Value::T::Str) {
        try {
          return Value::real(std::stod(v.s));
        } catch (const std::exception&) {
          fail("InvalidArgs", "could not convert string to float: '" + v.s + "'");
        }
      }
      return Value::real(number_arg(b, 0, "x"));
    }
    if (t == "len") {
      const Value& v = *b.slots[0];
      if (v.t == Value::T::Str) return Value::integer(static_cast<long long>(v.s.size()));
      if (v.t == Value::T::List) return Value::integer(static_cast<long long>(v.list->size()));
      fail("InvalidArgs", "object of type " + type_name(v) + " has no len()");
    }
    if (t == "min" || t == "max") {
      List items = b.rest;
      if (items.size() == 1 && items[0].t == Value::T::List) items = *items[0].list;
      if (items.empty()) fail("InvalidArgs", t + "() arg is an empty sequence");
      Value best = items[0];
      for (std::size_t k = 1; k < items.size(); ++k) {
        if (t == "min" ? compare("<", items[k], best) : compare(">", items[k], best)) best = items[k];
      }
      return best;
    }
    fail("InvalidArgs", "no simulator semantics for " + t);
  }

  InstrumentState st_;
  Limits lim_;
  Trace trace_;
  std::map<std::string, Value> env_;
  std::size_t steps_ = 0;
  int line_ = 0;
  bool reads_clock_ = false;
  bool halt_requested_ = false;
  bool halted_ = false;
};

}  // namespace

ExecResult execute(const Program& p, const InstrumentState& s0, const Limits& limits) {
  if (!(s0.ramp_rate > 0)) throw SimError("InvalidArgs", "ramp_rate must be positive", 0);
  Interpreter interp(s0, limits);
  return interp.run(p);
}

}  // namespace beamassist::bcl
