#include "beamassist/cogs.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "beamassist/bcl/ast.hpp"
#include "beamassist/error.hpp"
#include "beamassist/text.hpp"

namespace beamassist::cogs {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) { return std::chrono::duration<double, std::milli>(Clock::now() - t0).count(); }

std::string strip_punct(std::string s) {
  while (!s.empty() && std::ispunct(static_cast<unsigned char>(s.back()))) s.pop_back();
  std::size_t i = 0;
  while (i < s.size() && std::ispunct(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

llm::ChatResponse call_backend(const CogCall& call, const std::string& system, const std::string& user) {
  if (!call.backend) throw Error("BadConfig", "cog has no backend");
  llm::ChatRequest req;
  req.system_prompt = system;
  req.user_prompt = user;
  req.temperature = call.temperature;
  req.max_tokens = call.max_tokens;
  req.model_id = call.model_id;
  req.seed = call.seed;
  return call.backend->complete(req);
}

// Content of the first fenced block, or nullopt.
std::optional<std::string> fenced_block(const std::string& raw) {
  const auto open = raw.find("```");
  if (open == std::string::npos) return std::nullopt;
  auto body = raw.find('\n', open);
  if (body == std::string::npos) return std::string{};
  ++body;
  const auto close = raw.find("```", body);
  return raw.substr(body, close == std::string::npos ? std::string::npos : close - body);
}

std::string trim_blank_edges(const std::string& s) {
  auto lines = text::split_lines(s);
  while (!lines.empty() && text::trim(lines.front()).empty()) lines.erase(lines.begin());
  while (!lines.empty() && text::trim(lines.back()).empty()) lines.pop_back();
  for (auto& l : lines)
    while (!l.empty() && std::isspace(static_cast<unsigned char>(l.back()))) l.pop_back();
  return text::join(lines, "\n");
}

std::string slug(const std::string& s) {
  std::string out;
  for (unsigned char c : s) out += std::isalnum(c) ? static_cast<char>(std::tolower(c)) : '_';
  while (out.find("__") != std::string::npos) out.replace(out.find("__"), 2, "_");
  while (!out.empty() && out.back() == '_') out.pop_back();
  while (!out.empty() && out.front() == '_') out.erase(out.begin());
  return out.empty() ? "function" : out;
}

// Minimal RFC 4180 reader.
std::vector<std::vector<std::string>> parse_csv(const std::string& s) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const char c = s[i];
    if (quoted) {
      if (c == '"' && i + 1 < s.size() && s[i + 1] == '"') {
        field += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field += c;
      }
      continue;
    }
    any = true;
    if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < s.size() && s[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      field += c;
    }
  }
  if (any || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string label_name(const std::optional<CommandClass>& c) { return c ? registry::class_name(*c) : kMissed; }

std::optional<CommandClass> parse_classifier_output(const std::string& text, PromptStyle style) {
  switch (style) {
    case PromptStyle::ONE_WORD: {
      const auto toks = text::split_whitespace(text);
      if (toks.empty()) return std::nullopt;
      const std::string word = text::to_lower(strip_punct(toks.front()));
      for (CommandClass c : registry::all_classes())
        if (text::to_lower(registry::class_name(c)) == word) return c;
      return std::nullopt;
    }
    case PromptStyle::ID: {
      for (std::size_t i = 0; i < text.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(text[i]))) continue;
        std::size_t j = i;
        while (j < text.size() && std::isdigit(static_cast<unsigned char>(text[j]))) ++j;
        const std::string num = text.substr(i, j - i);
        if (num.size() == 1 && num[0] <= '4') return registry::all_classes()[num[0] - '0'];
        return std::nullopt;
      }
      return std::nullopt;
    }
    case PromptStyle::LIST: {
      const auto open = text.find('[');
      if (open == std::string::npos) return std::nullopt;
      const auto close = text.find(']', open);
      if (close == std::string::npos) return std::nullopt;
      std::string inner = text.substr(open + 1, close - open - 1);
      for (char& c : inner)
        if (c == ',') c = ' ';
      const auto parts = text::split_whitespace(inner);
      if (parts.size() != 5) return std::nullopt;
      int one = -1;
      for (int k = 0; k < 5; ++k) {
        if (parts[k] == "1") {
          if (one >= 0) return std::nullopt;
          one = k;
        } else if (parts[k] != "0") {
          return std::nullopt;
        }
      }
      if (one < 0) return std::nullopt;
      return registry::all_classes()[one];
    }
  }
  return std::nullopt;
}

Classification classify(const std::string& input, PromptStyle style, const registry::Registry& reg, const CogCall& call) {
  if (text::trim(input).empty()) throw Error("InvalidArgs", "empty input");
  const std::string prompt = registry::build_classifier_prompt(reg, style);
  llm::ChatResponse resp;
  try {
    resp = call_backend(call, prompt, input);
  } catch (const Error& e) {
    throw Error("ClassifierUnavailable", e.what());
  }
  return {parse_classifier_output(resp.text, style), resp.text, resp.latency_s};
}

json candidate_to_json(const CodeCandidate& c) {
  return json{{"type", "code"},
              {"code", c.code},
              {"raw_model_output", c.raw_model_output},
              {"extraction_notes", c.extraction_notes},
              {"executable", c.executable},
              {"parse_error", c.parse_error}};
}

CodeCandidate extract_code(const std::string& raw, const std::set<std::string>& extra_functions) {
  CodeCandidate c;
  c.raw_model_output = raw;
  std::string code = raw;
  if (auto block = fenced_block(raw)) {
    code = *block;
    c.extraction_notes.push_back("stripped markdown code fence");
  }
  std::vector<std::string> kept;
  bool dropped = false;
  for (const auto& line : text::split_lines(code)) {
    if (text::trim(line).rfind('#', 0) == 0) {
      dropped = true;
      continue;
    }
    kept.push_back(line);
  }
  if (dropped) c.extraction_notes.push_back("stripped comment lines");
  code = text::join(kept, "\n");
  const std::string trimmed = trim_blank_edges(code);
  if (trimmed != code) c.extraction_notes.push_back("trimmed blank edges");
  c.code = trimmed;
  if (c.code.empty()) throw Error("EmptyCode", "no code left after extraction");
  if (c.code.find("UNKNOWN FUNCTION:") != std::string::npos) {
    c.parse_error = "UnknownFunction: model reported an unknown function";
    return c;
  }
  try {
    bcl::ParseOptions opts;
    opts.extra_functions = extra_functions;
    bcl::parse_program(c.code, opts);
    c.executable = true;
  } catch (const bcl::ParseError& e) {
    c.parse_error = e.what();
  }
  return c;
}

CodeCandidate operate(const std::string& input, const registry::Registry& reg, const CogCall& call) {
  const auto resp = call_backend(call, registry::build_operator_prompt(reg), input);
  CodeCandidate c = extract_code(resp.text, registry::registry_functions(reg));
  c.latency_s = resp.latency_s;
  return c;
}

std::vector<analysis::ProtocolCommand> parse_analyst_reply(const std::string& reply) {
  std::string body = reply;
  if (auto block = fenced_block(reply)) body = *block;
  if (text::trim(body).empty()) throw Error("UnknownProtocol", "empty analyst reply");
  try {
    auto cmds = analysis::parse_protocols(body);
    if (cmds.empty()) throw Error("UnknownProtocol", "no protocol in \"" + reply + "\"");
    return cmds;
  } catch (const Error& e) {
    if (e.kind() == "UnknownProtocol") throw;
    throw Error("UnknownProtocol", e.detail());
  }
}

std::vector<analysis::ProtocolCommand> analyze(const std::string& input, const registry::Registry& reg,
                                               const CogCall& call) {
  return parse_analyst_reply(call_backend(call, registry::build_analyst_prompt(reg), input).text);
}

registry::FunctionEntry parse_refinement(const std::string& reply, const registry::Registry& reg) {
  std::string body = reply;
  if (auto block = fenced_block(reply)) body = *block;
  const auto open = body.find('{');
  const auto close = body.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open)
    throw Error("MalformedRefinement", "reply is not a JSON object: " + reply);
  json j;
  try {
    j = json::parse(body.substr(open, close - open + 1));
  } catch (const json::exception&) {
    throw Error("MalformedRefinement", "reply is not valid JSON: " + reply);
  }
  if (!j.is_object() || j.size() != 2 || !j.contains("input") || !j.contains("output") || !j["input"].is_string() ||
      !j["output"].is_string())
    throw Error("MalformedRefinement", "expected exactly the string keys input and output: " + reply);
  registry::FunctionEntry e;
  e.input = j["input"].get<std::string>();
  e.output = j["output"].get<std::string>();
  e.command_class = CommandClass::Op;
  e.unchecked = true;
  const auto paren = e.output.find('(');
  const auto close_paren = e.output.find(')');
  if (paren != std::string::npos && close_paren != std::string::npos && paren < close_paren &&
      e.output.find('\n') == std::string::npos)
    e.signature = e.output.substr(0, close_paren + 1);
  std::string base = slug(paren == std::string::npos ? e.input : e.output.substr(0, paren));
  if (base.rfind("sam_", 0) == 0) base = base.substr(4);
  e.id = base;
  for (int k = 2; reg.find(e.id); ++k) e.id = base + "_" + std::to_string(k);
  return e;
}

registry::FunctionEntry refine(const std::string& description, const registry::Registry& reg, const CogCall& call) {
  return parse_refinement(call_backend(call, registry::build_refiner_prompt(reg), description).text, reg);
}

// ---- notebook ----

Notebook::Notebook(std::string dir, WallClock clock) : dir_(std::move(dir)), clock_(std::move(clock)) {}

std::string Notebook::path_for(const std::string& session) const {
  return (std::filesystem::path(dir_) / ("notebook_" + slug(session) + ".csv")).string();
}

NoteRow Notebook::take_note(const std::string& text, const std::string& session) {
  std::lock_guard lock(mu_);
  NoteRow row{iso8601_utc(clock_()), session, text};
  const std::string path = path_for(session);
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error("StorageUnavailable", "cannot open notebook " + path);
  if (fresh) out << "timestamp,session,text\r\n";
  out << text::csv_field(row.timestamp) << ',' << text::csv_field(row.session) << ',' << text::csv_field(row.text)
      << "\r\n";
  out.flush();
  if (!out) throw Error("StorageUnavailable", "write failed for " + path);
  return row;
}

std::vector<NoteRow> Notebook::read(const std::string& session) const {
  std::ifstream in(path_for(session), std::ios::binary);
  if (!in) return {};
  std::ostringstream ss;
  ss << in.rdbuf();
  std::vector<NoteRow> rows;
  const auto recs = parse_csv(ss.str());
  for (std::size_t i = 1; i < recs.size(); ++i)
    if (recs[i].size() == 3) rows.push_back({recs[i][0], recs[i][1], recs[i][2]});
  return rows;
}

// ---- actions ----

std::string status_name(ActionStatus s) {
  switch (s) {
    case ActionStatus::pending: return "pending";
    case ActionStatus::confirmed: return "confirmed";
    case ActionStatus::edited_confirmed: return "edited_confirmed";
    case ActionStatus::rejected: return "rejected";
    case ActionStatus::executed: return "executed";
    case ActionStatus::failed: return "failed";
  }
  return "?";
}

ActionStatus status_from_name(const std::string& s) {
  for (auto st : {ActionStatus::pending, ActionStatus::confirmed, ActionStatus::edited_confirmed, ActionStatus::rejected,
                  ActionStatus::executed, ActionStatus::failed})
    if (status_name(st) == s) return st;
  throw Error("InvalidAction", "unknown status '" + s + "'");
}

bool PendingAction::executable() const {
  const std::string type = payload.value("type", "");
  return type == "code" || type == "protocol" || type == "tool";
}

bool PendingAction::finalized() const {
  return status == ActionStatus::rejected || status == ActionStatus::executed || status == ActionStatus::failed;
}

json action_to_json(const PendingAction& a) {
  json j{{"action_id", a.action_id},   {"session_id", a.session_id}, {"label", a.label},
         {"cog", a.cog},               {"input_text", a.input_text}, {"payload", a.payload},
         {"created_at", a.created_at}, {"status", status_name(a.status)}};
  j["edited"] = a.edited ? json(*a.edited) : json(nullptr);
  j["result"] = a.result;
  j["error"] = a.error;
  j["latency_ms"] = json::object();
  for (const auto& [k, v] : a.latency_ms) j["latency_ms"][k] = v;
  return j;
}

PendingAction action_from_json(const json& j) {
  PendingAction a;
  try {
    a.action_id = j.at("action_id").get<std::string>();
    a.session_id = j.at("session_id").get<std::string>();
    a.label = j.value("label", "");
    a.cog = j.value("cog", "");
    a.input_text = j.value("input_text", "");
    a.payload = j.value("payload", json::object());
    a.created_at = j.value("created_at", "");
    a.status = status_from_name(j.value("status", "pending"));
    if (j.contains("edited") && j["edited"].is_string()) a.edited = j["edited"].get<std::string>();
    a.result = j.value("result", json::object());
    a.error = j.value("error", "");
    if (j.contains("latency_ms"))
      for (const auto& [k, v] : j["latency_ms"].items()) a.latency_ms[k] = v.get<double>();
  } catch (const json::exception& e) {
    throw Error("InvalidAction", e.what());
  }
  return a;
}

// ---- manager ----

CogManager::CogManager(CogConfig cfg, registry::Registry reg, std::optional<std::string> registry_path, WallClock clock)
    : cfg_(std::move(cfg)),
      reg_(std::move(reg)),
      registry_path_(std::move(registry_path)),
      clock_(std::move(clock)),
      notebook_(cfg_.notebook_dir, clock_) {}

void CogManager::set_observer(ActionObserver obs) { observer_ = std::move(obs); }

std::mutex& CogManager::session_mutex(const std::string& session) {
  std::lock_guard lock(mu_);
  auto& m = session_mu_[session];
  if (!m) m = std::make_unique<std::mutex>();
  return *m;
}

void CogManager::publish(const PendingAction& a) {
  {
    std::lock_guard lock(mu_);
    if (!actions_.count(a.action_id)) order_.push_back(a.action_id);
    actions_[a.action_id] = a;
  }
  if (observer_.on_change) observer_.on_change(a);
}

std::string CogManager::next_id() {
  std::lock_guard lock(mu_);
  char buf[32];
  std::snprintf(buf, sizeof buf, "act-%06lld", ++counter_);
  return buf;
}

registry::Registry CogManager::registry_snapshot() const {
  std::lock_guard lock(mu_);
  return reg_;
}

bcl::InstrumentState CogManager::instrument_state(const std::string& session) const {
  std::lock_guard lock(mu_);
  auto it = states_.find(session);
  return it == states_.end() ? cfg_.initial_state : it->second;
}

PendingAction CogManager::run_workflow1(const std::string& input, const std::string& session) {
  std::lock_guard session_lock(session_mutex(session));
  const registry::Registry reg = registry_snapshot();

  PendingAction a;
  a.action_id = next_id();
  a.session_id = session;
  a.input_text = input;
  a.created_at = iso8601_utc(clock_());

  // A new input answers any open clarification request.
  for (auto& old : actions(session))
    if (old.status == ActionStatus::pending && !old.executable()) {
      old.status = ActionStatus::rejected;
      old.result = json{{"superseded_by", a.action_id}};
      publish(old);
    }

  try {
    auto t0 = Clock::now();
    const Classification cls = classify(input, cfg_.classifier_style, reg, cfg_.classifier);
    a.latency_ms["classifier"] = ms_since(t0);
    a.label = label_name(cls.cls);
    t0 = Clock::now();
    if (!cls.cls) {
      a.cog = "Clarifier";
      a.payload = json{{"type", "clarification"},
                       {"message", "The request could not be matched to a command type. Please rephrase it."},
                       {"classifier_output", cls.raw}};
    } else {
      switch (*cls.cls) {
        case CommandClass::Op: {
          a.cog = "Operator";
          a.payload = candidate_to_json(operate(input, reg, cfg_.operator_));
          break;
        }
        case CommandClass::Ana: {
          a.cog = "Analyst";
          json cmds = json::array();
          for (const auto& c : analyze(input, reg, cfg_.analyst)) cmds.push_back(c.to_string());
          a.payload = json{{"type", "protocol"}, {"commands", cmds}};
          break;
        }
        case CommandClass::Notebook: {
          a.cog = "Notebook";
          const NoteRow row = notebook_.take_note(input, session);
          a.payload = json{{"type", "note"}, {"text", row.text}};
          a.result = json{{"timestamp", row.timestamp}, {"session", row.session}, {"text", row.text},
                          {"file", notebook_.path_for(session)}};
          a.status = ActionStatus::executed;
          break;
        }
        case CommandClass::gpcam:
        case CommandClass::xicam: {
          a.cog = "ToolLauncher";
          a.payload = json{{"type", "tool"}, {"tool", registry::class_name(*cls.cls)}};
          break;
        }
      }
    }
    a.latency_ms[a.cog.empty() ? "cog" : a.cog] = ms_since(t0);
  } catch (const Error& e) {
    a.status = ActionStatus::failed;
    a.error = e.what();
    if (a.label.empty()) a.label = kMissed;
  }
  publish(a);
  return a;
}

PendingAction CogManager::confirm_action(const std::string& action_id, const std::optional<std::string>& edited) {
  auto found = find(action_id);
  if (!found) throw Error("UnknownAction", "no action " + action_id);
  std::lock_guard session_lock(session_mutex(found->session_id));
  PendingAction a = *find(action_id);
  if (a.finalized() || a.status != ActionStatus::pending)
    throw Error("AlreadyFinalized", action_id + " is " + status_name(a.status));
  if (!a.executable()) throw Error("NotConfirmable", action_id + " carries no executable payload");

  const std::string type = a.payload["type"].get<std::string>();
  if (edited) {
    const registry::Registry reg = registry_snapshot();
    try {
      if (type == "code") {
        bcl::ParseOptions opts;
        opts.extra_functions = registry::registry_functions(reg);
        bcl::parse_program(*edited, opts);
      } else if (type == "protocol") {
        analysis::parse_protocols(*edited);
      } else if (*edited != "gpcam" && *edited != "xicam") {
        throw Error("InvalidEdit", "unknown tool '" + *edited + "'");
      }
    } catch (const Error& e) {
      throw Error("InvalidEdit", e.what());
    }
    a.edited = *edited;
    a.status = ActionStatus::edited_confirmed;
  } else {
    if (type == "code" && !a.payload.value("executable", false))
      throw Error("NotConfirmable", "the generated code does not parse; edit it before confirming");
    a.status = ActionStatus::confirmed;
  }
  publish(a);
  a = execute(std::move(a));
  publish(a);
  return a;
}

PendingAction CogManager::reject_action(const std::string& action_id) {
  auto found = find(action_id);
  if (!found) throw Error("UnknownAction", "no action " + action_id);
  std::lock_guard session_lock(session_mutex(found->session_id));
  PendingAction a = *find(action_id);
  if (a.status != ActionStatus::pending) throw Error("AlreadyFinalized", action_id + " is " + status_name(a.status));
  a.status = ActionStatus::rejected;
  publish(a);
  return a;
}

const analysis::DetectorFrame& CogManager::frame() {
  std::lock_guard lock(frame_mu_);
  if (!frame_) {
    if (cfg_.frame_path) {
      frame_ = analysis::read_frame(*cfg_.frame_path);
    } else {
      analysis::SynthSpec spec;
      spec.rings = {analysis::Ring{1.5, 1000.0, 0.05}};
      spec.background = 1.0;
      spec.noise_seed = 1;
      frame_ = analysis::synth_frame(analysis::DetectorGeometry{}, spec);
    }
  }
  return *frame_;
}

PendingAction CogManager::execute(PendingAction a) {
  const std::string type = a.payload["type"].get<std::string>();
  const auto t0 = Clock::now();
  try {
    if (type == "code") {
      const std::string code = a.edited.value_or(a.payload["code"].get<std::string>());
      bcl::ParseOptions opts;
      opts.extra_functions = registry::registry_functions(registry_snapshot());
      const bcl::Program prog = bcl::parse_program(code, opts);
      const bcl::InstrumentState s0 = instrument_state(a.session_id);
      try {
        const bcl::ExecResult r = bcl::execute(prog, s0, cfg_.sim_limits);
        json events = json::array();
        for (const auto& e : r.trace.events) events.push_back(bcl::event_to_json(e));
        a.result = json{{"trace", events}, {"state", bcl::state_to_json(r.state)}, {"halted", r.halted}};
        std::lock_guard lock(mu_);
        states_[a.session_id] = r.state;
      } catch (const bcl::SimError& e) {
        json events = json::array();
        for (const auto& ev : e.partial_trace.events) events.push_back(bcl::event_to_json(ev));
        a.result = json{{"trace", events}, {"state", bcl::state_to_json(e.partial_state)}};
        std::lock_guard lock(mu_);
        states_[a.session_id] = e.partial_state;
        throw;
      }
    } else if (type == "protocol") {
      std::vector<analysis::ProtocolCommand> cmds;
      if (a.edited) {
        cmds = analysis::parse_protocols(*a.edited);
      } else {
        for (const auto& c : a.payload["commands"]) {
          auto parsed = analysis::parse_protocols(c.get<std::string>());
          cmds.insert(cmds.end(), parsed.begin(), parsed.end());
        }
      }
      const auto& f = frame();
      json results = json::array();
      const std::string dir = (std::filesystem::path(cfg_.output_dir) / a.action_id).string();
      for (const auto& c : cmds) {
        const auto r = analysis::dispatch_protocol(c, f, dir);
        json one{{"command", r.command.to_string()}, {"summary", r.summary}, {"files", r.files}};
        if (r.fit) one["fit"] = analysis::peak_fit_to_json(*r.fit);
        results.push_back(one);
      }
      a.result = json{{"results", results}};
    } else if (type == "tool") {
      const std::string tool = a.edited.value_or(a.payload["tool"].get<std::string>());
      auto it = cfg_.tools.commands.find(tool);
      if (it == cfg_.tools.commands.end() || it->second.empty()) {
        a.result = json{{"tool", tool}, {"launched", false}, {"note", "no launcher configured; logged only"}};
      } else {
        const int rc = std::system(it->second.c_str());
        a.result = json{{"tool", tool}, {"launched", true}, {"command", it->second}, {"exit_code", rc}};
        if (rc != 0) throw Error("ToolLaunchFailed", it->second + " exited with " + std::to_string(rc));
      }
    }
    a.status = ActionStatus::executed;
  } catch (const Error& e) {
    a.status = ActionStatus::failed;
    a.error = e.what();
  }
  a.latency_ms["execute"] = ms_since(t0);
  return a;
}

std::optional<PendingAction> CogManager::find(const std::string& action_id) const {
  std::lock_guard lock(mu_);
  auto it = actions_.find(action_id);
  if (it == actions_.end()) return std::nullopt;
  return it->second;
}

std::optional<PendingAction> CogManager::pending_for(const std::string& session) const {
  std::lock_guard lock(mu_);
  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    const auto& a = actions_.at(*it);
    if (a.session_id == session && a.status == ActionStatus::pending) return a;
  }
  return std::nullopt;
}

std::vector<PendingAction> CogManager::actions(const std::string& session) const {
  std::lock_guard lock(mu_);
  std::vector<PendingAction> out;
  for (const auto& id : order_) {
    const auto& a = actions_.at(id);
    if (session.empty() || a.session_id == session) out.push_back(a);
  }
  return out;
}

void CogManager::restore(std::vector<PendingAction> restored) {
  std::lock_guard lock(mu_);
  for (auto& a : restored) {
    if (a.status == ActionStatus::confirmed || a.status == ActionStatus::edited_confirmed) {
      a.status = ActionStatus::pending;
      a.edited.reset();
    }
    const auto dash = a.action_id.rfind('-');
    if (dash != std::string::npos) {
      try {
        counter_ = std::max(counter_, std::stoll(a.action_id.substr(dash + 1)));
      } catch (const std::exception&) {
      }
    }
    if (!actions_.count(a.action_id)) order_.push_back(a.action_id);
    actions_[a.action_id] = std::move(a);
  }
}

registry::FunctionEntry CogManager::refine_function(const std::string& description) {
  const registry::Registry reg = registry_snapshot();
  return refine(description, reg, cfg_.refiner);
}

registry::Registry CogManager::commit_function(registry::FunctionEntry entry, const std::string& added_by) {
  registry::Registry next;
  {
    std::lock_guard lock(mu_);
    next = registry::append_function(reg_, entry);
    if (registry_path_) registry::save_registry(next, *registry_path_);
    reg_ = next;
  }
  if (observer_.on_function_added) observer_.on_function_added(next, entry, added_by);
  return next;
}

}  // namespace beamassist::cogs
