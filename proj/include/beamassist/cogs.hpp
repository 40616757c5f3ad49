#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "beamassist/analysis/engine.hpp"
#include "beamassist/bcl/interpreter.hpp"
#include "beamassist/clock.hpp"
#include "beamassist/llm.hpp"
#include "beamassist/registry.hpp"

namespace beamassist::cogs {

using json = nlohmann::ordered_json;
using registry::CommandClass;
using registry::PromptStyle;

inline constexpr const char* kMissed = "MISSED";

// Class name or "MISSED".
std::string label_name(const std::optional<CommandClass>& c);

// Total: every string maps to a class or nullopt (MISSED).
std::optional<CommandClass> parse_classifier_output(const std::string& text, PromptStyle style);

struct CogCall {
  std::shared_ptr<llm::Backend> backend;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::string model_id;
  std::optional<long long> seed;
};

struct Classification {
  std::optional<CommandClass> cls;
  std::string raw;
  double latency_s = 0;
};

// Backend failures surface as Error("ClassifierUnavailable").
Classification classify(const std::string& input, PromptStyle style, const registry::Registry& reg, const CogCall& call);

struct CodeCandidate {
  std::string code;
  std::string raw_model_output;
  std::vector<std::string> extraction_notes;
  bool executable = false;
  // Parse failure kind and message when not executable.
  std::string parse_error;
  double latency_s = 0;
};

json candidate_to_json(const CodeCandidate& c);

// Fence and comment stripping. Throws Error("EmptyCode").
CodeCandidate extract_code(const std::string& raw, const std::set<std::string>& extra_functions = {});
CodeCandidate operate(const std::string& input, const registry::Registry& reg, const CogCall& call);

// Throws Error("UnknownProtocol").
std::vector<analysis::ProtocolCommand> parse_analyst_reply(const std::string& reply);
std::vector<analysis::ProtocolCommand> analyze(const std::string& input, const registry::Registry& reg,
                                               const CogCall& call);

// Throws Error("MalformedRefinement").
registry::FunctionEntry parse_refinement(const std::string& reply, const registry::Registry& reg);
registry::FunctionEntry refine(const std::string& description, const registry::Registry& reg, const CogCall& call);

struct NoteRow {
  std::string timestamp;
  std::string session;
  std::string text;
};

// One CSV per session under `dir`: header timestamp,session,text.
class Notebook {
 public:
  explicit Notebook(std::string dir, WallClock clock = system_wall_clock());
  // Throws Error("StorageUnavailable").
  NoteRow take_note(const std::string& text, const std::string& session);
  std::string path_for(const std::string& session) const;
  std::vector<NoteRow> read(const std::string& session) const;

 private:
  std::string dir_;
  WallClock clock_;
  std::mutex mu_;
};

enum class ActionStatus { pending, confirmed, edited_confirmed, rejected, executed, failed };

std::string status_name(ActionStatus s);
ActionStatus status_from_name(const std::string& s);

struct PendingAction {
  std::string action_id;
  std::string session_id;
  std::string label;  // class name or MISSED
  std::string cog;    // Operator, Analyst, Notebook, ToolLauncher, Clarifier
  std::string input_text;
  json payload = json::object();
  std::string created_at;
  ActionStatus status = ActionStatus::pending;
  std::optional<std::string> edited;
  json result = json::object();
  std::string error;
  std::map<std::string, double> latency_ms;

  // Op, Ana and tool launches wait for a human; clarifications do not execute.
  bool executable() const;
  bool finalized() const;
};

json action_to_json(const PendingAction& a);
PendingAction action_from_json(const json& j);

struct ToolLauncherConfig {
  // Tool name -> shell command. Missing entries are logged and not run.
  std::map<std::string, std::string> commands;
};

struct CogConfig {
  PromptStyle classifier_style = PromptStyle::ONE_WORD;
  CogCall classifier, operator_, analyst, refiner;
  bcl::Limits sim_limits;
  bcl::InstrumentState initial_state;
  // Frame the Analyst works on; a synthetic ring frame when unset.
  std::optional<std::string> frame_path;
  std::string output_dir = "beamassist_out";
  std::string notebook_dir = "beamassist_out/notebook";
  ToolLauncherConfig tools;
};

// Persistence hooks used by the gateway.
struct ActionObserver {
  std::function<void(const PendingAction&)> on_change;
  std::function<void(const registry::Registry&, const registry::FunctionEntry&, const std::string&)> on_function_added;
};

class CogManager {
 public:
  CogManager(CogConfig cfg, registry::Registry reg, std::optional<std::string> registry_path = std::nullopt,
             WallClock clock = system_wall_clock());

  void set_observer(ActionObserver obs);

  // Workflow 1. Never throws for cog failures; those yield a failed action.
  PendingAction run_workflow1(const std::string& input, const std::string& session);

  // Throws Error("UnknownAction"), Error("AlreadyFinalized"),
  // Error("NotConfirmable") or Error("InvalidEdit").
  PendingAction confirm_action(const std::string& action_id, const std::optional<std::string>& edited = std::nullopt);
  PendingAction reject_action(const std::string& action_id);

  std::optional<PendingAction> find(const std::string& action_id) const;
  // Latest pending action for the session, if any.
  std::optional<PendingAction> pending_for(const std::string& session) const;
  std::vector<PendingAction> actions(const std::string& session = {}) const;

  // Crash recovery: confirmed-but-unexecuted actions come back as pending.
  void restore(std::vector<PendingAction> actions);

  // Workflow 2.
  registry::FunctionEntry refine_function(const std::string& description);
  registry::Registry commit_function(registry::FunctionEntry entry, const std::string& added_by = "console");

  registry::Registry registry_snapshot() const;
  bcl::InstrumentState instrument_state(const std::string& session) const;
  Notebook& notebook() { return notebook_; }
  const CogConfig& config() const { return cfg_; }

 private:
  PendingAction execute(PendingAction a);
  std::mutex& session_mutex(const std::string& session);
  void publish(const PendingAction& a);
  const analysis::DetectorFrame& frame();
  std::string next_id();

  CogConfig cfg_;
  registry::Registry reg_;
  std::optional<std::string> registry_path_;
  WallClock clock_;
  Notebook notebook_;
  ActionObserver observer_;

  mutable std::mutex mu_;
  std::map<std::string, std::unique_ptr<std::mutex>> session_mu_;
  std::map<std::string, PendingAction> actions_;
  std::vector<std::string> order_;
  std::map<std::string, bcl::InstrumentState> states_;
  std::optional<analysis::DetectorFrame> frame_;
  std::mutex frame_mu_;
  long long counter_ = 0;
};

}  // namespace beamassist::cogs
