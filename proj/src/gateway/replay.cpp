#include <unistd.h>

#include <filesystem>

#include "beamassist/error.hpp"
#include "beamassist/gateway/service.hpp"

namespace beamassist::gateway {

namespace fs = std::filesystem;

namespace {

// Drops paths, timestamps and cross-references that legitimately differ
// between runs.
json comparable(const json& j) {
  static const std::set<std::string> drop = {"files", "file", "timestamp", "superseded_by"};
  if (j.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : j.items())
      if (!drop.count(k)) out[k] = comparable(v);
    return out;
  }
  if (j.is_array()) {
    json out = json::array();
    for (const auto& v : j) out.push_back(comparable(v));
    return out;
  }
  return j;
}

}  // namespace

json replay_to_json(const ReplayReport& r) {
  json steps = json::array();
  for (const auto& s : r.steps)
    steps.push_back(json{{"interaction_id", s.interaction_id},
                         {"input_text", s.input_text},
                         {"logged_output", s.logged_output},
                         {"replayed_output", s.replayed_output},
                         {"identical", s.identical}});
  return json{{"session", r.session}, {"identical", r.identical}, {"steps", steps}};
}

ReplayReport replay_session(const GatewayConfig& cfg, const std::string& session) {
  std::vector<LogRow> rows;
  {
    LogStore store(cfg.db_path);
    rows = store.query_log({session, {}, {}, {}, {}});
  }
  if (rows.empty()) throw Error("UnknownSession", "no logged interactions for session '" + session + "'");

  const fs::path scratch = fs::temp_directory_path() / ("beamassist_replay_" + std::to_string(::getpid()));
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  GatewayConfig c = cfg;
  c.db_path = (scratch / "replay.db").string();
  c.registry_out = (scratch / "registry.json").string();
  if (fs::exists(cfg.registry_out)) fs::copy_file(cfg.registry_out, c.registry_out);
  c.cogs.output_dir = (scratch / "out").string();
  c.cogs.notebook_dir = (scratch / "notebook").string();
  c.cogs.tools.commands.clear();
  c.transport = "inprocess";
  c.corpus_dir.reset();

  ReplayReport report;
  report.session = session;
  {
    cogs::CogManager cogs(c.cogs, registry::load_registry(fs::exists(c.registry_out) ? c.registry_out : c.registry_path),
                          c.registry_out);
    for (const auto& row : rows) {
      ReplayStep step;
      step.interaction_id = row.interaction_id;
      step.input_text = row.input_text;
      step.logged_output = row.cog_output;
      step.logged_result = row.result;
      auto a = cogs.run_workflow1(row.input_text, session);
      if (row.confirmed && a.status == cogs::ActionStatus::pending) {
        try {
          a = cogs.confirm_action(a.action_id, row.edited_output);
        } catch (const Error& e) {
          a.error = e.what();
        }
      } else if (row.status == "rejected" && a.status == cogs::ActionStatus::pending && a.executable()) {
        a = cogs.reject_action(a.action_id);
      }
      step.replayed_output = cog_output_text(a);
      step.replayed_result = a.result;
      step.identical = step.replayed_output == step.logged_output &&
                       comparable(step.replayed_result) == comparable(step.logged_result);
      report.identical = report.identical && step.identical;
      report.steps.push_back(std::move(step));
    }
  }
  std::error_code ec;
  fs::remove_all(scratch, ec);
  return report;
}

}  // namespace beamassist::gateway
