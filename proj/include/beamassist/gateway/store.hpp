#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "beamassist/cogs.hpp"
#include "json.hpp"

struct sqlite3;

namespace beamassist::gateway {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

struct LogRow {
  std::string interaction_id;
  std::string session_id;
  std::string timestamp;
  std::string input_text;
  std::string input_mode = "text";  // text, audio, both
  std::string classifier_label;
  std::string cog_invoked;
  std::string cog_output;
  bool confirmed = false;
  std::optional<std::string> edited_output;
  std::optional<bool> executed_ok;
  std::string status;
  std::string error;
  std::map<std::string, double> latency_ms;
  json result = json::object();
};

json log_row_to_json(const LogRow& r);

// Text shown as the cog's output: code, protocol lines, tool, note or clarification.
std::string cog_output_text(const cogs::PendingAction& a);
LogRow log_row_from_action(const cogs::PendingAction& a, const std::string& input_mode = "text");

struct LogFilter {
  std::optional<std::string> session;
  std::optional<std::string> since;  // inclusive ISO-8601 bounds
  std::optional<std::string> until;
  std::optional<std::string> cog;
  std::optional<bool> confirmed;
};

struct FunctionRow {
  std::string id;
  json entry;
  std::string added_at;
  std::string added_by;
};

// SQLite in WAL mode. Every method serializes on an internal mutex.
class LogStore {
 public:
  // Throws Error("StorageUnavailable") or Error("SchemaMismatch").
  explicit LogStore(const std::string& path);
  ~LogStore();
  LogStore(const LogStore&) = delete;
  LogStore& operator=(const LogStore&) = delete;

  void ensure_session(const std::string& id, const std::string& started_at, const std::string& instrument);
  std::vector<std::string> sessions() const;

  // Insert or update by interaction_id; returns the row id.
  long long record(const LogRow& row, const std::optional<cogs::PendingAction>& action = std::nullopt);
  std::vector<LogRow> query_log(const LogFilter& f = {}) const;
  std::vector<cogs::PendingAction> load_actions() const;

  void record_function(const FunctionRow& f);
  std::vector<FunctionRow> functions() const;
  void record_note(const std::string& ts, const std::string& session, const std::string& text);
  std::vector<cogs::NoteRow> notes(const std::string& session = {}) const;

  std::string journal_mode() const;
  const std::string& path() const { return path_; }

 private:
  void exec(const std::string& sql) const;

  std::string path_;
  sqlite3* db_ = nullptr;
  mutable std::mutex mu_;
};

}  // namespace beamassist::gateway
