#include "beamassist/gateway/store.hpp"

#include <sqlite3.h>

#include <filesystem>

#include "beamassist/error.hpp"
#include "beamassist/text.hpp"

namespace beamassist::gateway {

namespace {

constexpr const char* kSchema = R"sql(
CREATE TABLE meta(key TEXT PRIMARY KEY, value TEXT NOT NULL);
CREATE TABLE sessions(id TEXT PRIMARY KEY, started_at TEXT NOT NULL, instrument TEXT NOT NULL);
CREATE TABLE interactions(
  row_id INTEGER PRIMARY KEY AUTOINCREMENT,
  interaction_id TEXT NOT NULL UNIQUE,
  session_id TEXT NOT NULL,
  timestamp TEXT NOT NULL,
  input_text TEXT NOT NULL,
  input_mode TEXT NOT NULL,
  classifier_label TEXT NOT NULL,
  cog_invoked TEXT NOT NULL,
  cog_output TEXT NOT NULL,
  confirmed INTEGER NOT NULL,
  edited_output TEXT,
  executed_ok INTEGER,
  status TEXT NOT NULL,
  error TEXT NOT NULL,
  latency_ms TEXT NOT NULL,
  result TEXT NOT NULL,
  action TEXT);
CREATE INDEX interactions_session ON interactions(session_id, timestamp);
CREATE TABLE functions(row_id INTEGER PRIMARY KEY AUTOINCREMENT, id TEXT NOT NULL, entry TEXT NOT NULL,
                       added_at TEXT NOT NULL, added_by TEXT NOT NULL);
CREATE TABLE notes(row_id INTEGER PRIMARY KEY AUTOINCREMENT, ts TEXT NOT NULL, session TEXT NOT NULL, text TEXT NOT NULL);
)sql";

class Stmt {
 public:
  Stmt(sqlite3* db, const std::string& sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql.c_str(), -1, &s_, nullptr) != SQLITE_OK)
      throw Error("StorageUnavailable", std::string("prepare failed: ") + sqlite3_errmsg(db));
  }
  ~Stmt() { sqlite3_finalize(s_); }
  Stmt(const Stmt&) = delete;
  Stmt& operator=(const Stmt&) = delete;

  Stmt& bind(int i, const std::string& v) {
    sqlite3_bind_text(s_, i, v.c_str(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
    return *this;
  }
  Stmt& bind(int i, long long v) {
    sqlite3_bind_int64(s_, i, v);
    return *this;
  }
  Stmt& bind_null(int i) {
    sqlite3_bind_null(s_, i);
    return *this;
  }
  template <class T>
  Stmt& bind(int i, const std::optional<T>& v) {
    return v ? bind(i, *v) : bind_null(i);
  }
  // True while rows remain.
  bool step() {
    const int rc = sqlite3_step(s_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw Error("StorageUnavailable", std::string("step failed: ") + sqlite3_errmsg(db_));
  }
  std::string text(int c) const {
    const auto* p = sqlite3_column_text(s_, c);
    return p ? reinterpret_cast<const char*>(p) : "";
  }
  bool is_null(int c) const { return sqlite3_column_type(s_, c) == SQLITE_NULL; }
  long long integer(int c) const { return sqlite3_column_int64(s_, c); }

 private:
  sqlite3* db_;
  sqlite3_stmt* s_ = nullptr;
};

json latency_json(const std::map<std::string, double>& m) {
  json j = json::object();
  for (const auto& [k, v] : m) j[k] = v;
  return j;
}

}  // namespace

json log_row_to_json(const LogRow& r) {
  json j{{"interaction_id", r.interaction_id}, {"session_id", r.session_id},
         {"timestamp", r.timestamp},           {"input_text", r.input_text},
         {"input_mode", r.input_mode},         {"classifier_label", r.classifier_label},
         {"cog_invoked", r.cog_invoked},       {"cog_output", r.cog_output},
         {"confirmed", r.confirmed}};
  j["edited_output"] = r.edited_output ? json(*r.edited_output) : json(nullptr);
  j["executed_ok"] = r.executed_ok ? json(*r.executed_ok) : json(nullptr);
  j["status"] = r.status;
  j["error"] = r.error;
  j["latency_ms"] = latency_json(r.latency_ms);
  j["result"] = r.result;
  return j;
}

std::string cog_output_text(const cogs::PendingAction& a) {
  const std::string type = a.payload.value("type", "");
  if (type == "code") return a.payload.value("code", "");
  if (type == "protocol") {
    std::vector<std::string> lines;
    for (const auto& c : a.payload["commands"]) lines.push_back(c.get<std::string>());
    return text::join(lines, "\n");
  }
  if (type == "tool") return a.payload.value("tool", "");
  if (type == "note") return a.payload.value("text", "");
  if (type == "clarification") return a.payload.value("message", "");
  return "";
}

LogRow log_row_from_action(const cogs::PendingAction& a, const std::string& input_mode) {
  using cogs::ActionStatus;
  LogRow r;
  r.interaction_id = a.action_id;
  r.session_id = a.session_id;
  r.timestamp = a.created_at;
  r.input_text = a.input_text;
  r.input_mode = input_mode;
  r.classifier_label = a.label;
  r.cog_invoked = a.cog;
  r.cog_output = cog_output_text(a);
  const bool ran = a.latency_ms.count("execute") > 0;
  r.confirmed = a.status == ActionStatus::confirmed || a.status == ActionStatus::edited_confirmed ||
                (ran && a.executable());
  r.edited_output = a.edited;
  if (a.status == ActionStatus::executed) r.executed_ok = true;
  if (a.status == ActionStatus::failed && ran) r.executed_ok = false;
  r.status = cogs::status_name(a.status);
  r.error = a.error;
  r.latency_ms = a.latency_ms;
  r.result = a.result;
  return r;
}

LogStore::LogStore(const std::string& path) : path_(path) {
  const std::filesystem::path p(path);
  std::error_code ec;
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path(), ec);
  if (sqlite3_open_v2(path.c_str(), &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                      nullptr) != SQLITE_OK) {
    const std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    db_ = nullptr;
    throw Error("StorageUnavailable", "cannot open " + path + ": " + msg);
  }
  sqlite3_busy_timeout(db_, 5000);
  try {
    exec("PRAGMA journal_mode=WAL;");
    exec("PRAGMA synchronous=FULL;");
    bool has_meta = false, has_other = false;
    {
      Stmt s(db_, "SELECT name FROM sqlite_master WHERE type='table'");
      while (s.step()) {
        const std::string name = s.text(0);
        if (name == "meta") has_meta = true;
        else if (name.rfind("sqlite_", 0) != 0) has_other = true;
      }
    }
    if (!has_meta && has_other) throw Error("SchemaMismatch", path + " holds tables from another application");
    if (!has_meta) {
      exec("BEGIN;");
      exec(kSchema);
      exec("INSERT INTO meta(key, value) VALUES('schema_version', '" + std::to_string(kSchemaVersion) + "');");
      exec("COMMIT;");
    } else {
      Stmt s(db_, "SELECT value FROM meta WHERE key='schema_version'");
      const std::string v = s.step() ? s.text(0) : "";
      if (v != std::to_string(kSchemaVersion))
        throw Error("SchemaMismatch", path + " has schema version '" + v + "', expected " +
                                          std::to_string(kSchemaVersion));
    }
  } catch (...) {
    sqlite3_close(db_);
    db_ = nullptr;
    throw;
  }
}

LogStore::~LogStore() {
  if (db_) {
    sqlite3_exec(db_, "PRAGMA wal_checkpoint(TRUNCATE);", nullptr, nullptr, nullptr);
    sqlite3_close(db_);
  }
}

void LogStore::exec(const std::string& sql) const {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
    const std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw Error("StorageUnavailable", msg);
  }
}

std::string LogStore::journal_mode() const {
  std::lock_guard lock(mu_);
  Stmt s(db_, "PRAGMA journal_mode");
  return s.step() ? s.text(0) : "";
}

void LogStore::ensure_session(const std::string& id, const std::string& started_at, const std::string& instrument) {
  std::lock_guard lock(mu_);
  Stmt s(db_, "INSERT OR IGNORE INTO sessions(id, started_at, instrument) VALUES(?, ?, ?)");
  s.bind(1, id).bind(2, started_at).bind(3, instrument).step();
}

std::vector<std::string> LogStore::sessions() const {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT id FROM sessions ORDER BY started_at, id");
  std::vector<std::string> out;
  while (s.step()) out.push_back(s.text(0));
  return out;
}

long long LogStore::record(const LogRow& r, const std::optional<cogs::PendingAction>& action) {
  std::lock_guard lock(mu_);
  Stmt s(db_,
         "INSERT INTO interactions(interaction_id, session_id, timestamp, input_text, input_mode, classifier_label, "
         "cog_invoked, cog_output, confirmed, edited_output, executed_ok, status, error, latency_ms, result, action) "
         "VALUES(?,?,?,?,?,?,?,?,?,?,?,?,?,?,?,?) "
         "ON CONFLICT(interaction_id) DO UPDATE SET classifier_label=excluded.classifier_label, "
         "cog_invoked=excluded.cog_invoked, cog_output=excluded.cog_output, confirmed=excluded.confirmed, "
         "edited_output=excluded.edited_output, executed_ok=excluded.executed_ok, status=excluded.status, "
         "error=excluded.error, latency_ms=excluded.latency_ms, result=excluded.result, "
         "action=COALESCE(excluded.action, action)");
  s.bind(1, r.interaction_id).bind(2, r.session_id).bind(3, r.timestamp).bind(4, r.input_text).bind(5, r.input_mode);
  s.bind(6, r.classifier_label).bind(7, r.cog_invoked).bind(8, r.cog_output).bind(9, r.confirmed ? 1LL : 0LL);
  s.bind(10, r.edited_output);
  if (r.executed_ok) {
    s.bind(11, *r.executed_ok ? 1LL : 0LL);
  } else {
    s.bind_null(11);
  }
  s.bind(12, r.status).bind(13, r.error).bind(14, latency_json(r.latency_ms).dump()).bind(15, r.result.dump());
  if (action) {
    s.bind(16, cogs::action_to_json(*action).dump());
  } else {
    s.bind_null(16);
  }
  s.step();
  Stmt id(db_, "SELECT row_id FROM interactions WHERE interaction_id = ?");
  id.bind(1, r.interaction_id);
  return id.step() ? id.integer(0) : 0;
}

std::vector<LogRow> LogStore::query_log(const LogFilter& f) const {
  std::lock_guard lock(mu_);
  std::string sql =
      "SELECT interaction_id, session_id, timestamp, input_text, input_mode, classifier_label, cog_invoked, "
      "cog_output, confirmed, edited_output, executed_ok, status, error, latency_ms, result FROM interactions "
      "WHERE 1=1";
  if (f.session) sql += " AND session_id = ?1";
  if (f.since) sql += " AND timestamp >= ?2";
  if (f.until) sql += " AND timestamp <= ?3";
  if (f.cog) sql += " AND cog_invoked = ?4";
  if (f.confirmed) sql += " AND confirmed = ?5";
  sql += " ORDER BY timestamp, row_id";
  Stmt s(db_, sql);
  if (f.session) s.bind(1, *f.session);
  if (f.since) s.bind(2, *f.since);
  if (f.until) s.bind(3, *f.until);
  if (f.cog) s.bind(4, *f.cog);
  if (f.confirmed) s.bind(5, *f.confirmed ? 1LL : 0LL);
  std::vector<LogRow> out;
  while (s.step()) {
    LogRow r;
    r.interaction_id = s.text(0);
    r.session_id = s.text(1);
    r.timestamp = s.text(2);
    r.input_text = s.text(3);
    r.input_mode = s.text(4);
    r.classifier_label = s.text(5);
    r.cog_invoked = s.text(6);
    r.cog_output = s.text(7);
    r.confirmed = s.integer(8) != 0;
    if (!s.is_null(9)) r.edited_output = s.text(9);
    if (!s.is_null(10)) r.executed_ok = s.integer(10) != 0;
    r.status = s.text(11);
    r.error = s.text(12);
    const json lat = json::parse(s.text(13));
    for (const auto& [k, v] : lat.items()) r.latency_ms[k] = v.get<double>();
    r.result = json::parse(s.text(14));
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<cogs::PendingAction> LogStore::load_actions() const {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT action FROM interactions WHERE action IS NOT NULL ORDER BY row_id");
  std::vector<cogs::PendingAction> out;
  while (s.step()) out.push_back(cogs::action_from_json(json::parse(s.text(0))));
  return out;
}

void LogStore::record_function(const FunctionRow& f) {
  std::lock_guard lock(mu_);
  Stmt s(db_, "INSERT INTO functions(id, entry, added_at, added_by) VALUES(?, ?, ?, ?)");
  s.bind(1, f.id).bind(2, f.entry.dump()).bind(3, f.added_at).bind(4, f.added_by).step();
}

std::vector<FunctionRow> LogStore::functions() const {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT id, entry, added_at, added_by FROM functions ORDER BY row_id");
  std::vector<FunctionRow> out;
  while (s.step()) out.push_back({s.text(0), json::parse(s.text(1)), s.text(2), s.text(3)});
  return out;
}

void LogStore::record_note(const std::string& ts, const std::string& session, const std::string& text) {
  std::lock_guard lock(mu_);
  Stmt s(db_, "INSERT INTO notes(ts, session, text) VALUES(?, ?, ?)");
  s.bind(1, ts).bind(2, session).bind(3, text).step();
}

std::vector<cogs::NoteRow> LogStore::notes(const std::string& session) const {
  std::lock_guard lock(mu_);
  Stmt s(db_, session.empty() ? "SELECT ts, session, text FROM notes ORDER BY row_id"
                              : "SELECT ts, session, text FROM notes WHERE session = ?1 ORDER BY row_id");
  if (!session.empty()) s.bind(1, session);
  std::vector<cogs::NoteRow> out;
  while (s.step()) out.push_back({s.text(0), s.text(1), s.text(2)});
  return out;
}

}  // namespace beamassist::gateway
