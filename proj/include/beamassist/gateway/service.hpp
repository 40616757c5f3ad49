#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <string>

#include "beamassist/chat.hpp"
#include "beamassist/cogs.hpp"
#include "beamassist/gateway/store.hpp"
#include "beamassist/gateway/transport.hpp"

namespace httplib {
class Server;
}

namespace beamassist::gateway {

struct GatewayConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string db_path = "beamassist.db";
  std::string registry_path;
  // Where appended functions are written; the registry path when empty.
  std::string registry_out;
  std::string instrument = "cms";
  cogs::CogConfig cogs;
  chat::ChatConfig chat;
  std::optional<std::string> corpus_dir;
  std::optional<std::string> index_cache;
  std::optional<std::string> transcription_endpoint;
  std::string transport = "inprocess";
  std::string transport_dir;
};

// JSON config; relative paths resolve against the file's directory.
// Throws Error("BadConfig").
GatewayConfig load_gateway_config(const std::string& path);
GatewayConfig gateway_config_from_json(const json& j, const std::string& base_dir = ".");

struct Reply {
  int status = 200;
  json body = json::object();
};

// Error kind -> HTTP status.
int status_for(const std::string& error_kind);

class Gateway {
 public:
  explicit Gateway(GatewayConfig cfg, WallClock clock = system_wall_clock());
  ~Gateway();

  // REST handlers, independent of the HTTP layer.
  Reply input(const json& body);
  Reply pending(const std::string& session);
  Reply confirm(const json& body);
  Reply functions(const json& body);
  Reply chat(const json& body);
  Reply log(const LogFilter& f);
  Reply healthz() const;

  void mount(httplib::Server& server);
  // Blocks until stop(). Throws Error("PortInUse").
  void serve();
  void stop();
  int bound_port() const { return bound_port_; }

  cogs::CogManager& cogs() { return *cogs_; }
  LogStore& store() { return *store_; }
  Transport& transport() { return *transport_; }
  const GatewayConfig& config() const { return cfg_; }

 private:
  void on_change(const cogs::PendingAction& a);
  void emit(const std::string& session, Source src, EnvelopeKind kind, json payload);
  std::string transcribe(const std::string& audio_b64);
  std::string now() const { return iso8601_utc(clock_()); }

  GatewayConfig cfg_;
  WallClock clock_;
  std::unique_ptr<LogStore> store_;
  std::unique_ptr<Transport> transport_;
  std::unique_ptr<cogs::CogManager> cogs_;
  std::unique_ptr<chat::ChatRouter> chat_;
  std::mutex& session_lock(const std::string& session);

  std::mutex modes_mu_;
  std::map<std::string, std::string> input_modes_;
  std::map<std::string, std::unique_ptr<std::mutex>> session_locks_;
  std::unique_ptr<httplib::Server> server_;
  std::atomic<int> bound_port_{0};
};

struct ReplayStep {
  std::string interaction_id;
  std::string input_text;
  std::string logged_output;
  std::string replayed_output;
  json logged_result;
  json replayed_result;
  bool identical = false;
};

struct ReplayReport {
  std::string session;
  std::vector<ReplayStep> steps;
  bool identical = true;
};

json replay_to_json(const ReplayReport& r);

// Re-runs a session's logged inputs (and their confirmations and edits)
// through fresh cogs against a scratch store, then compares cog outputs and
// execution results with the log.
ReplayReport replay_session(const GatewayConfig& cfg, const std::string& session);

}  // namespace beamassist::gateway
