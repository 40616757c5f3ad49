#include <filesystem>
#include <set>

#include "beamassist/error.hpp"
#include "beamassist/gateway/service.hpp"
#include "beamassist/text.hpp"
#include "httplib.h"

namespace beamassist::gateway {

namespace fs = std::filesystem;

namespace {

Reply error_reply(const Error& e) {
  return {status_for(e.kind()), json{{"error", e.kind()}, {"message", e.detail()}}};
}

std::string session_of(const json& body) {
  const std::string s = body.value("session", std::string("default"));
  if (s.empty() || s.size() > 128) throw Error("InvalidArgs", "session id must be 1 to 128 characters");
  for (unsigned char c : s)
    if (!(std::isalnum(c) || c == '-' || c == '_' || c == '.')) throw Error("InvalidArgs", "session id has '" + std::string(1, c) + "'");
  if (s.find("..") != std::string::npos) throw Error("InvalidArgs", "session id has '..'");
  return s;
}

registry::Registry load_initial_registry(const GatewayConfig& cfg) {
  std::error_code ec;
  if (!cfg.registry_out.empty() && fs::exists(cfg.registry_out, ec)) return registry::load_registry(cfg.registry_out);
  return registry::load_registry(cfg.registry_path);
}

}  // namespace

int status_for(const std::string& kind) {
  static const std::map<std::string, int> table = {
      {"InvalidArgs", 400},         {"InvalidRequest", 400},     {"UnknownAction", 404},
      {"AlreadyFinalized", 409},    {"NotConfirmable", 409},     {"PendingAction", 409},
      {"InvalidEdit", 422},         {"InvalidEntry", 422},       {"DuplicateId", 409},
      {"MalformedRefinement", 422}, {"AudioUnavailable", 501},   {"ClassifierUnavailable", 503},
      {"RouterUnavailable", 503},   {"StorageUnavailable", 503}, {"ChannelUnavailable", 503},
      {"Unreachable", 502},         {"Timeout", 504},            {"BackendError", 502},
      {"NoRuleMatched", 502},       {"BadConfig", 503}};
  const auto it = table.find(kind);
  return it == table.end() ? 500 : it->second;
}

Gateway::Gateway(GatewayConfig cfg, WallClock clock) : cfg_(std::move(cfg)), clock_(std::move(clock)) {
  server_ = std::make_unique<httplib::Server>();
  // Without SO_REUSEPORT a second instance on the same port fails to bind.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
  });
  store_ = std::make_unique<LogStore>(cfg_.db_path);
  transport_ = make_transport(cfg_.transport, cfg_.transport_dir);
  const std::string reg_out = cfg_.registry_out.empty() ? cfg_.registry_path : cfg_.registry_out;
  cogs_ = std::make_unique<cogs::CogManager>(cfg_.cogs, load_initial_registry(cfg_), reg_out, clock_);
  cogs_->restore(store_->load_actions());
  for (const auto& a : cogs_->actions()) {
    std::string mode = "text";
    for (const auto& row : store_->query_log({a.session_id, {}, {}, {}, {}}))
      if (row.interaction_id == a.action_id) mode = row.input_mode;
    store_->record(log_row_from_action(a, mode), a);
  }
  cogs_->set_observer({[this](const cogs::PendingAction& a) { on_change(a); },
                       [this](const registry::Registry&, const registry::FunctionEntry& e, const std::string& by) {
                         store_->record_function({e.id, registry::entry_to_json(e), now(), by});
                       }});
  if (cfg_.chat.call.backend) {
    std::shared_ptr<const chat::CorpusIndex> index;
    if (cfg_.corpus_dir) {
      index = std::make_shared<chat::CorpusIndex>(
          cfg_.index_cache ? chat::CorpusIndex::load_or_build(*cfg_.corpus_dir, *cfg_.index_cache)
                           : chat::CorpusIndex::build(*cfg_.corpus_dir));
    }
    chat_ = std::make_unique<chat::ChatRouter>(cfg_.chat, index);
  }
}

Gateway::~Gateway() { stop(); }

std::mutex& Gateway::session_lock(const std::string& session) {
  std::lock_guard lock(modes_mu_);
  auto& m = session_locks_[session];
  if (!m) m = std::make_unique<std::mutex>();
  return *m;
}

void Gateway::on_change(const cogs::PendingAction& a) {
  std::string mode = "text";
  {
    std::lock_guard lock(modes_mu_);
    if (auto it = input_modes_.find(a.session_id); it != input_modes_.end()) mode = it->second;
  }
  store_->record(log_row_from_action(a, mode), a);
  if (a.cog == "Notebook" && a.status == cogs::ActionStatus::executed)
    store_->record_note(a.result.value("timestamp", now()), a.session_id, a.payload.value("text", ""));
}

void Gateway::emit(const std::string& session, Source src, EnvelopeKind kind, json payload) {
  Envelope e;
  e.session_id = session;
  e.source = src;
  e.kind = kind;
  e.payload = std::move(payload);
  e.created_at = now();
  transport_->publish(session, std::move(e));
}

std::string Gateway::transcribe(const std::string& audio_b64) {
  const std::string& url = *cfg_.transcription_endpoint;
  const auto scheme = url.find("://");
  const auto slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  const std::string host = slash == std::string::npos ? url : url.substr(0, slash);
  const std::string path = slash == std::string::npos ? "/" : url.substr(slash);
  httplib::Client cli(host);
  cli.set_read_timeout(120, 0);
  const auto res = cli.Post(path, json{{"audio", audio_b64}}.dump(), "application/json");
  if (!res) throw Error("Unreachable", "transcription endpoint " + url + " did not answer");
  if (res->status != 200) throw Error("BackendError", "transcription endpoint returned " + std::to_string(res->status));
  try {
    return json::parse(res->body).at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw Error("BackendError", std::string("transcription reply: ") + e.what());
  }
}

Reply Gateway::input(const json& body) {
  try {
    if (!body.is_object()) throw Error("InvalidArgs", "body must be a JSON object");
    const std::string session = session_of(body);
    std::string text = body.value("text", std::string());
    const bool has_text = !text::trim(text).empty();
    const bool has_audio = body.contains("audio") && body["audio"].is_string() && !body["audio"].get<std::string>().empty();
    if (!has_text && !has_audio) throw Error("InvalidArgs", "text or audio is required");
    std::string mode = "text";
    if (has_audio) {
      if (!cfg_.transcription_endpoint)
        return {501, json{{"error", "AudioUnavailable"}, {"message", "no transcription endpoint is configured"}}};
      const std::string heard = transcribe(body["audio"].get<std::string>());
      text = has_text ? text + " " + heard : heard;
      mode = has_text ? "both" : "audio";
    }

    std::lock_guard session_guard(session_lock(session));
    if (auto p = cogs_->pending_for(session); p && p->executable())
      return {409, json{{"error", "PendingAction"},
                        {"message", "confirm or reject " + p->action_id + " first"},
                        {"pending", cogs::action_to_json(*p)}}};
    store_->ensure_session(session, now(), cfg_.instrument);
    transport_->open(session);
    emit(session, Source::console, EnvelopeKind::user_input, json{{"text", text}, {"input_mode", mode}});
    {
      std::lock_guard lock(modes_mu_);
      input_modes_[session] = mode;
    }
    const auto a = cogs_->run_workflow1(text, session);
    emit(session, Source::cog_manager, a.status == cogs::ActionStatus::failed ? EnvelopeKind::error : EnvelopeKind::cog_result,
         cogs::action_to_json(a));
    return {200, cogs::action_to_json(a)};
  } catch (const Error& e) {
    return error_reply(e);
  }
}

Reply Gateway::pending(const std::string& session) {
  try {
    const auto p = cogs_->pending_for(session_of(json{{"session", session}}));
    return {200, json{{"pending", p ? cogs::action_to_json(*p) : json(nullptr)}}};
  } catch (const Error& e) {
    return error_reply(e);
  }
}

Reply Gateway::confirm(const json& body) {
  try {
    if (!body.is_object() || !body.contains("action_id") || !body["action_id"].is_string())
      throw Error("InvalidArgs", "action_id is required");
    const std::string id = body["action_id"].get<std::string>();
    const auto found = cogs_->find(id);
    if (!found) throw Error("UnknownAction", "no action " + id);
    if (found->status != cogs::ActionStatus::pending)
      throw Error("AlreadyFinalized", id + " is " + cogs::status_name(found->status));
    transport_->open(found->session_id);
    std::optional<std::string> edit;
    if (body.contains("edited_code") && body["edited_code"].is_string()) edit = body["edited_code"].get<std::string>();
    if (body.value("reject", false)) {
      const auto a = cogs_->reject_action(id);
      emit(a.session_id, Source::console, EnvelopeKind::confirmation, json{{"action_id", id}, {"rejected", true}});
      return {200, cogs::action_to_json(a)};
    }
    emit(found->session_id, Source::console, EnvelopeKind::confirmation,
         json{{"action_id", id}, {"edited_code", edit ? json(*edit) : json(nullptr)}});
    const auto a = cogs_->confirm_action(id, edit);
    emit(a.session_id, Source::cog_manager, EnvelopeKind::execution_result, cogs::action_to_json(a));
    return {200, cogs::action_to_json(a)};
  } catch (const Error& e) {
    return error_reply(e);
  }
}

Reply Gateway::functions(const json& body) {
  try {
    if (!body.is_object()) throw Error("InvalidArgs", "body must be a JSON object");
    const std::string by = body.value("added_by", std::string("console"));
    if (body.contains("entry")) {
      registry::FunctionEntry e;
      try {
        e = registry::entry_from_json(body["entry"]);
      } catch (const json::exception& ex) {
        throw Error("InvalidEntry", ex.what());
      } catch (const Error& ex) {
        throw Error("InvalidEntry", ex.detail());
      }
      const auto reg = cogs_->commit_function(e, by);
      return {200, json{{"committed", registry::entry_to_json(e)}, {"registry_version", reg.version}}};
    }
    const std::string desc = body.value("description", std::string());
    if (text::trim(desc).empty()) throw Error("InvalidArgs", "description or entry is required");
    try {
      const auto e = cogs_->refine_function(desc);
      return {200, json{{"preview", registry::entry_to_json(e)}}};
    } catch (const Error& ex) {
      if (ex.kind() != "MalformedRefinement") throw;
      return {422, json{{"error", ex.kind()}, {"message", ex.detail()}}};
    }
  } catch (const Error& e) {
    return error_reply(e);
  }
}

Reply Gateway::chat(const json& body) {
  try {
    if (!chat_) throw Error("BadConfig", "chat is not configured");
    if (!body.is_object()) throw Error("InvalidArgs", "body must be a JSON object");
    const std::string session = session_of(body);
    const std::string query = body.value("query", std::string());
    if (text::trim(query).empty()) throw Error("InvalidArgs", "query is required");
    const auto a = chat_->ask(query);
    json sources = json::array();
    for (const auto& c : a.context.chunks)
      sources.push_back(json{{"doc_id", c.chunk.doc_id}, {"chunk", c.chunk.index}, {"score", c.score}});
    json out{{"route", chat::route_name(a.route.kind)},
             {"fallback", a.route.fallback},
             {"answer", a.text},
             {"sources", sources},
             {"latency_s", a.latency_s}};
    store_->ensure_session(session, now(), cfg_.instrument);
    transport_->open(session);
    emit(session, Source::gateway, EnvelopeKind::chat, json{{"query", query}, {"reply", out}});
    return {200, out};
  } catch (const Error& e) {
    return error_reply(e);
  }
}

Reply Gateway::log(const LogFilter& f) {
  try {
    json rows = json::array();
    for (const auto& r : store_->query_log(f)) rows.push_back(log_row_to_json(r));
    return {200, json{{"rows", rows}}};
  } catch (const Error& e) {
    return error_reply(e);
  }
}

Reply Gateway::healthz() const {
  return {200, json{{"status", "ok"},
                    {"registry_version", cogs_->registry_snapshot().version},
                    {"journal_mode", store_->journal_mode()},
                    {"chat", chat_ != nullptr}}};
}

void Gateway::mount(httplib::Server& srv) {
  auto send = [](httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  auto parse = [](const httplib::Request& req) -> std::optional<json> {
    try {
      return json::parse(req.body.empty() ? "{}" : req.body);
    } catch (const json::exception&) {
      return std::nullopt;
    }
  };
  auto bad_json = Reply{400, json{{"error", "InvalidArgs"}, {"message", "body is not valid JSON"}}};
  auto post = [&](const char* path, Reply (Gateway::*handler)(const json&)) {
    srv.Post(path, [this, send, parse, bad_json, handler](const httplib::Request& req, httplib::Response& res) {
      const auto body = parse(req);
      send(res, body ? (this->*handler)(*body) : bad_json);
    });
  };
  post("/input", &Gateway::input);
  post("/confirm", &Gateway::confirm);
  post("/functions", &Gateway::functions);
  post("/chat", &Gateway::chat);
  srv.Get("/pending", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, pending(req.has_param("session") ? req.get_param_value("session") : "default"));
  });
  srv.Get("/log", [this, send](const httplib::Request& req, httplib::Response& res) {
    LogFilter f;
    auto param = [&](const char* k) -> std::optional<std::string> {
      if (!req.has_param(k)) return std::nullopt;
      return req.get_param_value(k);
    };
    f.session = param("session");
    f.since = param("since");
    f.until = param("until");
    f.cog = param("cog");
    if (auto c = param("confirmed")) {
      if (*c != "true" && *c != "false") {
        send(res, {400, json{{"error", "InvalidArgs"}, {"message", "confirmed must be true or false"}}});
        return;
      }
      f.confirmed = *c == "true";
    }
    send(res, log(f));
  });
  srv.Get("/healthz", [this, send](const httplib::Request&, httplib::Response& res) { send(res, healthz()); });
  srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
}

void Gateway::serve() {
  mount(*server_);
  int port = cfg_.port;
  if (port == 0) {
    port = server_->bind_to_any_port(cfg_.host);
    if (port < 0) throw Error("PortInUse", "cannot bind " + cfg_.host);
  } else if (!server_->bind_to_port(cfg_.host, port)) {
    throw Error("PortInUse", cfg_.host + ":" + std::to_string(port) + " is not available");
  }
  bound_port_ = port;
  server_->listen_after_bind();
}

void Gateway::stop() { server_->stop(); }

}  // namespace beamassist::gateway
