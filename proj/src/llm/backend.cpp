#include "beamassist/llm.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "beamassist/error.hpp"
#include "beamassist/text.hpp"
#include "httplib.h"

namespace beamassist::llm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

class EchoBackend : public Backend {
 public:
  ChatResponse complete(const ChatRequest& req) const override {
    const auto t0 = Clock::now();
    req.validate();
    ChatResponse r;
    r.text = req.user_prompt;
    r.latency_s = seconds_since(t0);
    return r;
  }
  BackendKind kind() const override { return BackendKind::echo; }
};

class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(std::vector<ScriptRule> rules) : rules_(std::move(rules)) {}

  ChatResponse complete(const ChatRequest& req) const override {
    const auto t0 = Clock::now();
    req.validate();
    for (const auto& rule : rules_) {
      const bool hit = rule.mode == ScriptRule::Mode::exact ? req.user_prompt == rule.match
                                                            : req.user_prompt.find(rule.match) != std::string::npos;
      if (hit) {
        ChatResponse r;
        r.text = rule.output;
        r.latency_s = seconds_since(t0);
        return r;
      }
    }
    throw Error("NoRuleMatched", "no scripted rule matches \"" + req.user_prompt + "\"");
  }
  BackendKind kind() const override { return BackendKind::scripted; }

 private:
  std::vector<ScriptRule> rules_;
};

struct Url {
  std::string origin;  // scheme://host:port
  std::string path;    // without trailing slash
};

Url split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error("InvalidBackend", "endpoint must be an http(s) URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  Url u;
  u.origin = url.substr(0, path_start);
  u.path = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!u.path.empty() && u.path.back() == '/') u.path.pop_back();
  return u;
}

class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(BackendSpec spec) : spec_(std::move(spec)), url_(split_url(*spec_.endpoint)) {}

  ChatResponse complete(const ChatRequest& req) const override {
    req.validate();
    json body;
    body["model"] = req.model_id.empty() ? spec_.model : req.model_id;
    body["messages"] = json::array({json{{"role", "system"}, {"content", req.system_prompt}},
                                    json{{"role", "user"}, {"content", req.user_prompt}}});
    body["temperature"] = req.temperature;
    body["max_tokens"] = req.max_tokens;
    if (req.seed) body["seed"] = *req.seed;
    body["stream"] = false;
    const std::string payload = body.dump();
    std::string path = url_.path;
    if (path.size() < 17 || path.compare(path.size() - 17, 17, "/chat/completions") != 0) path += "/chat/completions";

    const auto t0 = Clock::now();
    for (int attempt = 0;; ++attempt) {
      httplib::Client cli(url_.origin);
      const auto secs = std::chrono::duration<double>(spec_.timeout_s);
      const auto us = std::chrono::duration_cast<std::chrono::microseconds>(secs);
      cli.set_connection_timeout(us);
      cli.set_read_timeout(us);
      cli.set_write_timeout(us);
      httplib::Headers headers;
      if (spec_.api_key && !spec_.api_key->empty()) headers.emplace("Authorization", "Bearer " + *spec_.api_key);
      const auto t_attempt = Clock::now();
      auto res = cli.Post(path, headers, payload, "application/json");
      if (!res) {
        const auto err = res.error();
        const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                               (err == httplib::Error::Read && seconds_since(t_attempt) >= 0.95 * spec_.timeout_s);
        if (timed_out)
          throw Error("Timeout", "no response from " + *spec_.endpoint + " within " +
                                     text::format_number(spec_.timeout_s) + " s");
        if (attempt == 0) continue;
        throw Error("Unreachable", *spec_.endpoint + ": " + httplib::to_string(err));
      }
      if (res->status != 200)
        throw Error("BackendError", "HTTP " + std::to_string(res->status) + " from " + *spec_.endpoint + ": " +
                                        res->body.substr(0, 200));
      ChatResponse out;
      try {
        const json j = json::parse(res->body);
        out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage") && j["usage"].is_object())
          out.token_counts = std::make_pair(j["usage"].value("prompt_tokens", 0LL),
                                            j["usage"].value("completion_tokens", 0LL));
      } catch (const json::exception& ex) {
        throw Error("BackendError", std::string("malformed completion payload: ") + ex.what());
      }
      out.latency_s = seconds_since(t0);
      return out;
    }
  }
  BackendKind kind() const override { return BackendKind::remote_openai_compatible; }

 private:
  BackendSpec spec_;
  Url url_;
};

}  // namespace

void ChatRequest::validate() const {
  if (!(temperature >= 0 && temperature <= 2)) throw Error("InvalidRequest", "temperature must lie in [0, 2]");
  if (max_tokens <= 0) throw Error("InvalidRequest", "max_tokens must be positive");
  if (system_prompt.empty() || user_prompt.empty()) throw Error("InvalidRequest", "prompts must be non-empty");
}

std::string backend_kind_name(BackendKind k) {
  switch (k) {
    case BackendKind::remote_openai_compatible: return "remote_openai_compatible";
    case BackendKind::scripted: return "scripted";
    case BackendKind::echo: return "echo";
  }
  return "?";
}

void BackendSpec::validate() const {
  if (kind == BackendKind::remote_openai_compatible && (!endpoint || endpoint->empty()))
    throw Error("InvalidBackend", "remote backend requires an endpoint");
  if (kind == BackendKind::scripted && rules.empty()) throw Error("InvalidBackend", "scripted backend requires rules");
  if (!(timeout_s > 0)) throw Error("InvalidBackend", "timeout must be positive");
}

std::vector<ScriptRule> parse_rules_jsonl(const std::string& text) {
  std::vector<ScriptRule> rules;
  int lineno = 0;
  for (const auto& line : text::split_lines(text)) {
    ++lineno;
    if (text::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      ScriptRule r;
      r.match = j.at("match").get<std::string>();
      r.output = j.at("output").get<std::string>();
      const std::string mode = j.value("mode", std::string("exact"));
      if (mode == "exact")
        r.mode = ScriptRule::Mode::exact;
      else if (mode == "substring")
        r.mode = ScriptRule::Mode::substring;
      else
        throw Error("InvalidBackend", "unknown match mode '" + mode + "'");
      rules.push_back(std::move(r));
    } catch (const json::exception& ex) {
      throw Error("InvalidBackend", "rules line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  return rules;
}

std::vector<ScriptRule> load_rules_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("InvalidBackend", "cannot open rules file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_rules_jsonl(ss.str());
}

BackendSpec backend_spec_from_json(const json& j, const std::string& base_dir) {
  BackendSpec s;
  try {
    const std::string kind = j.value("kind", std::string("echo"));
    if (kind == "remote_openai_compatible" || kind == "remote")
      s.kind = BackendKind::remote_openai_compatible;
    else if (kind == "scripted")
      s.kind = BackendKind::scripted;
    else if (kind == "echo")
      s.kind = BackendKind::echo;
    else
      throw Error("InvalidBackend", "unknown backend kind '" + kind + "'");
    if (j.contains("endpoint")) s.endpoint = j["endpoint"].get<std::string>();
    if (j.contains("api_key")) s.api_key = j["api_key"].get<std::string>();
    s.model = j.value("model", std::string{});
    s.timeout_s = j.value("timeout_s", 120.0);
    if (j.contains("rules")) {
      for (const auto& r : j["rules"]) s.rules.push_back(parse_rules_jsonl(r.dump()).front());
    }
    if (j.contains("rules_file")) {
      std::filesystem::path p = j["rules_file"].get<std::string>();
      if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
      auto more = load_rules_jsonl(p.string());
      s.rules.insert(s.rules.end(), more.begin(), more.end());
    }
  } catch (const json::exception& ex) {
    throw Error("InvalidBackend", ex.what());
  }
  apply_env_overrides(s);
  s.validate();
  return s;
}

void apply_env_overrides(BackendSpec& spec) {
  if (spec.kind != BackendKind::remote_openai_compatible) return;
  if (const char* e = std::getenv("BEAMASSIST_LLM_ENDPOINT"); e && *e) spec.endpoint = e;
  if (const char* k = std::getenv("BEAMASSIST_LLM_API_KEY"); k && *k) spec.api_key = k;
}

std::shared_ptr<Backend> make_backend(const BackendSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case BackendKind::echo: return std::make_shared<EchoBackend>();
    case BackendKind::scripted: return std::make_shared<ScriptedBackend>(spec.rules);
    case BackendKind::remote_openai_compatible: return std::make_shared<RemoteBackend>(spec);
  }
  throw Error("InvalidBackend", "unknown backend kind");
}

ChatResponse complete(const BackendSpec& spec, const ChatRequest& req) { return make_backend(spec)->complete(req); }

}  // namespace beamassist::llm
