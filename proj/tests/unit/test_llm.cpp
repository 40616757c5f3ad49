#include <chrono>
#include <thread>

#include "beamassist/error.hpp"
#include "beamassist/llm.hpp"
#include "doctest.h"
#include "httplib.h"

using namespace beamassist;
using namespace beamassist::llm;

namespace {

ChatRequest request(const std::string& user) {
  ChatRequest r;
  r.system_prompt = "System: test";
  r.user_prompt = user;
  return r;
}

std::string error_kind(const Backend& b, const ChatRequest& req) {
  try {
    b.complete(req);
  } catch (const Error& e) {
    return e.kind();
  }
  return "ok";
}

// Minimal OpenAI-compatible server on a random local port.
struct FakeServer {
  httplib::Server server;
  int port = 0;
  std::thread thread;
  json last_body;

  explicit FakeServer(std::chrono::milliseconds delay = std::chrono::milliseconds(0)) {
    server.Post("/v1/chat/completions", [this, delay](const httplib::Request& req, httplib::Response& res) {
      last_body = json::parse(req.body);
      std::this_thread::sleep_for(delay);
      const std::string user = last_body["messages"][1]["content"];
      json out{{"choices", json::array({json{{"message", {{"role", "assistant"}, {"content", "  " + user + "\n"}}}}})},
               {"usage", {{"prompt_tokens", 7}, {"completion_tokens", 3}}}};
      res.set_content(out.dump(), "application/json");
    });
    server.Post("/broken/chat/completions", [](const httplib::Request&, httplib::Response& res) {
      res.status = 500;
      res.set_content("boom", "text/plain");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~FakeServer() {
    server.stop();
    thread.join();
  }
  std::string url(const std::string& path = "/v1") const { return "http://127.0.0.1:" + std::to_string(port) + path; }
};

}  // namespace

TEST_SUITE("llm") {
  TEST_CASE("echo returns the user prompt") {
    BackendSpec spec;
    spec.kind = BackendKind::echo;
    ChatResponse r = complete(spec, request("abc"));
    CHECK(r.text == "abc");
    CHECK(r.latency_s >= 0);
  }

  TEST_CASE("scripted rules: first hit wins, exact or substring") {
    BackendSpec spec;
    spec.kind = BackendKind::scripted;
    spec.rules = parse_rules_jsonl(
        "{\"match\": \"Measure sample for 5 seconds.\", \"mode\": \"exact\", \"output\": \"sam.measure(5)\"}\n"
        "\n"
        "{\"match\": \"temperature\", \"mode\": \"substring\", \"output\": \"sam.linkamTemperature()\"}\n"
        "{\"match\": \"What is the sample temperature?\", \"output\": \"never\"}\n");
    auto b = make_backend(spec);
    CHECK(b->complete(request("Measure sample for 5 seconds.")).text == "sam.measure(5)");
    CHECK(b->complete(request("What is the sample temperature?")).text == "sam.linkamTemperature()");
    CHECK(error_kind(*b, request("Measure sample for 5 seconds")) == "NoRuleMatched");
    const ChatRequest req = request("Measure sample for 5 seconds.");
    const ChatRequest copy = req;
    CHECK(b->complete(req).text == b->complete(req).text);
    CHECK(req.user_prompt == copy.user_prompt);
  }

  TEST_CASE("spec validation") {
    BackendSpec s;
    s.kind = BackendKind::scripted;
    CHECK_THROWS_AS(make_backend(s), Error);
    s.kind = BackendKind::remote_openai_compatible;
    CHECK_THROWS_AS(make_backend(s), Error);
    CHECK_THROWS_AS(parse_rules_jsonl("{\"match\": \"a\", \"mode\": \"regex\", \"output\": \"b\"}"), Error);
    ChatRequest bad = request("x");
    bad.temperature = 3;
    BackendSpec echo;
    CHECK(error_kind(*make_backend(echo), bad) == "InvalidRequest");
    CHECK(error_kind(*make_backend(echo), request("")) == "InvalidRequest");
  }

  TEST_CASE("spec from json") {
    json j = json::parse(R"J({"kind": "scripted", "rules": [{"match": "hi", "mode": "substring", "output": "Op"}]})J");
    BackendSpec s = backend_spec_from_json(j);
    CHECK(s.kind == BackendKind::scripted);
    CHECK(make_backend(s)->complete(request("oh hi there")).text == "Op");
  }

  TEST_CASE("remote backend speaks chat completions") {
    FakeServer srv;
    BackendSpec spec;
    spec.kind = BackendKind::remote_openai_compatible;
    spec.endpoint = srv.url();
    spec.model = "qwen2.5-coder";
    spec.api_key = "secret";
    ChatRequest req = request("Measure sample for 5 seconds.");
    req.seed = 42;
    ChatResponse r = complete(spec, req);
    CHECK(r.text == "  Measure sample for 5 seconds.\n");
    REQUIRE(r.token_counts.has_value());
    CHECK(r.token_counts->first == 7);
    CHECK(srv.last_body["model"] == "qwen2.5-coder");
    CHECK(srv.last_body["temperature"] == 0.0);
    CHECK(srv.last_body["seed"] == 42);
    CHECK(srv.last_body["messages"][0]["role"] == "system");
  }

  TEST_CASE("remote errors") {
    FakeServer srv(std::chrono::milliseconds(800));
    BackendSpec spec;
    spec.kind = BackendKind::remote_openai_compatible;
    spec.endpoint = srv.url();
    spec.timeout_s = 0.2;
    const auto t0 = std::chrono::steady_clock::now();
    CHECK(error_kind(*make_backend(spec), request("x")) == "Timeout");
    // No retry after a timeout.
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::milliseconds(700));

    spec.timeout_s = 5;
    spec.endpoint = srv.url("/broken");
    CHECK(error_kind(*make_backend(spec), request("x")) == "BackendError");

    // Nothing listens on port 1; the connection is refused.
    spec.endpoint = "http://127.0.0.1:1/v1";
    CHECK(error_kind(*make_backend(spec), request("x")) == "Unreachable");
  }
}
