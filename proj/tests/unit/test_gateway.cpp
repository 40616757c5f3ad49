#include <sqlite3.h>

#include <filesystem>
#include <thread>

#include "beamassist/error.hpp"
#include "beamassist/gateway/service.hpp"
#include "doctest.h"
#include "httplib.h"

using namespace beamassist;
using namespace beamassist::gateway;

namespace {

const std::string kData = BEAMASSIST_DATA_DIR;

std::string fresh_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("beamassist_gw_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

json config_json(const std::string& dir) {
  auto scripted = [](const std::string& f) { return json{{"kind", "scripted"}, {"rules_file", kData + "/scripted/" + f}}; };
  return json{{"db_path", dir + "/gw.db"},
              {"registry", kData + "/registry/cms/examples.json"},
              {"registry_out", dir + "/registry.json"},
              {"backends",
               {{"classifier", scripted("classifier.jsonl")},
                {"operator", scripted("operator.jsonl")},
                {"analyst", scripted("analyst.jsonl")},
                {"refiner", scripted("refiner.jsonl")},
                {"chat", scripted("chat.jsonl")}}},
              {"cogs",
               {{"classifier", {{"backend", "classifier"}}},
                {"operator", {{"backend", "operator"}}},
                {"analyst", {{"backend", "analyst"}}},
                {"refiner", {{"backend", "refiner"}}}}},
              {"analysis", {{"output_dir", dir + "/out"}}},
              {"notebook_dir", dir + "/notebook"},
              {"chat", {{"backend", "chat"}, {"corpus_dir", kData + "/corpus"}, {"index_cache", dir + "/index.json"}}}};
}

GatewayConfig config(const std::string& dir) { return gateway_config_from_json(config_json(dir), dir); }

json input(const std::string& text, const std::string& session = "s1") { return json{{"text", text}, {"session", session}}; }

}  // namespace

TEST_SUITE("gateway.transport") {
  void exercise(Transport & t) {
    CHECK_THROWS_WITH_AS(t.publish("s1", Envelope{}), doctest::Contains("ChannelUnavailable"), Error);
    t.open("s1");
    CHECK(t.poll("s1", 0).empty());
    Envelope a;
    a.session_id = "s1";
    a.payload = {{"text", "first"}};
    Envelope b = a;
    b.kind = EnvelopeKind::cog_result;
    b.payload = {{"text", "second"}};
    const auto ra = t.publish("s1", a);
    const auto rb = t.publish("s1", b);
    CHECK(rb.id > ra.id);
    const auto all = t.poll("s1", 0);
    REQUIRE(all.size() == 2);
    CHECK(all[0].payload["text"] == "first");
    CHECK(all[1].kind == EnvelopeKind::cog_result);
    CHECK(t.poll("s1", rb.id).empty());
    CHECK(t.poll("s1", ra.id).size() == 1);
    CHECK_THROWS_WITH_AS(t.poll("nope", 0), doctest::Contains("ChannelUnavailable"), Error);
    CHECK_THROWS_WITH_AS(t.open("../x"), doctest::Contains("ChannelUnavailable"), Error);
  }
  TEST_CASE("in-process") {
    InProcessTransport t;
    exercise(t);
  }
  TEST_CASE("directory drop, shared by two instances") {
    const auto dir = fresh_dir("transport");
    DirectoryTransport t(dir);
    exercise(t);
    DirectoryTransport other(dir);
    CHECK(other.poll("s1", 0).size() == 2);
    Envelope e;
    e.session_id = "s1";
    CHECK(other.publish("s1", e).id == 3);
  }
  TEST_CASE("envelope json round trip") {
    Envelope e;
    e.id = 7;
    e.session_id = "s";
    e.source = Source::cog_manager;
    e.kind = EnvelopeKind::function_add;
    e.payload = {{"k", 1}};
    e.created_at = "2025-01-01T00:00:00.000Z";
    CHECK(envelope_to_json(envelope_from_json(envelope_to_json(e))) == envelope_to_json(e));
  }
}

TEST_SUITE("gateway.store") {
  TEST_CASE("record, upsert and filter") {
    LogStore store(fresh_dir("store") + "/log.db");
    CHECK(store.journal_mode() == "wal");
    CHECK(store.query_log().empty());
    LogRow r;
    r.interaction_id = "a1";
    r.session_id = "s1";
    r.timestamp = "2025-01-01T00:00:00.000Z";
    r.input_text = "Measure sample for 5 seconds.";
    r.classifier_label = "Op";
    r.cog_invoked = "Operator";
    r.cog_output = "sam.measure(5)";
    r.status = "pending";
    const auto id = store.record(r);
    r.confirmed = true;
    r.edited_output = "sam.measure(10)";
    r.executed_ok = true;
    r.status = "executed";
    CHECK(store.record(r) == id);
    LogRow other = r;
    other.interaction_id = "a2";
    other.session_id = "s2";
    other.cog_invoked = "Analyst";
    other.confirmed = false;
    other.timestamp = "2025-01-02T00:00:00.000Z";
    store.record(other);

    const auto rows = store.query_log({"s1", {}, {}, {}, {}});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].cog_output == "sam.measure(5)");
    CHECK(rows[0].edited_output == "sam.measure(10)");
    CHECK(rows[0].executed_ok == true);
    CHECK(store.query_log({{}, {}, {}, std::string("Operator"), {}}).size() == 1);
    CHECK(store.query_log({{}, {}, {}, {}, true}).size() == 1);
    CHECK(store.query_log({{}, std::string("2025-01-01T12:00:00Z"), {}, {}, {}}).size() == 1);
    CHECK(store.query_log({{}, {}, std::string("2025-01-01T12:00:00Z"), {}, {}}).size() == 1);
    CHECK(store.query_log().size() == 2);
  }
  TEST_CASE("schema mismatch and unavailable storage") {
    const auto dir = fresh_dir("schema");
    { LogStore s(dir + "/ok.db"); }
    CHECK_NOTHROW(LogStore(dir + "/ok.db"));
    sqlite3* db = nullptr;
    sqlite3_open((dir + "/old.db").c_str(), &db);
    sqlite3_exec(db, "CREATE TABLE meta(key TEXT PRIMARY KEY, value TEXT); INSERT INTO meta VALUES('schema_version','0');",
                 nullptr, nullptr, nullptr);
    sqlite3_exec(db, "CREATE TABLE foreign_t(x); ", nullptr, nullptr, nullptr);
    sqlite3_close(db);
    CHECK_THROWS_WITH_AS(LogStore(dir + "/old.db"), doctest::Contains("SchemaMismatch"), Error);
    sqlite3_open((dir + "/alien.db").c_str(), &db);
    sqlite3_exec(db, "CREATE TABLE stuff(x);", nullptr, nullptr, nullptr);
    sqlite3_close(db);
    CHECK_THROWS_WITH_AS(LogStore(dir + "/alien.db"), doctest::Contains("SchemaMismatch"), Error);
    CHECK_THROWS_WITH_AS(LogStore("/proc/definitely/not/here.db"), doctest::Contains("StorageUnavailable"), Error);
  }
}

TEST_SUITE("gateway.service") {
  TEST_CASE("input, pending, confirm, log") {
    Gateway gw(config(fresh_dir("flow")));
    const auto r = gw.input(input("Measure sample for 5 seconds."));
    REQUIRE(r.status == 200);
    CHECK(r.body["payload"]["code"] == "sam.measure(5)");
    CHECK(r.body["status"] == "pending");
    const std::string id = r.body["action_id"];
    CHECK(gw.pending("s1").body["pending"]["action_id"] == id);

    const auto busy = gw.input(input("Start xicam"));
    CHECK(busy.status == 409);
    CHECK(busy.body["pending"]["action_id"] == id);
    CHECK(gw.input(input("Start xicam", "s2")).status == 200);

    const auto done = gw.confirm(json{{"action_id", id}});
    REQUIRE(done.status == 200);
    CHECK(done.body["status"] == "executed");
    REQUIRE(done.body["result"]["trace"].size() == 1);
    CHECK(done.body["result"]["trace"][0]["kind"] == "Measure");
    CHECK(gw.confirm(json{{"action_id", id}}).status == 409);
    CHECK(gw.confirm(json{{"action_id", "missing"}}).status == 404);
    CHECK(gw.confirm(json::object()).status == 400);

    const auto rows = gw.log({std::string("s1"), {}, {}, {}, {}}).body["rows"];
    REQUIRE(rows.size() == 1);
    CHECK(rows[0]["confirmed"] == true);
    CHECK(rows[0]["executed_ok"] == true);
    CHECK(rows[0]["cog_output"] == "sam.measure(5)");
    CHECK(gw.log({}).body["rows"].size() == 2);
    CHECK(gw.log({{}, {}, {}, std::string("Operator"), {}}).body["rows"].size() == 1);

    const auto env = gw.transport().poll("s1", 0);
    REQUIRE(env.size() == 4);
    CHECK(env[0].kind == EnvelopeKind::user_input);
    CHECK(env[3].kind == EnvelopeKind::execution_result);
  }
  TEST_CASE("edit and reject are logged") {
    Gateway gw(config(fresh_dir("edit")));
    const std::string id = gw.input(input("Measure sample for 5 seconds.")).body["action_id"];
    CHECK(gw.confirm(json{{"action_id", id}, {"edited_code", "sam.measure("}}).status == 422);
    const auto done = gw.confirm(json{{"action_id", id}, {"edited_code", "sam.measure(10)"}});
    CHECK(done.body["result"]["trace"][0]["args"]["exposure_s"] == 10.0);
    const auto row = gw.log({}).body["rows"][0];
    CHECK(row["cog_output"] == "sam.measure(5)");
    CHECK(row["edited_output"] == "sam.measure(10)");

    const std::string id2 = gw.input(input("Align the sample.")).body["action_id"];
    CHECK(gw.confirm(json{{"action_id", id2}, {"reject", true}}).body["status"] == "rejected");
    const auto rows = gw.log({}).body["rows"];
    CHECK(rows[1]["status"] == "rejected");
    CHECK(rows[1]["confirmed"] == false);
  }
  TEST_CASE("notes, analysis, tools, missed") {
    const auto dir = fresh_dir("paths");
    Gateway gw(config(dir));
    const auto note = gw.input(input("Note: The sample alignment was off by 2 degrees."));
    CHECK(note.body["status"] == "executed");
    CHECK(gw.store().notes("s1").size() == 1);
    const std::string ana = gw.input(input("Show me the q image.")).body["action_id"];
    CHECK(gw.confirm(json{{"action_id", ana}}).body["status"] == "executed");
    const auto missed = gw.input(input("completely unscripted words"));
    CHECK(missed.body["status"] == "failed");
    CHECK(gw.log({}).body["rows"].size() == 3);
  }
  TEST_CASE("bad input and audio without transcription") {
    Gateway gw(config(fresh_dir("audio")));
    CHECK(gw.input(json{{"session", "s1"}}).status == 400);
    CHECK(gw.input(json{{"text", "x"}, {"session", "../etc"}}).status == 400);
    const auto audio = gw.input(json{{"audio", "UklGRg=="}, {"session", "s1"}});
    CHECK(audio.status == 501);
    CHECK(audio.body["error"] == "AudioUnavailable");
    CHECK(gw.log({}).body["rows"].empty());
  }
  TEST_CASE("audio forwarded to a transcription endpoint") {
    httplib::Server asr;
    asr.Post("/transcribe", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"({"text": "Measure sample for 5 seconds."})", "application/json");
    });
    const int port = asr.bind_to_any_port("127.0.0.1");
    std::thread th([&] { asr.listen_after_bind(); });
    asr.wait_until_ready();
    auto cfg = config(fresh_dir("asr"));
    cfg.transcription_endpoint = "http://127.0.0.1:" + std::to_string(port) + "/transcribe";
    {
      Gateway gw(cfg);
      const auto r = gw.input(json{{"audio", "UklGRg=="}, {"session", "s1"}});
      CHECK(r.status == 200);
      CHECK(r.body["payload"]["code"] == "sam.measure(5)");
      CHECK(gw.log({}).body["rows"][0]["input_mode"] == "audio");
    }
    asr.stop();
    th.join();
  }
  TEST_CASE("functions: preview then commit") {
    const auto dir = fresh_dir("functions");
    Gateway gw(config(dir));
    const auto preview = gw.functions(json{{"description", "Add wbs() which shows where the beamstop is"}});
    REQUIRE(preview.status == 200);
    CHECK(preview.body["preview"]["input"] == "check where the beamstop is");
    CHECK(preview.body["preview"]["output"] == "wbs()");
    const auto v0 = gw.healthz().body["registry_version"].get<long long>();
    CHECK(gw.functions(json{{"description", "nothing matches this"}}).status == 502);
    const auto commit = gw.functions(json{{"entry", preview.body["preview"]}, {"added_by", "tester"}});
    REQUIRE(commit.status == 200);
    CHECK(commit.body["registry_version"].get<long long>() == v0 + 1);
    REQUIRE(gw.store().functions().size() == 1);
    CHECK(gw.store().functions()[0].added_by == "tester");
    CHECK(registry::load_registry(dir + "/registry.json").find("wbs"));
    CHECK(gw.functions(json{{"entry", {{"id", "x"}}}}).status == 422);
  }
  TEST_CASE("chat routes and sources") {
    Gateway gw(config(fresh_dir("chat")));
    const auto hello = gw.chat(json{{"query", "hello"}, {"session", "s1"}});
    REQUIRE(hello.status == 200);
    CHECK(hello.body["route"] == "generic");
    const auto sci = gw.chat(json{{"query", "Explain GIWAXS linecuts in detail"}, {"session", "s1"}});
    CHECK(sci.body["route"] == "scientific_thorough");
    REQUIRE(!sci.body["sources"].empty());
    CHECK(sci.body["sources"][0]["doc_id"] == "giwaxs.md");
    const auto none = gw.chat(json{{"query", "Zebra husbandry?"}, {"session", "s1"}});
    CHECK(none.body["route"] == "scientific_high_level");
    CHECK(none.body["answer"].get<std::string>().rfind("The context provided was not enough", 0) == 0);
    CHECK(gw.chat(json{{"query", ""}}).status == 400);
  }
  TEST_CASE("crash restart re-presents confirmed actions") {
    const auto dir = fresh_dir("restart");
    std::string id;
    {
      Gateway gw(config(dir));
      id = gw.input(input("Measure sample for 5 seconds.")).body["action_id"];
      auto a = *gw.cogs().find(id);
      a.status = cogs::ActionStatus::confirmed;
      gw.store().record(log_row_from_action(a), a);
    }
    Gateway gw(config(dir));
    const auto p = gw.pending("s1").body["pending"];
    REQUIRE(p.is_object());
    CHECK(p["action_id"] == id);
    CHECK(gw.log({}).body["rows"][0]["status"] == "pending");
    CHECK(gw.confirm(json{{"action_id", id}}).body["status"] == "executed");
    const std::string next = gw.input(input("Align the sample.")).body["action_id"];
    CHECK(next != id);
    CHECK(gw.log({}).body["rows"].size() == 2);
  }
  TEST_CASE("replay reproduces logged outputs") {
    const auto dir = fresh_dir("replay");
    auto cfg = config(dir);
    {
      Gateway gw(cfg);
      gw.confirm(json{{"action_id", gw.input(input("Measure sample for 5 seconds.")).body["action_id"]}});
      gw.confirm(json{{"action_id", gw.input(input("Move sample x to 1.5.")).body["action_id"]},
                      {"edited_code", "sam.xabs(2.5)"}});
      gw.input(input("Record that we observed unexpected peaks at high temperatures."));
      gw.confirm(json{{"action_id", gw.input(input("Show me the q image.")).body["action_id"]}});
    }
    const auto rep = replay_session(cfg, "s1");
    REQUIRE(rep.steps.size() == 4);
    CHECK(rep.identical);
    CHECK_THROWS_WITH_AS(replay_session(cfg, "nobody"), doctest::Contains("UnknownSession"), Error);
  }
  TEST_CASE("config errors") {
    auto j = config_json(fresh_dir("badcfg"));
    j["cogs"]["operator"]["backend"] = "missing";
    CHECK_THROWS_WITH_AS(gateway_config_from_json(j), doctest::Contains("BadConfig"), Error);
    CHECK_THROWS_WITH_AS(load_gateway_config("/nonexistent.json"), doctest::Contains("BadConfig"), Error);
    CHECK(load_gateway_config(kData + "/config/demo.json").chat.call.temperature == 0.7);
  }
}

TEST_SUITE("gateway.http") {
  TEST_CASE("REST round trip over a real socket") {
    auto cfg = config(fresh_dir("http"));
    cfg.port = 0;
    Gateway gw(cfg);
    std::thread th([&] { gw.serve(); });
    while (gw.bound_port() == 0) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    httplib::Client cli("127.0.0.1", gw.bound_port());
    const auto health = cli.Get("/healthz");
    REQUIRE(health);
    CHECK(health->status == 200);
    auto res = cli.Post("/input", input("Measure sample for 5 seconds.").dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto action = json::parse(res->body);
    res = cli.Get("/pending?session=s1");
    CHECK(json::parse(res->body)["pending"]["action_id"] == action["action_id"]);
    res = cli.Post("/confirm", json{{"action_id", action["action_id"]}}.dump(), "application/json");
    CHECK(json::parse(res->body)["status"] == "executed");
    res = cli.Get("/log?session=s1&confirmed=true");
    CHECK(json::parse(res->body)["rows"].size() == 1);
    CHECK(cli.Get("/log?confirmed=maybe")->status == 400);
    CHECK(cli.Post("/input", "{not json", "application/json")->status == 400);
    res = cli.Post("/chat", json{{"query", "hello"}}.dump(), "application/json");
    CHECK(json::parse(res->body)["route"] == "generic");

    auto busy_cfg = cfg;
    busy_cfg.port = gw.bound_port();
    busy_cfg.db_path = cfg.db_path + ".2";
    Gateway second(busy_cfg);
    CHECK_THROWS_WITH_AS(second.serve(), doctest::Contains("PortInUse"), Error);
    gw.stop();
    th.join();
  }
}
