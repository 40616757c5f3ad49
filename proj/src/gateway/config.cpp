#include <filesystem>
#include <fstream>
#include <sstream>

#include "beamassist/error.hpp"
#include "beamassist/gateway/service.hpp"

namespace beamassist::gateway {

namespace fs = std::filesystem;

namespace {

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

cogs::CogCall cog_call(const json& j, const json& backends, const std::string& base, double default_temperature) {
  cogs::CogCall c;
  c.temperature = default_temperature;
  if (j.is_null()) return c;
  json spec;
  if (j.contains("backend") && j["backend"].is_string()) {
    const std::string name = j["backend"].get<std::string>();
    if (!backends.contains(name)) throw Error("BadConfig", "unknown backend '" + name + "'");
    spec = backends[name];
  } else if (j.contains("backend")) {
    spec = j["backend"];
  } else if (backends.contains("default")) {
    spec = backends["default"];
  } else {
    throw Error("BadConfig", "no backend configured");
  }
  auto bs = llm::backend_spec_from_json(spec, base);
  llm::apply_env_overrides(bs);
  bs.validate();
  c.backend = llm::make_backend(bs);
  c.model_id = j.value("model", bs.model);
  c.temperature = j.value("temperature", default_temperature);
  c.max_tokens = j.value("max_tokens", 1024);
  if (j.contains("seed") && j["seed"].is_number_integer()) c.seed = j["seed"].get<long long>();
  return c;
}

}  // namespace

GatewayConfig gateway_config_from_json(const json& j, const std::string& base) {
  GatewayConfig c;
  try {
    if (j.contains("server")) {
      c.host = j["server"].value("host", c.host);
      c.port = j["server"].value("port", c.port);
    }
    c.db_path = resolve(base, j.value("db_path", c.db_path));
    c.registry_path = j.contains("registry") ? resolve(base, j["registry"].get<std::string>())
                                             : std::string(BEAMASSIST_DATA_DIR) + "/registry/cms/examples.json";
    c.registry_out = j.contains("registry_out") ? resolve(base, j["registry_out"].get<std::string>())
                                                : c.db_path + ".registry.json";
    c.instrument = j.value("instrument", c.instrument);
    const json backends = j.value("backends", json::object());
    const json cj = j.value("cogs", json::object());
    c.cogs.classifier = cog_call(cj.value("classifier", json::object()), backends, base, 0.0);
    c.cogs.operator_ = cog_call(cj.value("operator", json::object()), backends, base, 0.0);
    c.cogs.analyst = cog_call(cj.value("analyst", json::object()), backends, base, 0.0);
    c.cogs.refiner = cog_call(cj.value("refiner", json::object()), backends, base, 0.0);
    if (cj.contains("classifier") && cj["classifier"].contains("style")) {
      const auto style = registry::style_from_name(cj["classifier"]["style"].get<std::string>());
      if (!style) throw Error("BadConfig", "unknown classifier style");
      c.cogs.classifier_style = *style;
    }
    if (j.contains("sim")) {
      const json& s = j["sim"];
      if (s.contains("initial_state")) c.cogs.initial_state = bcl::state_from_json(s["initial_state"]);
      if (s.contains("limits")) {
        const json& l = s["limits"];
        auto& lim = c.cogs.sim_limits;
        lim.max_sim_time = l.value("max_sim_time", lim.max_sim_time);
        lim.max_events = l.value("max_events", lim.max_events);
        lim.max_steps = l.value("max_steps", lim.max_steps);
        lim.poll_interval = l.value("poll_interval", lim.poll_interval);
        lim.measure_overhead = l.value("measure_overhead", lim.measure_overhead);
        lim.align_duration = l.value("align_duration", lim.align_duration);
      }
    }
    const json a = j.value("analysis", json::object());
    if (a.contains("frame")) c.cogs.frame_path = resolve(base, a["frame"].get<std::string>());
    c.cogs.output_dir = resolve(base, a.value("output_dir", c.cogs.output_dir));
    c.cogs.notebook_dir = resolve(base, j.value("notebook_dir", c.cogs.output_dir + "/notebook"));
    const json tools = j.value("tools", json::object());
    for (const auto& [tool, cmd] : tools.items())
      c.cogs.tools.commands[tool] = cmd.get<std::string>();
    if (j.contains("chat")) {
      const json& ch = j["chat"];
      c.chat.call = cog_call(ch, backends, base, 0.7);
      if (ch.contains("corpus_dir")) c.corpus_dir = resolve(base, ch["corpus_dir"].get<std::string>());
      if (ch.contains("index_cache")) c.index_cache = resolve(base, ch["index_cache"].get<std::string>());
      c.chat.high_level_budget = ch.value("high_level_budget", c.chat.high_level_budget);
      c.chat.thorough_budget = ch.value("thorough_budget", c.chat.thorough_budget);
      if (ch.contains("template")) {
        std::ifstream in(resolve(base, ch["template"].get<std::string>()), std::ios::binary);
        if (!in) throw Error("BadConfig", "cannot read chat template");
        std::ostringstream ss;
        ss << in.rdbuf();
        c.chat.template_text = ss.str();
      }
    }
    else if (backends.contains("default")) {
      c.chat.call = cog_call(json::object(), backends, base, 0.7);
    }
    if (j.contains("transcription_endpoint") && j["transcription_endpoint"].is_string())
      c.transcription_endpoint = j["transcription_endpoint"].get<std::string>();
    if (j.contains("transport")) {
      c.transport = j["transport"].value("kind", c.transport);
      c.transport_dir = resolve(base, j["transport"].value("dir", std::string()));
    }
  } catch (const json::exception& e) {
    throw Error("BadConfig", e.what());
  } catch (const Error& e) {
    if (e.kind() == "BadConfig") throw;
    throw Error("BadConfig", e.what());
  }
  return c;
}

GatewayConfig load_gateway_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("BadConfig", "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::exception& e) {
    throw Error("BadConfig", path + ": " + e.what());
  }
  return gateway_config_from_json(j, fs::absolute(path).parent_path().string());
}

}  // namespace beamassist::gateway
