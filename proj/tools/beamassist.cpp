#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "beamassist/analysis/engine.hpp"
#include "beamassist/bcl/ast.hpp"
#include "beamassist/bcl/interpreter.hpp"
#include "beamassist/cogs.hpp"
#include "beamassist/error.hpp"
#include "beamassist/eval/runner.hpp"
#include "beamassist/gateway/service.hpp"
#include "beamassist/registry.hpp"

using namespace beamassist;
using json = nlohmann::ordered_json;

namespace {

const std::string kDefaultConfig = std::string(BEAMASSIST_DATA_DIR) + "/config/demo.json";
const std::string kDefaultRegistry = std::string(BEAMASSIST_DATA_DIR) + "/registry/cms/examples.json";

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IOError", "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& body) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("IOError", "cannot write " + path);
  out << body;
}

volatile std::sig_atomic_t g_stop = 0;

void on_signal(int) { g_stop = 1; }

int gateway_serve(const std::string& config, std::optional<int> port) {
  auto cfg = gateway::load_gateway_config(config);
  if (port) cfg.port = *port;
  gateway::Gateway gw(cfg);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::atomic<bool> done{false};
  std::thread watcher([&] {
    bool announced = false;
    while (!done) {
      if (!announced && gw.bound_port() != 0) {
        std::cerr << "listening on " << cfg.host << ":" << gw.bound_port() << "\n";
        announced = true;
      }
      if (g_stop) gw.stop();
      std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
  });
  try {
    gw.serve();
  } catch (...) {
    done = true;
    watcher.join();
    throw;
  }
  done = true;
  watcher.join();
  return 0;
}

int gateway_replay(const std::string& config, const std::string& session) {
  const auto report = gateway::replay_session(gateway::load_gateway_config(config), session);
  std::cout << gateway::replay_to_json(report).dump(2) << "\n";
  return report.identical ? 0 : 1;
}

int registry_list(const std::string& path) {
  const auto reg = registry::load_registry(path);
  std::cout << "version " << reg.version << ", " << reg.entries.size() << " entries\n";
  for (const auto& e : reg.entries)
    std::cout << e.id << "\t" << registry::class_name(e.command_class) << "\t" << e.input << "\n";
  return 0;
}

int registry_add(const std::string& path, const std::string& entry_file, const std::string& out, bool unchecked) {
  const auto reg = registry::load_registry(path);
  const json j = json::parse(slurp(entry_file));
  auto entry = registry::entry_from_json(j);
  if (unchecked) entry.unchecked = true;
  const auto next = registry::append_function(reg, entry);
  registry::save_registry(next, out.empty() ? path : out);
  std::cout << "added " << entry.id << ", registry version " << next.version << "\n";
  return 0;
}

eval::Predictor make_predictor(const std::string& cog, cogs::CogManager& mgr) {
  const auto& cfg = mgr.config();
  if (cog == "classifier")
    return [&mgr, &cfg](const eval::EvalCase& c) {
      const auto r = cogs::classify(c.input, cfg.classifier_style, mgr.registry_snapshot(), cfg.classifier);
      return eval::Prediction{cogs::label_name(r.cls), r.latency_s};
    };
  if (cog == "operator")
    return [&mgr, &cfg](const eval::EvalCase& c) {
      const auto r = cogs::operate(c.input, mgr.registry_snapshot(), cfg.operator_);
      return eval::Prediction{r.code, r.latency_s};
    };
  if (cog == "analyst")
    return [&mgr, &cfg](const eval::EvalCase& c) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto cmds = cogs::analyze(c.input, mgr.registry_snapshot(), cfg.analyst);
      std::string text;
      for (const auto& cmd : cmds) text += (text.empty() ? "" : " ") + cmd.to_string();
      return eval::Prediction{text, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()};
    };
  throw Error("InvalidArgs", "unknown cog " + cog + " (classifier, operator or analyst)");
}

int eval_run(const std::string& dataset, const std::string& cog, int runs, int parallelism, const std::string& config,
             const std::string& out) {
  const auto cfg = gateway::load_gateway_config(config);
  cogs::CogManager mgr(cfg.cogs, registry::load_registry(cfg.registry_path));
  const auto cases = eval::load_dataset(dataset);
  eval::RunOptions opts;
  opts.runs = runs;
  opts.parallelism = parallelism;
  opts.scoring.sim_limits = cfg.cogs.sim_limits;
  opts.scoring.initial_state = cfg.cogs.initial_state;
  opts.scoring.extra_functions = registry::registry_functions(mgr.registry_snapshot());
  const auto report = eval::run_eval(cases, make_predictor(cog, mgr), opts);
  std::cout << eval::report_to_csv(report);
  if (!out.empty()) {
    write_file(out + ".json", eval::report_to_json(report).dump(2) + "\n");
    write_file(out + ".csv", eval::report_to_csv(report));
    write_file(out + ".jsonl", eval::outcomes_to_jsonl(report));
  }
  return 0;
}

int sim_run(const std::string& file, const std::string& state_file, const std::string& trace_out,
            const std::string& registry_path) {
  bcl::ParseOptions popts;
  if (!registry_path.empty()) popts.extra_functions = registry::registry_functions(registry::load_registry(registry_path));
  const auto program = bcl::parse_program(slurp(file), popts);
  bcl::InstrumentState s0;
  if (!state_file.empty()) s0 = bcl::state_from_json(json::parse(slurp(state_file)));
  bcl::ExecResult r;
  int code = 0;
  try {
    r = bcl::execute(program, s0);
  } catch (const bcl::SimError& e) {
    std::cerr << e.what() << "\n";
    r.trace = e.partial_trace;
    r.state = e.partial_state;
    code = 1;
  }
  const std::string jsonl = bcl::trace_to_jsonl(r.trace);
  if (trace_out.empty())
    std::cout << jsonl;
  else
    write_file(trace_out, jsonl);
  std::cerr << r.trace.events.size() << " events, sim time " << r.state.sim_time << " s"
            << (r.halted ? ", halted" : "") << "\n";
  std::cerr << bcl::state_to_json(r.state).dump() << "\n";
  return code;
}

int analyze(const std::string& protocol, std::optional<double> arg, std::optional<double> thickness,
            const std::string& frame, const std::string& out, bool serial) {
  const auto p = analysis::protocol_from_name(protocol);
  if (!p) throw Error("InvalidProtocol", "unknown protocol " + protocol);
  analysis::ProtocolCommand cmd{*p, arg, thickness};
  const auto f = analysis::read_frame(frame);
  const auto res = analysis::dispatch_protocol(cmd, f, out, serial ? analysis::Exec::serial : analysis::Exec::parallel);
  std::cout << res.summary << "\n";
  for (const auto& file : res.files) std::cout << file << "\n";
  return 0;
}

int frame_synth(const std::string& out, double q0, double amplitude, double sigma, double background,
                std::optional<std::uint64_t> seed) {
  analysis::SynthSpec spec;
  spec.rings = {analysis::Ring{q0, amplitude, sigma}};
  spec.background = background;
  spec.noise_seed = seed;
  analysis::write_frame(analysis::synth_frame(analysis::DetectorGeometry{}, spec), out);
  std::cout << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Beamline assistant: gateway, registry, evaluation, simulator and analysis tools"};
  app.require_subcommand(1);
  int code = 0;

  auto* gw = app.add_subcommand("gateway", "Run or replay the gateway");
  gw->require_subcommand(1);
  std::string config = kDefaultConfig;
  std::optional<int> port;
  auto* serve = gw->add_subcommand("serve", "Serve the REST API");
  serve->add_option("--config", config, "Gateway JSON config")->check(CLI::ExistingFile);
  serve->add_option("--port", port, "Override the configured port (0 picks a free one)");
  serve->callback([&] { code = gateway_serve(config, port); });
  std::string session;
  auto* replay = gw->add_subcommand("replay", "Re-run a logged session and compare outputs");
  replay->add_option("session", session, "Session id")->required();
  replay->add_option("--config", config, "Gateway JSON config")->check(CLI::ExistingFile);
  replay->callback([&] { code = gateway_replay(config, session); });

  auto* reg = app.add_subcommand("registry", "Inspect or extend the function registry");
  reg->require_subcommand(1);
  std::string registry_path = kDefaultRegistry, entry_file, registry_out;
  bool unchecked = false;
  auto* list = reg->add_subcommand("list", "List entries");
  list->add_option("--registry", registry_path, "Registry JSON")->check(CLI::ExistingFile);
  list->callback([&] { code = registry_list(registry_path); });
  auto* add = reg->add_subcommand("add", "Append or replace an entry");
  add->add_option("entry", entry_file, "Entry JSON file")->required()->check(CLI::ExistingFile);
  add->add_option("--registry", registry_path, "Registry JSON")->check(CLI::ExistingFile);
  add->add_option("--out", registry_out, "Write here instead of in place");
  add->add_flag("--unchecked", unchecked, "Skip the usage example check");
  add->callback([&] { code = registry_add(registry_path, entry_file, registry_out, unchecked); });

  auto* ev = app.add_subcommand("eval", "Evaluate a cog against a dataset");
  ev->require_subcommand(1);
  std::string dataset, cog, out;
  int runs = 5, parallelism = 1;
  auto* run = ev->add_subcommand("run", "Run the evaluation protocol");
  run->add_option("dataset", dataset, "JSONL dataset")->required()->check(CLI::ExistingFile);
  run->add_option("--cog", cog, "classifier, operator or analyst")->required();
  run->add_option("--runs", runs, "Repetitions")->check(CLI::PositiveNumber);
  run->add_option("--parallelism", parallelism, "Concurrent cases")->check(CLI::PositiveNumber);
  run->add_option("--config", config, "Config providing backends and registry")->check(CLI::ExistingFile);
  run->add_option("--out", out, "Write <out>.json, <out>.csv and <out>.jsonl");
  run->callback([&] { code = eval_run(dataset, cog, runs, parallelism, config, out); });

  auto* sim = app.add_subcommand("sim", "Instrument simulator");
  sim->require_subcommand(1);
  std::string program, state_file, trace_out, sim_registry;
  auto* simrun = sim->add_subcommand("run", "Execute a command-language program");
  simrun->add_option("file", program, "Program source")->required()->check(CLI::ExistingFile);
  simrun->add_option("--state", state_file, "Initial state JSON")->check(CLI::ExistingFile);
  simrun->add_option("--trace", trace_out, "Write the JSONL trace here instead of stdout");
  simrun->add_option("--registry", sim_registry, "Registry whose functions extend the whitelist")
      ->check(CLI::ExistingFile);
  simrun->callback([&] { code = sim_run(program, state_file, trace_out, sim_registry); });

  std::string protocol, frame, analyze_out;
  std::optional<double> arg, thickness;
  bool serial = false;
  auto* an = app.add_subcommand("analyze", "Run one analysis protocol on a frame");
  an->add_option("protocol", protocol, "Protocol name")->required();
  an->add_option("arg", arg, "Protocol argument");
  an->add_option("--frame", frame, "Frame file")->required()->check(CLI::ExistingFile);
  an->add_option("--thickness", thickness, "Linecut thickness");
  an->add_option("--out", analyze_out, "Output directory");
  an->add_flag("--serial", serial, "Use the serial reference kernels");
  an->callback([&] { code = analyze(protocol, arg, thickness, frame, analyze_out, serial); });

  auto* fr = app.add_subcommand("frame", "Detector frames");
  fr->require_subcommand(1);
  std::string frame_out;
  double q0 = 1.5, amplitude = 1000, sigma = 0.05, background = 0;
  std::optional<std::uint64_t> seed;
  auto* synth = fr->add_subcommand("synth", "Write a synthetic ring frame");
  synth->add_option("--out", frame_out, "Frame path; geometry goes to <out>.json")->required();
  synth->add_option("--q0", q0, "Ring position in 1/A");
  synth->add_option("--amplitude", amplitude, "Ring amplitude");
  synth->add_option("--sigma", sigma, "Ring width in 1/A");
  synth->add_option("--background", background, "Flat background");
  synth->add_option("--seed", seed, "Noise seed; noiseless when omitted");
  synth->callback([&] { code = frame_synth(frame_out, q0, amplitude, sigma, background, seed); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return code;
}
