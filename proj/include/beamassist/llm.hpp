#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace beamassist::llm {

using json = nlohmann::ordered_json;

struct ChatRequest {
  std::string system_prompt;
  std::string user_prompt;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::optional<long long> seed;
  std::string model_id;

  // Throws Error("InvalidRequest").
  void validate() const;
};

struct ChatResponse {
  std::string text;  // verbatim
  double latency_s = 0;
  std::optional<std::pair<long long, long long>> token_counts;  // prompt, completion
};

enum class BackendKind { remote_openai_compatible, scripted, echo };

std::string backend_kind_name(BackendKind k);

struct ScriptRule {
  enum class Mode { exact, substring };
  std::string match;
  Mode mode = Mode::exact;
  std::string output;
};

struct BackendSpec {
  BackendKind kind = BackendKind::echo;
  std::optional<std::string> endpoint;  // base URL, e.g. http://localhost:11434/v1
  std::optional<std::string> api_key;
  std::string model;
  std::vector<ScriptRule> rules;
  double timeout_s = 120;

  // Throws Error("InvalidBackend") when remote lacks an endpoint or scripted lacks rules.
  void validate() const;
};

// {"match": str, "mode": "exact"|"substring", "output": str} per line.
std::vector<ScriptRule> parse_rules_jsonl(const std::string& text);
std::vector<ScriptRule> load_rules_jsonl(const std::string& path);

// {"kind": ..., "endpoint": ..., "api_key": ..., "model": ..., "timeout_s": ...,
//  "rules": [...] | "rules_file": "relative/or/absolute.jsonl"}
BackendSpec backend_spec_from_json(const json& j, const std::string& base_dir = ".");

// BEAMASSIST_LLM_ENDPOINT and BEAMASSIST_LLM_API_KEY override remote specs.
void apply_env_overrides(BackendSpec& spec);

class Backend {
 public:
  virtual ~Backend() = default;
  // Errors: Timeout, Unreachable, BackendError (bad status or payload), NoRuleMatched.
  virtual ChatResponse complete(const ChatRequest& req) const = 0;
  virtual BackendKind kind() const = 0;
};

std::shared_ptr<Backend> make_backend(const BackendSpec& spec);

// Convenience: one-shot completion.
ChatResponse complete(const BackendSpec& spec, const ChatRequest& req);

}  // namespace beamassist::llm
