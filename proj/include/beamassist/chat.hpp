#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "beamassist/cogs.hpp"

namespace beamassist::chat {

enum class RouteKind { generic, scientific_high_level, scientific_thorough };

std::string route_name(RouteKind k);

// Stand-in decision prompts; each expects a one-word reply. The user
// templates substitute {query}.
struct RouterPrompts {
  std::string scientific =
      "Decide whether the user's message is a scientific question (X-ray scattering, beamline experiments, materials, "
      "data analysis) or a generic message. Reply with exactly one word: scientific or generic.";
  std::string scientific_user = "Message: {query}\nClassify: scientific or generic.";
  std::string thorough =
      "Decide whether the scientific question asks for a thorough answer with details and references or a brief "
      "high-level answer. Reply with exactly one word: thorough or high-level.";
  std::string thorough_user = "Question: {query}\nClassify: thorough or high-level.";
};

// First word, punctuation trimmed, case-insensitive. nullopt when unrecognized.
std::optional<bool> parse_scientific(const std::string& reply);
std::optional<bool> parse_thorough(const std::string& reply);

struct RouteDecision {
  RouteKind kind = RouteKind::generic;
  // Replies that did not parse fall back to generic / high-level.
  bool fallback = false;
  std::vector<std::string> raw;
};

// Throws Error("RouterUnavailable").
RouteDecision route(const std::string& query, const cogs::CogCall& call, const RouterPrompts& prompts = {});

struct Chunk {
  std::string doc_id;
  std::size_t index = 0;
  std::string text;
};

struct ScoredChunk {
  Chunk chunk;
  double score = 0;
};

struct RetrievedContext {
  std::vector<ScoredChunk> chunks;
  std::size_t budget = 0;
};

// Lowercased alphanumeric runs.
std::vector<std::string> tokenize(const std::string& s);
// Paragraphs separated by blank lines.
std::vector<std::string> split_paragraphs(const std::string& s);

inline constexpr int kIndexVersion = 1;

// Immutable BM25 index over paragraph chunks.
class CorpusIndex {
 public:
  static constexpr double k1 = 1.2;
  static constexpr double b = 0.75;

  // doc_id -> document text.
  static CorpusIndex from_documents(const std::map<std::string, std::string>& docs, std::string fingerprint = {});
  // *.txt and *.md files below dir; doc_id is the relative path.
  static CorpusIndex build(const std::string& dir);
  // Reuses the cache when its version and fingerprint match, else rebuilds and rewrites it.
  static CorpusIndex load_or_build(const std::string& dir, const std::string& cache_path);
  static std::string fingerprint_dir(const std::string& dir);

  // Positive scores only, best first; ties by doc_id then chunk index.
  // Throws Error("EmptyCorpus").
  RetrievedContext retrieve(const std::string& query, std::size_t budget) const;

  void save(const std::string& path) const;
  // Throws Error("IndexMismatch") for another version.
  static CorpusIndex load(const std::string& path);

  const std::vector<Chunk>& chunks() const { return chunks_; }
  const std::string& fingerprint() const { return fingerprint_; }

 private:
  void finish();

  std::vector<Chunk> chunks_;
  std::string fingerprint_;
  std::vector<std::map<std::string, int>> tf_;
  std::vector<double> length_;
  std::map<std::string, int> df_;
  double avg_length_ = 0;
};

// "[doc_id #index] (relevance 1.23) text" per chunk, blank line separated.
std::string render_context(const RetrievedContext& ctx);
std::string render_prompt(const std::string& tmpl, const RetrievedContext& ctx, const std::string& question);
std::string load_default_template();

struct ChatConfig {
  cogs::CogCall call;  // temperature 0.7 by default
  RouterPrompts prompts;
  std::string template_text;
  std::size_t high_level_budget = 3;
  std::size_t thorough_budget = 8;

  ChatConfig() { call.temperature = 0.7; }
};

struct ChatAnswer {
  RouteDecision route;
  RetrievedContext context;
  std::string prompt;
  std::string text;
  double latency_s = 0;
};

class ChatRouter {
 public:
  ChatRouter(ChatConfig cfg, std::shared_ptr<const CorpusIndex> index);
  // Routing errors raise RouterUnavailable; answer backend errors propagate.
  // An empty or missing corpus answers from an empty context.
  ChatAnswer ask(const std::string& query) const;
  void swap_index(std::shared_ptr<const CorpusIndex> index);

 private:
  std::shared_ptr<const CorpusIndex> index() const;

  ChatConfig cfg_;
  mutable std::mutex mu_;
  std::shared_ptr<const CorpusIndex> index_;
};

}  // namespace beamassist::chat
