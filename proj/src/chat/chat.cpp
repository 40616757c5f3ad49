#include "beamassist/chat.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "beamassist/error.hpp"
#include "beamassist/text.hpp"

namespace beamassist::chat {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string first_word(const std::string& reply) {
  const auto toks = text::split_whitespace(reply);
  if (toks.empty()) return {};
  std::string w = text::to_lower(toks.front());
  while (!w.empty() && std::ispunct(static_cast<unsigned char>(w.back()))) w.pop_back();
  std::size_t i = 0;
  while (i < w.size() && std::ispunct(static_cast<unsigned char>(w[i]))) ++i;
  return w.substr(i);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IOError", "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<fs::path> corpus_files(const std::string& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw Error("EmptyCorpus", "corpus directory " + dir + " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto ext = text::to_lower(e.path().extension().string());
    if (ext == ".txt" || ext == ".md") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string hex_sha256(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

cogs::CogCall decision_call(const cogs::CogCall& call) {
  cogs::CogCall c = call;
  c.temperature = 0.0;
  c.max_tokens = 8;
  return c;
}

std::string ask_backend(const cogs::CogCall& call, const std::string& system, const std::string& user) {
  if (!call.backend) throw Error("BadConfig", "chat has no backend");
  llm::ChatRequest req;
  req.system_prompt = system;
  req.user_prompt = user;
  req.temperature = call.temperature;
  req.max_tokens = call.max_tokens;
  req.model_id = call.model_id;
  req.seed = call.seed;
  return call.backend->complete(req).text;
}

std::string fill(const std::string& tmpl, const std::string& query) {
  std::string out = tmpl;
  const auto pos = out.find("{query}");
  if (pos == std::string::npos) return out + "\n\n" + query;
  return out.replace(pos, 7, query);
}

}  // namespace

std::string route_name(RouteKind k) {
  switch (k) {
    case RouteKind::generic: return "generic";
    case RouteKind::scientific_high_level: return "scientific_high_level";
    case RouteKind::scientific_thorough: return "scientific_thorough";
  }
  return "?";
}

std::optional<bool> parse_scientific(const std::string& reply) {
  const std::string w = first_word(reply);
  if (w == "scientific") return true;
  if (w == "generic") return false;
  return std::nullopt;
}

std::optional<bool> parse_thorough(const std::string& reply) {
  const std::string w = first_word(reply);
  if (w == "thorough") return true;
  if (w == "high-level" || w == "highlevel" || w == "high") return false;
  return std::nullopt;
}

RouteDecision route(const std::string& query, const cogs::CogCall& call, const RouterPrompts& prompts) {
  RouteDecision d;
  const cogs::CogCall c = decision_call(call);
  try {
    d.raw.push_back(ask_backend(c, prompts.scientific, fill(prompts.scientific_user, query)));
    const auto sci = parse_scientific(d.raw.back());
    if (!sci) d.fallback = true;
    if (!sci.value_or(false)) return d;
    d.raw.push_back(ask_backend(c, prompts.thorough, fill(prompts.thorough_user, query)));
    const auto thorough = parse_thorough(d.raw.back());
    if (!thorough) d.fallback = true;
    d.kind = thorough.value_or(false) ? RouteKind::scientific_thorough : RouteKind::scientific_high_level;
  } catch (const Error& e) {
    throw Error("RouterUnavailable", e.what());
  }
  return d;
}

std::vector<std::string> tokenize(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : s) {
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> split_paragraphs(const std::string& s) {
  std::vector<std::string> out;
  std::vector<std::string> cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(text::join(cur, "\n"));
    cur.clear();
  };
  for (const auto& line : text::split_lines(s)) {
    if (text::trim(line).empty()) {
      flush();
    } else {
      cur.push_back(text::trim_copy(line));
    }
  }
  flush();
  return out;
}

CorpusIndex CorpusIndex::from_documents(const std::map<std::string, std::string>& docs, std::string fingerprint) {
  CorpusIndex idx;
  for (const auto& [id, body] : docs) {
    std::size_t k = 0;
    for (auto& p : split_paragraphs(body)) idx.chunks_.push_back({id, k++, std::move(p)});
  }
  if (fingerprint.empty()) {
    std::string all;
    for (const auto& [id, body] : docs) all += id + '\0' + body + '\0';
    fingerprint = hex_sha256(all);
  }
  idx.fingerprint_ = std::move(fingerprint);
  idx.finish();
  return idx;
}

std::string CorpusIndex::fingerprint_dir(const std::string& dir) {
  std::string all;
  for (const auto& p : corpus_files(dir)) all += fs::relative(p, dir).generic_string() + '\0' + read_file(p.string()) + '\0';
  return hex_sha256(all);
}

CorpusIndex CorpusIndex::build(const std::string& dir) {
  std::map<std::string, std::string> docs;
  for (const auto& p : corpus_files(dir)) docs[fs::relative(p, dir).generic_string()] = read_file(p.string());
  return from_documents(docs);
}

CorpusIndex CorpusIndex::load_or_build(const std::string& dir, const std::string& cache_path) {
  const std::string fp = fingerprint_dir(dir);
  std::error_code ec;
  if (fs::exists(cache_path, ec)) {
    try {
      CorpusIndex cached = load(cache_path);
      if (cached.fingerprint_ == fp) return cached;
    } catch (const Error&) {
    }
  }
  CorpusIndex idx = build(dir);
  idx.save(cache_path);
  return idx;
}

void CorpusIndex::finish() {
  tf_.assign(chunks_.size(), {});
  length_.assign(chunks_.size(), 0);
  df_.clear();
  double total = 0;
  for (std::size_t i = 0; i < chunks_.size(); ++i) {
    const auto toks = tokenize(chunks_[i].text);
    for (const auto& t : toks) ++tf_[i][t];
    for (const auto& [t, n] : tf_[i]) ++df_[t];
    length_[i] = static_cast<double>(toks.size());
    total += length_[i];
  }
  avg_length_ = chunks_.empty() ? 0 : total / static_cast<double>(chunks_.size());
}

RetrievedContext CorpusIndex::retrieve(const std::string& query, std::size_t budget) const {
  if (chunks_.empty()) throw Error("EmptyCorpus", "the corpus has no text chunks");
  RetrievedContext ctx;
  ctx.budget = budget;
  if (budget == 0) return ctx;
  std::vector<std::string> terms = tokenize(query);
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  const double N = static_cast<double>(chunks_.size());
  std::vector<ScoredChunk> scored;
  for (std::size_t i = 0; i < chunks_.size(); ++i) {
    double s = 0;
    for (const auto& t : terms) {
      const auto it = tf_[i].find(t);
      if (it == tf_[i].end()) continue;
      const double n = df_.at(t);
      const double idf = std::log(1.0 + (N - n + 0.5) / (n + 0.5));
      const double f = it->second;
      s += idf * f * (k1 + 1) / (f + k1 * (1 - b + b * length_[i] / std::max(avg_length_, 1e-12)));
    }
    if (s > 0) scored.push_back({chunks_[i], s});
  }
  std::stable_sort(scored.begin(), scored.end(), [](const ScoredChunk& x, const ScoredChunk& y) {
    if (x.score != y.score) return x.score > y.score;
    if (x.chunk.doc_id != y.chunk.doc_id) return x.chunk.doc_id < y.chunk.doc_id;
    return x.chunk.index < y.chunk.index;
  });
  if (scored.size() > budget) scored.resize(budget);
  ctx.chunks = std::move(scored);
  return ctx;
}

void CorpusIndex::save(const std::string& path) const {
  json j{{"format", "beamassist-bm25"}, {"version", kIndexVersion}, {"fingerprint", fingerprint_}};
  j["chunks"] = json::array();
  for (const auto& c : chunks_) j["chunks"].push_back(json{{"doc_id", c.doc_id}, {"index", c.index}, {"text", c.text}});
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw Error("IOError", "cannot write " + tmp);
    out << j.dump() << '\n';
  }
  fs::rename(tmp, path);
}

CorpusIndex CorpusIndex::load(const std::string& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error("IndexMismatch", path + ": " + e.what());
  }
  if (j.value("format", "") != "beamassist-bm25" || j.value("version", 0) != kIndexVersion)
    throw Error("IndexMismatch", path + " has another index format or version");
  CorpusIndex idx;
  idx.fingerprint_ = j.value("fingerprint", "");
  for (const auto& c : j.at("chunks"))
    idx.chunks_.push_back({c.at("doc_id").get<std::string>(), c.at("index").get<std::size_t>(),
                           c.at("text").get<std::string>()});
  idx.finish();
  return idx;
}

std::string render_context(const RetrievedContext& ctx) {
  std::vector<std::string> parts;
  for (const auto& s : ctx.chunks)
    parts.push_back("[" + s.chunk.doc_id + " #" + std::to_string(s.chunk.index) + "] (relevance " +
                    text::format_number(std::round(s.score * 100) / 100) + ") " + s.chunk.text);
  return text::join(parts, "\n\n");
}

std::string render_prompt(const std::string& tmpl, const RetrievedContext& ctx, const std::string& question) {
  const std::map<std::string, std::string> vars = {{"{context}", render_context(ctx)}, {"{question}", question}};
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    bool hit = false;
    for (const auto& [key, value] : vars)
      if (tmpl.compare(i, key.size(), key) == 0) {
        out += value;
        i += key.size();
        hit = true;
        break;
      }
    if (!hit) out += tmpl[i++];
  }
  return out;
}

std::string load_default_template() { return read_file(std::string(BEAMASSIST_DATA_DIR) + "/prompts/paperqa_lite.txt"); }

ChatRouter::ChatRouter(ChatConfig cfg, std::shared_ptr<const CorpusIndex> index)
    : cfg_(std::move(cfg)), index_(std::move(index)) {
  if (cfg_.template_text.empty()) cfg_.template_text = load_default_template();
}

std::shared_ptr<const CorpusIndex> ChatRouter::index() const {
  std::lock_guard lock(mu_);
  return index_;
}

void ChatRouter::swap_index(std::shared_ptr<const CorpusIndex> index) {
  std::lock_guard lock(mu_);
  index_ = std::move(index);
}

ChatAnswer ChatRouter::ask(const std::string& query) const {
  if (text::trim(query).empty()) throw Error("InvalidArgs", "empty query");
  const auto t0 = std::chrono::steady_clock::now();
  ChatAnswer a;
  a.route = route(query, cfg_.call, cfg_.prompts);
  if (a.route.kind == RouteKind::generic) {
    a.prompt = query;
    a.text = ask_backend(cfg_.call, "You are a helpful assistant at a synchrotron beamline.", query);
  } else {
    const auto idx = index();
    const std::size_t budget =
        a.route.kind == RouteKind::scientific_thorough ? cfg_.thorough_budget : cfg_.high_level_budget;
    try {
      if (!idx) throw Error("EmptyCorpus", "no corpus index loaded");
      a.context = idx->retrieve(query, budget);
    } catch (const Error& e) {
      if (e.kind() != "EmptyCorpus") throw;
      a.context.budget = budget;
    }
    a.prompt = render_prompt(cfg_.template_text, a.context, query);
    a.text = ask_backend(cfg_.call, "You are a scientific assistant at a synchrotron beamline.", a.prompt);
  }
  a.latency_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return a;
}

}  // namespace beamassist::chat
