#include <cmath>
#include <filesystem>
#include <fstream>

#include "beamassist/chat.hpp"
#include "beamassist/error.hpp"
#include "doctest.h"

using namespace beamassist;
using namespace beamassist::chat;
using doctest::Approx;
using llm::ScriptRule;

namespace {

cogs::CogCall backend(std::vector<ScriptRule> rules) {
  llm::BackendSpec spec;
  spec.kind = rules.empty() ? llm::BackendKind::echo : llm::BackendKind::scripted;
  spec.rules = std::move(rules);
  cogs::CogCall c;
  c.backend = llm::make_backend(spec);
  c.temperature = 0.7;
  return c;
}

ScriptRule sub(std::string match, std::string out) { return {std::move(match), ScriptRule::Mode::substring, std::move(out)}; }

const std::map<std::string, std::string> kDocs = {
    {"a_saxs.md", "SAXS probes nanoscale structure.\n\nSmall angle scattering measures electron density contrast."},
    {"b_giwaxs.md", "GIWAXS uses grazing incidence geometry.\nThe incident angle is small.\n\nPeaks index crystal "
                    "planes of thin films."},
    {"c_misc.txt", "The beamline has a Linkam stage for heating."},
};

std::vector<ScriptRule> route_rules() {
  return {sub("Message: What's the weather like?\n", "generic"),
          sub("Message: hello\n", "Generic."),
          sub("scientific or generic.", "scientific"),
          sub("Question: Explain GIWAXS geometry in detail with references\nClassify", "Thorough"),
          sub("Question: Define unicorn horns\nClassify", "maybe"),
          sub("thorough or high-level.", "high-level"),
          sub("Question: Define unicorn horns", "The context provided was not enough, but based on what I know, this is the answer: a myth."),
          sub("Question:", "answer from context")};
}

// Independent BM25 over whitespace-free lowercase alnum tokens.
double oracle_bm25(const std::vector<std::vector<std::string>>& docs, std::size_t d, const std::vector<std::string>& q) {
  double avg = 0;
  for (const auto& x : docs) avg += x.size();
  avg /= docs.size();
  double s = 0;
  for (const auto& t : q) {
    int n = 0;
    for (const auto& x : docs) n += std::find(x.begin(), x.end(), t) != x.end();
    const double f = std::count(docs[d].begin(), docs[d].end(), t);
    if (f == 0) continue;
    const double idf = std::log((docs.size() - n + 0.5) / (n + 0.5) + 1);
    s += idf * f * 2.2 / (f + 1.2 * (0.25 + 0.75 * docs[d].size() / avg));
  }
  return s;
}

}  // namespace

TEST_SUITE("chat.route") {
  TEST_CASE("three routes from scripted fixtures") {
    const auto call = backend(route_rules());
    CHECK(route("What's the weather like?", call).kind == RouteKind::generic);
    CHECK(route("What's the weather like?", call).raw.size() == 1);
    CHECK(route("Explain GIWAXS geometry in detail with references", call).kind == RouteKind::scientific_thorough);
    CHECK(route("Quick summary: what is SAXS?", call).kind == RouteKind::scientific_high_level);
  }
  TEST_CASE("unparsable replies fall back") {
    const auto d = route("Define unicorn horns", backend(route_rules()));
    CHECK(d.kind == RouteKind::scientific_high_level);
    CHECK(d.fallback);
    CHECK(route("anything", backend({sub("anything", "???")})).kind == RouteKind::generic);
  }
  TEST_CASE("backend errors") {
    CHECK_THROWS_WITH_AS(route("x", backend({sub("never", "y")})), doctest::Contains("RouterUnavailable"), Error);
  }
  TEST_CASE("label parsing") {
    CHECK(parse_scientific("Scientific.") == true);
    CHECK(parse_scientific("GENERIC") == false);
    CHECK_FALSE(parse_scientific("science"));
    CHECK(parse_thorough("High-level") == false);
    CHECK(parse_thorough("thorough!") == true);
  }
}

TEST_SUITE("chat.retrieve") {
  TEST_CASE("paragraph chunks") {
    const auto idx = CorpusIndex::from_documents(kDocs);
    CHECK(idx.chunks().size() == 5);
    CHECK(idx.chunks()[2].doc_id == "b_giwaxs.md");
    CHECK(idx.chunks()[2].text == "GIWAXS uses grazing incidence geometry.\nThe incident angle is small.");
  }
  TEST_CASE("unique term ranks first, scores match the oracle") {
    const auto idx = CorpusIndex::from_documents(kDocs);
    const auto ctx = idx.retrieve("Linkam heating", 3);
    REQUIRE(ctx.chunks.size() == 1);
    CHECK(ctx.chunks[0].chunk.doc_id == "c_misc.txt");
    std::vector<std::vector<std::string>> toks;
    for (const auto& c : idx.chunks()) toks.push_back(tokenize(c.text));
    const auto all = idx.retrieve("the incident angle scattering", 10);
    for (std::size_t i = 0; i + 1 < all.chunks.size(); ++i) CHECK(all.chunks[i].score >= all.chunks[i + 1].score);
    for (const auto& s : all.chunks) {
      std::size_t d = 0;
      while (idx.chunks()[d].doc_id != s.chunk.doc_id || idx.chunks()[d].index != s.chunk.index) ++d;
      CHECK(s.score == Approx(oracle_bm25(toks, d, {"the", "incident", "angle", "scattering"})));
    }
  }
  TEST_CASE("budget, ties and empty corpus") {
    const auto idx = CorpusIndex::from_documents({{"z.md", "alpha beta"}, {"a.md", "alpha beta"}});
    CHECK(idx.retrieve("alpha", 0).chunks.empty());
    const auto ctx = idx.retrieve("alpha", 5);
    REQUIRE(ctx.chunks.size() == 2);
    CHECK(ctx.chunks[0].score == ctx.chunks[1].score);
    CHECK(ctx.chunks[0].chunk.doc_id == "a.md");
    CHECK(idx.retrieve("alpha", 1).chunks.size() == 1);
    CHECK(idx.retrieve("alpha", 5).chunks[0].chunk.text == idx.retrieve("alpha", 5).chunks[0].chunk.text);
    CHECK_THROWS_WITH_AS(CorpusIndex::from_documents({}).retrieve("x", 3), doctest::Contains("EmptyCorpus"), Error);
  }
  TEST_CASE("cached index is reused until the corpus changes") {
    const auto dir = std::filesystem::temp_directory_path() / "beamassist_chat_corpus";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir / "sub");
    for (const auto& [name, body] : kDocs) std::ofstream(dir / name) << body;
    std::ofstream(dir / "sub" / "ignored.pdf") << "binary";
    const auto cache = (dir / "index.json").string();
    const auto first = CorpusIndex::load_or_build(dir.string(), cache);
    CHECK(first.chunks().size() == 5);
    CHECK(CorpusIndex::load(cache).fingerprint() == first.fingerprint());
    std::ofstream(dir / "sub" / "new.md") << "Extra paragraph about beamstops.";
    const auto second = CorpusIndex::load_or_build(dir.string(), cache);
    CHECK(second.chunks().size() == 6);
    CHECK(second.fingerprint() != first.fingerprint());
    CHECK(second.chunks().back().doc_id == "sub/new.md");
  }
}

TEST_SUITE("chat.answer") {
  TEST_CASE("prompt template and budgets") {
    const auto idx = std::make_shared<CorpusIndex>(CorpusIndex::from_documents(kDocs));
    ChatConfig cfg;
    cfg.call = backend(route_rules());
    ChatRouter router(cfg, idx);
    const auto thorough = router.ask("Explain GIWAXS geometry in detail with references");
    CHECK(thorough.route.kind == RouteKind::scientific_thorough);
    CHECK(thorough.context.budget == 8);
    CHECK(thorough.prompt.find("Context (with relevance scores):") != std::string::npos);
    CHECK(thorough.prompt.find("Question: Explain GIWAXS") != std::string::npos);
    CHECK(thorough.prompt.find("[b_giwaxs.md #0]") != std::string::npos);
    CHECK(thorough.text == "answer from context");
    const auto brief = router.ask("Quick summary: what is SAXS?");
    CHECK(brief.context.budget == 3);
  }
  TEST_CASE("thorough budget yields a longer prompt") {
    std::map<std::string, std::string> docs;
    for (int i = 0; i < 12; ++i) docs["d" + std::to_string(10 + i) + ".md"] = "giwaxs paragraph number " + std::to_string(i);
    const auto idx = std::make_shared<CorpusIndex>(CorpusIndex::from_documents(docs));
    const auto hi = idx->retrieve("giwaxs", 3), th = idx->retrieve("giwaxs", 8);
    const auto tmpl = load_default_template();
    CHECK(th.chunks.size() == 8);
    CHECK(render_prompt(tmpl, th, "q").size() > render_prompt(tmpl, hi, "q").size());
  }
  TEST_CASE("empty context and generic route") {
    const auto idx = std::make_shared<CorpusIndex>(CorpusIndex::from_documents(kDocs));
    ChatConfig cfg;
    cfg.call = backend(route_rules());
    ChatRouter router(cfg, idx);
    const auto a = router.ask("Define unicorn horns");
    CHECK(a.context.chunks.empty());
    CHECK(a.text.rfind("The context provided was not enough", 0) == 0);

    ChatConfig echo_cfg;
    echo_cfg.call = backend({});
    ChatRouter echo(echo_cfg, idx);
    // The echo backend answers the routing question with its own prompt, which does not parse.
    const auto g = echo.ask("hello");
    CHECK(g.route.kind == RouteKind::generic);
    CHECK(g.text == "hello");
  }
  TEST_CASE("template substitution is single pass") {
    RetrievedContext ctx;
    ctx.chunks.push_back({{"d", 0, "text with {question} inside"}, 1.0});
    const auto p = render_prompt("C: {context}\nQ: {question}", ctx, "real");
    CHECK(p == "C: [d #0] (relevance 1) text with {question} inside\nQ: real");
  }
}
