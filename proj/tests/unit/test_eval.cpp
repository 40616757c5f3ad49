#include <random>

#include "beamassist/bcl/ast.hpp"
#include "beamassist/error.hpp"
#include "beamassist/eval/metrics.hpp"
#include "beamassist/eval/runner.hpp"
#include "beamassist/text.hpp"
#include "doctest.h"
#include "fixtures.hpp"

using namespace beamassist;
using namespace beamassist::eval;
using doctest::Approx;

namespace {

// Full-matrix DP, kept separate from the library's two-row version.
std::size_t oracle_ld(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j)
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] != b[j - 1])});
  return d[a.size()][b.size()];
}

std::string random_string(std::mt19937& rng, int max_len) {
  std::uniform_int_distribution<int> len(0, max_len), ch(0, 3);
  std::string s(len(rng), 'a');
  for (auto& c : s) c = static_cast<char>('a' + ch(rng));
  return s;
}

}  // namespace

TEST_SUITE("eval.levenshtein") {
  TEST_CASE("known distances") {
    CHECK(levenshtein("kitten", "sitting") == 3);
    CHECK(levenshtein("", "") == 0);
    CHECK(levenshtein("abc", "") == 3);
    CHECK(normalized_levenshtein("", "") == 0.0);
    CHECK(levenshtein("h\xc3\xa9llo", "hello") == 1);
  }

  TEST_CASE("angle scan distances") {
    CHECK(levenshtein(fixtures::kScanRef1, fixtures::kScanQwen) == 10);
    CHECK(levenshtein(fixtures::kScanRef1, fixtures::kScanMistral) == 12);
    CHECK(levenshtein(fixtures::kScanRef2, fixtures::kScanQwen) == 22);
    CHECK(levenshtein(fixtures::kScanRef2, fixtures::kScanMistral) == 14);
    CHECK(normalized_levenshtein(fixtures::kScanRef1, fixtures::kScanQwen) == Approx(0.0971).epsilon(0.001));
    CHECK(normalized_levenshtein(fixtures::kScanRef1, fixtures::kScanMistral) == Approx(0.1165).epsilon(0.001));
  }

  TEST_CASE("agrees with the full-matrix oracle and obeys the triangle inequality") {
    std::mt19937 rng(7);
    for (int k = 0; k < 1000; ++k) {
      const auto a = random_string(rng, 12), b = random_string(rng, 12), c = random_string(rng, 12);
      REQUIRE(levenshtein(a, b) == oracle_ld(a, b));
      CHECK(levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c));
      CHECK(levenshtein(a, b) == levenshtein(b, a));
      const double n = normalized_levenshtein(a, b);
      CHECK((n >= 0.0 && n <= 1.0));
    }
  }
}

TEST_SUITE("eval.exact_wer") {
  TEST_CASE("exact match ignores trailing whitespace only") {
    CHECK(exact_match("sam.measure(1)  \n\n", "sam.measure(1)"));
    CHECK(exact_match("a  \nb", "a\nb\n"));
    CHECK_FALSE(exact_match(" sam.measure(1)", "sam.measure(1)"));
    CHECK(exact_match_accuracy({"a", "b"}, {{"a"}, {"x", "b", "y"}}) == 1.0);
    CHECK(exact_match_accuracy({"q", "r"}, {{"a"}, {"b"}}) == 0.0);
    CHECK_THROWS_WITH_AS(exact_match_accuracy({"a"}, {}), doctest::Contains("LengthMismatch"), Error);
  }

  TEST_CASE("word error rate") {
    CHECK(wer("Measure with SAXS.", "measure with saxs") == 0.0);
    CHECK(wer("measure with saxs", "measure with sacks") == Approx(1.0 / 3.0));
    CHECK(wer("one two three four", "") == 1.0);
    CHECK(wer("one", "one two three") == 2.0);
    CHECK_THROWS_WITH_AS(wer("  ", "x"), doctest::Contains("EmptyReference"), Error);
  }
}

TEST_SUITE("eval.codebleu") {
  // Values from an independent Python implementation of the same rules.
  TEST_CASE("n-gram components on the angle scan") {
    CHECK(bleu(fixtures::kScanRef1, fixtures::kScanQwen) == Approx(0.555524).epsilon(1e-5));
    CHECK(bleu(fixtures::kScanRef1, fixtures::kScanMistral) == Approx(0.057523).epsilon(1e-5));
    CHECK(bleu(fixtures::kScanRef2, fixtures::kScanQwen) == Approx(0.053077).epsilon(1e-5));
    CHECK(bleu(fixtures::kScanRef2, fixtures::kScanMistral) == Approx(0.840896).epsilon(1e-5));
    CHECK(weighted_ngram_match(fixtures::kScanRef1, fixtures::kScanQwen) == Approx(0.570351).epsilon(1e-5));
    CHECK(weighted_ngram_match(fixtures::kScanRef1, fixtures::kScanMistral) == Approx(0.061526).epsilon(1e-5));
    CHECK(weighted_ngram_match(fixtures::kScanRef2, fixtures::kScanQwen) == Approx(0.077306).epsilon(1e-5));
    CHECK(weighted_ngram_match(fixtures::kScanRef2, fixtures::kScanMistral) == Approx(0.855526).epsilon(1e-5));
  }

  TEST_CASE("syntax and data flow on the angle scan") {
    CHECK(syntax_match(fixtures::kScanRef1, fixtures::kScanQwen) == 1.0);
    CHECK(syntax_match(fixtures::kScanRef1, fixtures::kScanMistral) == 1.0);
    // 15 reference subtrees, 9 shared.
    CHECK(syntax_match(fixtures::kScanRef2, fixtures::kScanQwen) == Approx(0.6));
    CHECK(syntax_match(fixtures::kScanRef2, fixtures::kScanMistral) == Approx(0.6));
    const auto e1 = dataflow_edges(fixtures::kScanRef1);
    CHECK(e1 == dataflow_edges(fixtures::kScanQwen));
    CHECK(codebleu(fixtures::kScanRef2, fixtures::kScanMistral).dataflow_match == 1.0);
    CHECK(e1.front() == "var_5 computedFrom [var_0,var_1,var_2,var_3,var_4]");
  }

  TEST_CASE("composite scores on the angle scan") {
    const auto a = codebleu(fixtures::kScanRef1, fixtures::kScanQwen);
    CHECK(a.syntax_match == 1.0);
    CHECK(a.dataflow_match == 1.0);
    CHECK(a.composite == Approx(0.782).epsilon(0.05));
    CHECK(a.composite == Approx(0.25 * (0.555524 + 0.570351 + 2.0)).epsilon(1e-5));
    CHECK(codebleu(fixtures::kScanRef2, fixtures::kScanMistral).composite == Approx(0.824).epsilon(0.002));
    CHECK(codebleu(fixtures::kScanRef1, fixtures::kScanMistral).composite == Approx(0.530).epsilon(0.002));
  }

  TEST_CASE("data flow follows definitions") {
    const auto e = dataflow_edges("x = 1\ny = x + 2\nsam.measure(y)");
    // x <- 1, x used, y <- (x, 2), y used
    REQUIRE(e.size() == 6);
    CHECK(e[0] == "var_1 computedFrom [var_0]");
    CHECK(e[1] == "var_0 comesFrom []");
    CHECK(e[2] == "var_3 computedFrom [var_1,var_2]");
    CHECK(e[3] == "var_1 comesFrom [var_1]");
    CHECK(e.back() == "var_3 comesFrom [var_3]");
    const auto r = codebleu("x = 1\nsam.measure(x)", "x = 1\nsam.measure(1)");
    CHECK(r.dataflow_match == Approx(2.0 / 3.0));
    CHECK_FALSE(r.dataflow_degenerate);
  }

  TEST_CASE("degenerate and unparseable inputs are flagged") {
    const auto d = codebleu("sam.measure(1)", "sam.measure(1)");
    CHECK(d.dataflow_degenerate);
    CHECK(d.composite == Approx(1.0));
    const auto p = codebleu("sam.measure(1)", "sam.measure(");
    CHECK(p.parse_failed);
    CHECK(p.syntax_match == 0.0);
    CHECK(p.dataflow_match == 0.0);
  }

  TEST_CASE("weights") {
    CHECK_THROWS_WITH_AS(codebleu("a", "a", {0.5, 0.5, 0.5, -0.5}), doctest::Contains("InvalidWeights"), Error);
    CHECK_THROWS_WITH_AS(codebleu("a", "a", {0.5, 0.5, 0.5, 0.5}), doctest::Contains("InvalidWeights"), Error);
    const auto r = codebleu(fixtures::kScanRef2, fixtures::kScanQwen, {0, 0, 1, 0});
    CHECK(r.composite == Approx(0.6));
  }

  TEST_CASE("self similarity on random programs") {
    std::mt19937 rng(11);
    for (int k = 0; k < 100; ++k) {
      const std::string p = fixtures::random_program(rng);
      const auto r = codebleu(p, p);
      INFO(p);
      REQUIRE_FALSE(r.parse_failed);
      CHECK(r.ngram_match == Approx(1.0));
      CHECK(r.weighted_ngram_match == Approx(1.0));
      CHECK(r.syntax_match == 1.0);
      CHECK(r.dataflow_match == 1.0);
      CHECK(r.composite == Approx(1.0));
    }
  }
}

TEST_SUITE("eval.best_reference") {
  const std::vector<std::string> refs = {fixtures::kScanRef1, fixtures::kScanRef2};

  TEST_CASE("mistral picks reference 2 for codebleu but reference 1 for distance") {
    const auto cb = best_reference(fixtures::kScanMistral, refs, Metric::codebleu);
    CHECK(cb.index == 1);
    CHECK(cb.score == Approx(0.824).epsilon(0.002));
    CHECK(best_reference(fixtures::kScanMistral, refs, Metric::ld).index == 0);
    CHECK(best_reference(fixtures::kScanQwen, refs, Metric::ld).index == 0);
    CHECK(best_reference(fixtures::kScanQwen, refs, Metric::codebleu).index == 0);
  }

  TEST_CASE("single reference, exact hit, ties") {
    CHECK(best_reference("x", {"y"}, Metric::nld).index == 0);
    const auto hit = best_reference("b", {"a", "b", "c"}, Metric::ld);
    CHECK(hit.index == 1);
    CHECK(hit.score == 0);
    CHECK(best_reference("z", {"a", "b"}, Metric::ld).index == 0);
    CHECK(best_reference("z", {"a", "b"}, Metric::exact).index == 0);
  }

  TEST_CASE("matches an exhaustive scan") {
    std::mt19937 rng(3);
    for (int k = 0; k < 200; ++k) {
      const auto cand = random_string(rng, 8);
      std::vector<std::string> rs;
      for (int j = 0; j < 4; ++j) rs.push_back(random_string(rng, 8));
      double best = 1e9;
      for (const auto& r : rs) best = std::min(best, normalized_levenshtein(r, cand));
      CHECK(best_reference(cand, rs, Metric::nld).score == best);
    }
  }
}

TEST_SUITE("eval.classifier") {
  TEST_CASE("three-case confusion") {
    const auto r = classifier_report({"Op", "Op", "Ana"}, {"Op", "Ana", "Ana"});
    CHECK(r.per_class[0].precision == 1.0);
    CHECK(r.per_class[0].recall == 0.5);
    CHECK(r.per_class[0].f1 == Approx(2.0 / 3.0));
    CHECK(r.per_class[1].precision == 0.5);
    CHECK(r.per_class[1].recall == 1.0);
    CHECK(r.per_class[1].f1 == Approx(2.0 / 3.0));
    CHECK(r.macro_f1 == Approx(4.0 / 15.0));
    CHECK(r.weighted_f1 == Approx(2.0 / 3.0));
    CHECK(r.counts[0][0] == 1);
    CHECK(r.counts[0][1] == 1);
    CHECK(r.counts[1][1] == 1);
  }

  TEST_CASE("perfect and missed predictions") {
    const std::vector<std::string> g = {"Op", "Ana", "Notebook", "gpcam", "xicam"};
    const auto p = classifier_report(g, g);
    CHECK(p.macro_f1 == 1.0);
    for (int i = 0; i < 5; ++i) CHECK(p.counts[i][i] == 1);
    const auto m = classifier_report({"Op", "Op"}, {"MISSED", "Op"});
    CHECK(m.missed == 1);
    CHECK(m.counts[0][5] == 1);
    CHECK(m.per_class[0].precision == 1.0);
    CHECK(m.per_class[0].recall == 0.5);
    long row = 0;
    for (long c : m.counts[0]) row += c;
    CHECK(row == 2);
    CHECK_THROWS_WITH_AS(classifier_report({"Op"}, {}), doctest::Contains("LengthMismatch"), Error);
    CHECK_THROWS_AS(classifier_report({"MISSED"}, {"Op"}), Error);
  }
}


namespace {

const std::vector<std::string> kScanRefs = {
    fixtures::kScanRef1, fixtures::kScanRef2,
    "for angle in np.arange(0.05, 1.5+0.02, 0.02):\n    sam.thabs(angle)\n    sam.measure(0.5)"};

std::string dataset_line(const std::string& input, const std::vector<std::string>& refs, const std::string& kind) {
  return json{{"input", input}, {"references", refs}, {"kind", kind}}.dump() + "\n";
}

}  // namespace

TEST_SUITE("eval.runner") {
  TEST_CASE("dataset parsing reports the case index") {
    const std::string ok = dataset_line("Start xicam", {"xicam"}, "classifier") + "\n" +
                           dataset_line("Measure 5 seconds", {"sam.measure(5)"}, "operator_sequential");
    const auto cases = parse_dataset(ok);
    REQUIRE(cases.size() == 2);
    CHECK(cases[1].kind == CaseKind::operator_sequential);
    auto kind_of = [](const std::string& s) -> std::string {
      try {
        parse_dataset(s);
      } catch (const Error& e) {
        return e.detail();
      }
      return "ok";
    };
    CHECK(kind_of(ok + "{\"input\": \"x\", \"references\": [], \"kind\": \"analyst\"}\n").find("case 2") == 0);
    CHECK(kind_of(ok + "not json\n").find("case 2") == 0);
    CHECK(kind_of(dataset_line("x", {"Banana"}, "classifier")).find("case 0") == 0);
    CHECK(kind_of(dataset_line("x", {"y"}, "poetry")).find("case 0") == 0);
  }

  TEST_CASE("sample standard deviation") {
    const auto s = summarize({1, 2, 3, 4});
    CHECK(s.mean == Approx(2.5));
    CHECK(s.std == Approx(std::sqrt(5.0 / 3.0)));
    CHECK(summarize({7}).std == 0);
  }

  TEST_CASE("oracle classifier backend gives perfect scores") {
    std::vector<EvalCase> cases;
    for (const char* l : {"Op", "Ana", "Notebook", "gpcam", "xicam", "Op"}) cases.push_back({l, {l}, CaseKind::classifier});
    const auto r = run_eval(cases, [](const EvalCase& c) { return Prediction{c.references[0], 0.01}; }, {3, 2, {}});
    REQUIRE(r.classifier);
    CHECK(r.classifier->macro_f1 == 1.0);
    CHECK(r.classifier->missed == 0);
    CHECK(r.aggregate.at("macro_f1").mean == 1.0);
    CHECK(r.aggregate.at("macro_f1").std == 0);
    CHECK(r.latency_s.n == 18);
  }

  TEST_CASE("predictor failures count as missed") {
    std::vector<EvalCase> cases = {{"a", {"Op"}, CaseKind::classifier}, {"b", {"Ana"}, CaseKind::classifier}};
    const auto r = run_eval(
        cases,
        [](const EvalCase& c) -> Prediction {
          if (c.input == "b") throw Error("Timeout", "slow");
          return {"Op", 0};
        },
        {1, 1, {}});
    CHECK(r.classifier->missed == 1);
    CHECK(r.scores[0][1].error.find("Timeout") == 0);
  }

  TEST_CASE("angle scan candidates: no exact match, trace equivalent") {
    for (const char* cand : {fixtures::kScanQwen, fixtures::kScanMistral}) {
      const EvalCase c{"Scan incident angle from 0.05 to 1.5 degree", kScanRefs, CaseKind::operator_structured};
      const auto r = run_eval({c}, [&](const EvalCase&) { return Prediction{cand, 0}; }, {5, 1, {}});
      CHECK(r.aggregate.at("exact").mean == 0);
      CHECK(r.aggregate.at("trace_equivalent").mean == 1);
      CHECK(r.aggregate.at("nld").mean > 0);
      CHECK(r.aggregate.at("codebleu").std == 0);
      CHECK(r.aggregate.at("nld").std == 0);
      const auto& s = r.scores[0][0];
      std::size_t cb_best = 0, nld_best = 0;
      for (std::size_t i = 1; i < kScanRefs.size(); ++i) {
        if (codebleu(kScanRefs[i], cand).composite > codebleu(kScanRefs[cb_best], cand).composite) cb_best = i;
        if (normalized_levenshtein(kScanRefs[i], cand) < normalized_levenshtein(kScanRefs[nld_best], cand))
          nld_best = i;
      }
      CHECK(s.chosen_reference.at("codebleu") == cb_best);
      CHECK(s.chosen_reference.at("nld") == nld_best);
    }
  }

  TEST_CASE("operator mismatch is not trace equivalent") {
    const EvalCase c{"Measure 5 seconds", {"sam.measure(5)"}, CaseKind::operator_sequential};
    CHECK_FALSE(*score_case(c, "sam.measure(4)").trace_equivalent);
    CHECK(*score_case(c, "sam.measure(exposure_time=5)").trace_equivalent);
    CHECK_FALSE(*score_case(c, "sam.measure(").trace_equivalent);
    CHECK_FALSE(score_case(c, "sam.measure(5)").codebleu);
  }

  TEST_CASE("transcriber cases report wer against the best reference") {
    const EvalCase c{"audio.wav", {"measure with saxs", "measure with sacks"}, CaseKind::transcriber};
    const auto s = score_case(c, "measure with sacks");
    CHECK(*s.wer == 0);
    CHECK(s.chosen_reference.at("wer") == 1);
  }

  TEST_CASE("report serializations") {
    const EvalCase c{"x", {"sam.measure(5)"}, CaseKind::operator_sequential};
    const auto r = run_eval({c}, [](const EvalCase&) { return Prediction{"sam.measure(5)", 0.5}; }, {2, 1, {}});
    const auto j = report_to_json(r);
    CHECK(j["run_count"] == 2);
    CHECK(j["aggregate"]["exact"]["mean"] == 1.0);
    CHECK(report_to_csv(r).rfind("metric,mean,std,n\n", 0) == 0);
    CHECK(text::split_lines(outcomes_to_jsonl(r)).size() >= 2);
  }
}
