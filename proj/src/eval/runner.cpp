#include "beamassist/eval/runner.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "beamassist/bcl/ast.hpp"
#include "beamassist/bcl/trace.hpp"
#include "beamassist/error.hpp"
#include "beamassist/text.hpp"

namespace beamassist::eval {

namespace {

constexpr std::array<std::pair<CaseKind, const char*>, 5> kKinds = {{{CaseKind::classifier, "classifier"},
                                                                     {CaseKind::operator_sequential, "operator_sequential"},
                                                                     {CaseKind::operator_structured, "operator_structured"},
                                                                     {CaseKind::analyst, "analyst"},
                                                                     {CaseKind::transcriber, "transcriber"}}};

bool is_operator(CaseKind k) { return k == CaseKind::operator_sequential || k == CaseKind::operator_structured; }

std::optional<bcl::Trace> run_trace(const std::string& code, const ScoreOptions& o) {
  try {
    bcl::ParseOptions po;
    po.extra_functions = o.extra_functions;
    return bcl::execute(bcl::parse_program(code, po), o.initial_state, o.sim_limits).trace;
  } catch (const Error&) {
    return std::nullopt;
  }
}

double mean_of(const std::vector<double>& xs) {
  double s = 0;
  for (double x : xs) s += x;
  return xs.empty() ? 0 : s / static_cast<double>(xs.size());
}

json stat_json(const Stat& s) { return json{{"mean", s.mean}, {"std", s.std}, {"n", s.n}}; }

json score_json(const CaseScore& s) {
  json j{{"prediction", s.prediction}, {"latency_s", s.latency_s}, {"exact", s.exact}, {"ld", s.ld}, {"nld", s.nld}};
  if (!s.error.empty()) j["error"] = s.error;
  if (s.codebleu)
    j["codebleu"] = json{{"ngram_match", s.codebleu->ngram_match},
                         {"weighted_ngram_match", s.codebleu->weighted_ngram_match},
                         {"syntax_match", s.codebleu->syntax_match},
                         {"dataflow_match", s.codebleu->dataflow_match},
                         {"composite", s.codebleu->composite},
                         {"parse_failed", s.codebleu->parse_failed},
                         {"dataflow_degenerate", s.codebleu->dataflow_degenerate}};
  if (s.wer) j["wer"] = *s.wer;
  if (s.trace_equivalent) j["trace_equivalent"] = *s.trace_equivalent;
  j["chosen_reference"] = s.chosen_reference;
  return j;
}

}  // namespace

std::string case_kind_name(CaseKind k) {
  for (const auto& [kind, name] : kKinds)
    if (kind == k) return name;
  return "?";
}

std::optional<CaseKind> case_kind_from_name(const std::string& s) {
  for (const auto& [kind, name] : kKinds)
    if (s == name) return kind;
  return std::nullopt;
}

std::vector<EvalCase> parse_dataset(const std::string& jsonl) {
  std::vector<EvalCase> out;
  for (const auto& line : text::split_lines(jsonl)) {
    if (text::trim(line).empty()) continue;
    const std::string where = "case " + std::to_string(out.size());
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error("DatasetMalformed", where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("input") || !j["input"].is_string())
      throw Error("DatasetMalformed", where + ": missing string field input");
    if (!j.contains("references") || !j["references"].is_array() || j["references"].empty())
      throw Error("DatasetMalformed", where + ": references must be a non-empty list");
    EvalCase c;
    c.input = j["input"].get<std::string>();
    for (const auto& r : j["references"]) {
      if (!r.is_string()) throw Error("DatasetMalformed", where + ": references must be strings");
      c.references.push_back(r.get<std::string>());
    }
    const auto kind = case_kind_from_name(j.value("kind", ""));
    if (!kind) throw Error("DatasetMalformed", where + ": unknown kind '" + j.value("kind", "") + "'");
    c.kind = *kind;
    if (c.kind == CaseKind::classifier)
      for (const auto& r : c.references) {
        bool ok = false;
        for (int k = 0; k < 5; ++k) ok = ok || r == kReportLabels[k];
        if (!ok) throw Error("DatasetMalformed", where + ": '" + r + "' is not a class label");
      }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<EvalCase> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("DatasetMalformed", "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_dataset(ss.str());
}

CaseScore score_case(const EvalCase& c, const std::string& prediction, const ScoreOptions& opts) {
  if (c.references.empty()) throw Error("InvalidArgs", "case has no references");
  CaseScore s;
  s.prediction = prediction;
  const auto ex = best_reference(prediction, c.references, Metric::exact);
  const auto ld = best_reference(prediction, c.references, Metric::ld);
  const auto nld = best_reference(prediction, c.references, Metric::nld);
  s.exact = ex.score > 0.5;
  s.ld = static_cast<std::size_t>(ld.score);
  s.nld = nld.score;
  s.chosen_reference = {{"exact", ex.index}, {"ld", ld.index}, {"nld", nld.index}};

  if (c.kind == CaseKind::operator_structured) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < c.references.size(); ++i) {
      const CodeBleu cb = codebleu(c.references[i], prediction, opts.weights);
      if (!s.codebleu || cb.composite > s.codebleu->composite) {
        s.codebleu = cb;
        best = i;
      }
    }
    s.chosen_reference["codebleu"] = best;
  }
  if (is_operator(c.kind)) {
    s.trace_equivalent = false;
    if (const auto cand = run_trace(prediction, opts))
      for (std::size_t i = 0; i < c.references.size(); ++i)
        if (const auto ref = run_trace(c.references[i], opts); ref && bcl::trace_equivalent(*cand, *ref)) {
          s.trace_equivalent = true;
          s.chosen_reference["trace"] = i;
          break;
        }
  }
  if (c.kind == CaseKind::transcriber) {
    std::size_t best = 0;
    for (std::size_t i = 0; i < c.references.size(); ++i) {
      const double w = wer(c.references[i], prediction);
      if (!s.wer || w < *s.wer) {
        s.wer = w;
        best = i;
      }
    }
    s.chosen_reference["wer"] = best;
  }
  return s;
}

Stat summarize(const std::vector<double>& xs) {
  Stat s;
  s.n = xs.size();
  if (xs.empty()) return s;
  // Shifted by the first sample so constant input gives exactly zero spread.
  double shift = 0;
  for (double x : xs) shift += x - xs.front();
  shift /= static_cast<double>(xs.size());
  s.mean = xs.front() + shift;
  if (xs.size() > 1) {
    double v = 0;
    for (double x : xs) v += (x - xs.front() - shift) * (x - xs.front() - shift);
    s.std = std::sqrt(v / static_cast<double>(xs.size() - 1));
  }
  return s;
}

MetricReport run_eval(const std::vector<EvalCase>& cases, const Predictor& predict, const RunOptions& opts) {
  if (opts.runs < 1) throw Error("InvalidArgs", "runs must be at least 1");
  if (cases.empty()) throw Error("InvalidArgs", "dataset is empty");
  MetricReport r;
  r.run_count = opts.runs;
  r.cases = cases;
  std::vector<double> all_latency;
  std::map<std::string, std::vector<double>> per_run;

  for (int run = 0; run < opts.runs; ++run) {
    std::vector<CaseScore> scores(cases.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i = next++; i < cases.size(); i = next++) {
        Prediction p;
        std::string err;
        try {
          p = predict(cases[i]);
        } catch (const Error& e) {
          err = e.what();
          p.text = cases[i].kind == CaseKind::classifier ? kReportLabels[5] : "";
        }
        scores[i] = score_case(cases[i], p.text, opts.scoring);
        scores[i].latency_s = p.latency_s;
        scores[i].error = err;
      }
    };
    const int threads = std::max(1, std::min<int>(opts.parallelism, static_cast<int>(cases.size())));
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    std::map<std::string, std::vector<double>> vals;
    std::vector<std::string> gold, pred;
    for (std::size_t i = 0; i < cases.size(); ++i) {
      const auto& s = scores[i];
      all_latency.push_back(s.latency_s);
      vals["latency_s"].push_back(s.latency_s);
      vals["exact"].push_back(s.exact ? 1.0 : 0.0);
      vals["ld"].push_back(static_cast<double>(s.ld));
      vals["nld"].push_back(s.nld);
      if (s.codebleu) {
        vals["codebleu"].push_back(s.codebleu->composite);
        vals["codebleu.ngram_match"].push_back(s.codebleu->ngram_match);
        vals["codebleu.weighted_ngram_match"].push_back(s.codebleu->weighted_ngram_match);
        vals["codebleu.syntax_match"].push_back(s.codebleu->syntax_match);
        vals["codebleu.dataflow_match"].push_back(s.codebleu->dataflow_match);
      }
      if (s.wer) vals["wer"].push_back(*s.wer);
      if (s.trace_equivalent) vals["trace_equivalent"].push_back(*s.trace_equivalent ? 1.0 : 0.0);
      if (cases[i].kind == CaseKind::classifier) {
        gold.push_back(cases[i].references.front());
        bool known = false;
        for (const char* l : kReportLabels) known = known || s.prediction == l;
        pred.push_back(known ? s.prediction : kReportLabels[5]);
      }
    }
    if (!gold.empty()) {
      const auto rep = classifier_report(gold, pred);
      if (run == 0) r.classifier = rep;
      vals["macro_f1"].push_back(rep.macro_f1);
      vals["weighted_f1"].push_back(rep.weighted_f1);
      vals["classifier_accuracy"].push_back(rep.accuracy);
      vals["missed"].push_back(static_cast<double>(rep.missed));
    }
    for (const auto& [k, v] : vals) per_run[k].push_back(mean_of(v));
    // Classifier aggregates are already per-run values.
    for (const char* k : {"macro_f1", "weighted_f1", "classifier_accuracy", "missed"})
      if (vals.count(k)) per_run[k].back() = vals[k].front();
    r.scores.push_back(std::move(scores));
  }
  for (const auto& [k, v] : per_run) r.aggregate[k] = summarize(v);
  r.latency_s = summarize(all_latency);
  return r;
}

json report_to_json(const MetricReport& r) {
  json j;
  j["run_count"] = r.run_count;
  j["case_count"] = r.cases.size();
  j["aggregate"] = json::object();
  for (const auto& [k, s] : r.aggregate) j["aggregate"][k] = stat_json(s);
  j["latency_s"] = stat_json(r.latency_s);
  if (r.classifier) {
    json c;
    c["labels"] = kReportLabels;
    c["counts"] = r.classifier->counts;
    c["per_class"] = json::object();
    for (int k = 0; k < 5; ++k) {
      const auto& pc = r.classifier->per_class[k];
      c["per_class"][kReportLabels[k]] =
          json{{"precision", pc.precision}, {"recall", pc.recall}, {"f1", pc.f1}, {"support", pc.support}};
    }
    c["macro_f1"] = r.classifier->macro_f1;
    c["weighted_f1"] = r.classifier->weighted_f1;
    c["accuracy"] = r.classifier->accuracy;
    c["missed"] = r.classifier->missed;
    j["classifier"] = c;
  }
  return j;
}

std::string report_to_csv(const MetricReport& r) {
  std::ostringstream out;
  out << "metric,mean,std,n\n";
  for (const auto& [k, s] : r.aggregate)
    out << k << ',' << text::format_number(s.mean) << ',' << text::format_number(s.std) << ',' << s.n << '\n';
  return out.str();
}

std::string outcomes_to_jsonl(const MetricReport& r) {
  std::ostringstream out;
  for (std::size_t run = 0; run < r.scores.size(); ++run)
    for (std::size_t i = 0; i < r.scores[run].size(); ++i) {
      json j{{"run", run}, {"case", i}, {"kind", case_kind_name(r.cases[i].kind)}, {"input", r.cases[i].input}};
      j.update(score_json(r.scores[run][i]));
      out << j.dump() << '\n';
    }
  return out.str();
}

}  // namespace beamassist::eval
