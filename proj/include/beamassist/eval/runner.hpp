#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "beamassist/bcl/interpreter.hpp"
#include "beamassist/eval/metrics.hpp"
#include "json.hpp"

namespace beamassist::eval {

using json = nlohmann::ordered_json;

enum class CaseKind { classifier, operator_sequential, operator_structured, analyst, transcriber };

std::string case_kind_name(CaseKind k);
std::optional<CaseKind> case_kind_from_name(const std::string& s);

struct EvalCase {
  std::string input;
  std::vector<std::string> references;
  CaseKind kind = CaseKind::operator_sequential;
};

// {"input": str, "references": [str], "kind": str} per line; blank lines skipped.
// Throws Error("DatasetMalformed") naming the zero-based case index.
std::vector<EvalCase> parse_dataset(const std::string& jsonl);
std::vector<EvalCase> load_dataset(const std::string& path);

struct Prediction {
  std::string text;
  double latency_s = 0;
};

// Must be safe to call from several threads when parallelism > 1.
using Predictor = std::function<Prediction(const EvalCase&)>;

struct CaseScore {
  std::string prediction;
  double latency_s = 0;
  std::string error;  // predictor failure; the prediction is then empty
  bool exact = false;
  std::size_t ld = 0;
  double nld = 0;
  std::optional<CodeBleu> codebleu;
  std::optional<double> wer;
  std::optional<bool> trace_equivalent;
  // Chosen reference index per metric name.
  std::map<std::string, std::size_t> chosen_reference;
};

struct ScoreOptions {
  CodeBleuWeights weights;
  bcl::Limits sim_limits;
  bcl::InstrumentState initial_state;
  std::set<std::string> extra_functions;
};

CaseScore score_case(const EvalCase& c, const std::string& prediction, const ScoreOptions& opts = {});

struct Stat {
  double mean = 0;
  double std = 0;  // sample standard deviation; 0 for a single value
  std::size_t n = 0;
};

Stat summarize(const std::vector<double>& xs);

struct RunOptions {
  int runs = 5;
  int parallelism = 1;
  ScoreOptions scoring;
};

struct MetricReport {
  int run_count = 0;
  std::vector<EvalCase> cases;
  // scores[run][case]
  std::vector<std::vector<CaseScore>> scores;
  // Per-run means summarized across runs, keyed by metric name.
  std::map<std::string, Stat> aggregate;
  // Over every backend call of every run.
  Stat latency_s;
  // Classifier cases of the first run.
  std::optional<ClassifierReport> classifier;
};

// Throws Error("InvalidArgs") for runs < 1 or an empty dataset.
MetricReport run_eval(const std::vector<EvalCase>& cases, const Predictor& predict, const RunOptions& opts = {});

json report_to_json(const MetricReport& r);
// metric,mean,std,n
std::string report_to_csv(const MetricReport& r);
// One line per (run, case).
std::string outcomes_to_jsonl(const MetricReport& r);

}  // namespace beamassist::eval
