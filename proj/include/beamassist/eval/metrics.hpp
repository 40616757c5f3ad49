#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace beamassist::eval {

// Character-level edit distance over Unicode code points.
std::size_t levenshtein(std::string_view a, std::string_view b);
// LD / max(|a|, |b|); 0 for two empty strings.
double normalized_levenshtein(std::string_view a, std::string_view b);

// Trailing whitespace on each line and at the end is ignored.
bool exact_match(std::string_view prediction, std::string_view reference);
// Throws Error("LengthMismatch").
double exact_match_accuracy(const std::vector<std::string>& predictions,
                            const std::vector<std::vector<std::string>>& references);

// Lowercased, punctuation stripped, whitespace split. May exceed 1.
// Throws Error("EmptyReference").
double wer(std::string_view reference, std::string_view hypothesis);

struct CodeBleuWeights {
  double ngram = 0.25, weighted_ngram = 0.25, syntax = 0.25, dataflow = 0.25;

  // Throws Error("InvalidWeights").
  void validate() const;
};

struct CodeBleu {
  double ngram_match = 0;
  double weighted_ngram_match = 0;
  double syntax_match = 0;
  double dataflow_match = 0;
  double composite = 0;
  // Syntax and data-flow set to 0 because one side did not parse.
  bool parse_failed = false;
  // The reference has no data-flow edges; the component is 1 when the
  // candidate has none either, otherwise 0.
  bool dataflow_degenerate = false;
};

double bleu(std::string_view reference, std::string_view candidate);
double weighted_ngram_match(std::string_view reference, std::string_view candidate);
// Reference subtree sexps found in the candidate. Throws ParseError.
double syntax_match(std::string_view reference, std::string_view candidate);
// Normalized data-flow edges, exposed for tests: "var_2 computedFrom [var_0,var_1]".
std::vector<std::string> dataflow_edges(std::string_view code);

CodeBleu codebleu(std::string_view reference, std::string_view candidate, const CodeBleuWeights& w = {});

enum class Metric { codebleu, exact, ld, nld };

struct BestReference {
  std::size_t index = 0;
  double score = 0;
};

// Max for codebleu/exact, min for ld/nld; ties go to the earliest reference.
BestReference best_reference(std::string_view candidate, const std::vector<std::string>& references, Metric m);

// Classes plus the predicted-only MISSED column.
inline constexpr std::array<const char*, 6> kReportLabels = {"Op", "Ana", "Notebook", "gpcam", "xicam", "MISSED"};

struct ClassScore {
  double precision = 0, recall = 0, f1 = 0;
  long support = 0;
};

struct ClassifierReport {
  // counts[gold][predicted] over kReportLabels.
  std::array<std::array<long, 6>, 6> counts{};
  std::array<ClassScore, 5> per_class{};
  double macro_f1 = 0;
  double weighted_f1 = 0;
  double accuracy = 0;
  long missed = 0;
};

// Labels are class names or "MISSED". Throws Error("LengthMismatch") or
// Error("InvalidLabel").
ClassifierReport classifier_report(const std::vector<std::string>& gold, const std::vector<std::string>& predicted);

}  // namespace beamassist::eval
