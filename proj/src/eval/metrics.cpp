#include "beamassist/eval/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <set>
#include <utility>

#include "beamassist/bcl/ast.hpp"
#include "beamassist/bcl/signatures.hpp"
#include "beamassist/error.hpp"
#include "beamassist/text.hpp"

namespace beamassist::eval {

namespace {

template <typename Seq>
std::size_t edit_distance(const Seq& a, const Seq& b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string rstrip_lines(std::string_view s) {
  std::string out;
  for (const auto& line : text::split_lines(s)) {
    std::string l = line;
    while (!l.empty() && std::isspace(static_cast<unsigned char>(l.back()))) l.pop_back();
    out += l;
    out += '\n';
  }
  while (!out.empty() && std::isspace(static_cast<unsigned char>(out.back()))) out.pop_back();
  return out;
}

using Gram = std::vector<std::string>;

std::map<Gram, long> ngrams(const std::vector<std::string>& toks, std::size_t n) {
  std::map<Gram, long> out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++out[Gram(toks.begin() + i, toks.begin() + i + n)];
  return out;
}

// Smoothed precision: a zero numerator becomes 0.1 / denominator.
double smoothed(double num, double den) { return num > 0 ? num / den : 0.1 / den; }

std::size_t effective_order(std::size_t a, std::size_t b) { return std::min<std::size_t>({4, a, b}); }

const std::set<std::string>& keywords() {
  static const std::set<std::string> kw = [] {
    std::set<std::string> s = {"False", "None",   "True",  "and",    "as",       "assert", "async",  "await",
                               "break", "class",  "continue", "def", "del",      "elif",   "else",   "except",
                               "finally", "for",  "from",  "global", "if",       "import", "in",     "is",
                               "lambda", "nonlocal", "not", "or",    "pass",     "raise",  "return", "try",
                               "while", "with",   "yield"};
    for (const auto& f : bcl::call_targets()) s.insert(f);
    return s;
  }();
  return kw;
}

// ---- syntax ----

void collect_subtrees(const bcl::Node& n, std::vector<std::string>& out) {
  if (bcl::is_leaf_kind(n.kind)) return;
  out.push_back(bcl::sexp(n));
  for (const auto& c : n.children) collect_subtrees(c, out);
}

double syntax_score(const bcl::Node& ref, const bcl::Node& cand) {
  std::vector<std::string> r, c;
  collect_subtrees(ref, r);
  collect_subtrees(cand, c);
  if (r.empty()) return c.empty() ? 1.0 : 0.0;
  const std::set<std::string> cs(c.begin(), c.end());
  std::size_t hit = 0;
  for (const auto& s : r) hit += cs.count(s);
  return static_cast<double>(hit) / static_cast<double>(r.size());
}

// ---- data flow ----

using Pos = std::pair<int, int>;

struct FlowEntry {
  std::string name;
  Pos pos;
  std::string rel;  // comesFrom | computedFrom
  std::vector<std::string> parent_names;
  std::set<Pos> parent_pos;
};

using States = std::map<std::string, std::set<Pos>>;

std::string leaf_text(const bcl::Node& n) { return n.text.empty() ? std::string(bcl::node_kind_name(n.kind)) : n.text; }

void leaves(const bcl::Node& n, std::vector<const bcl::Node*>& out) {
  if (bcl::is_leaf_kind(n.kind)) {
    out.push_back(&n);
    return;
  }
  for (const auto& c : n.children) leaves(c, out);
}

void add_name(std::vector<std::string>& names, const std::string& n) {
  if (std::find(names.begin(), names.end(), n) == names.end()) names.push_back(n);
}

void sort_entries(std::vector<FlowEntry>& v) {
  std::stable_sort(v.begin(), v.end(), [](const FlowEntry& a, const FlowEntry& b) { return a.pos < b.pos; });
}

// Loop bodies are walked twice; entries for the same token collapse.
std::vector<FlowEntry> merge_same(std::vector<FlowEntry> in) {
  std::vector<FlowEntry> out;
  for (auto& e : in) {
    auto it = std::find_if(out.begin(), out.end(), [&](const FlowEntry& o) {
      return o.name == e.name && o.pos == e.pos && o.rel == e.rel;
    });
    if (it == out.end()) {
      out.push_back(std::move(e));
    } else {
      for (const auto& n : e.parent_names) add_name(it->parent_names, n);
      it->parent_pos.insert(e.parent_pos.begin(), e.parent_pos.end());
    }
  }
  sort_entries(out);
  return out;
}

std::vector<FlowEntry> flow(const bcl::Node& n, States& st);

std::vector<FlowEntry> flow_children(const bcl::Node& n, States& st) {
  std::vector<FlowEntry> out;
  for (const auto& c : n.children) {
    auto t = flow(c, st);
    out.insert(out.end(), t.begin(), t.end());
  }
  return out;
}

std::vector<FlowEntry> bind(const bcl::Node& lhs, const bcl::Node& rhs, States& st) {
  std::vector<const bcl::Node*> l, r;
  leaves(lhs, l);
  leaves(rhs, r);
  std::vector<FlowEntry> out;
  for (const auto* t : l) {
    FlowEntry e{leaf_text(*t), {t->line, t->col}, "computedFrom", {}, {}};
    for (const auto* s : r) {
      add_name(e.parent_names, leaf_text(*s));
      e.parent_pos.insert({s->line, s->col});
    }
    st[e.name] = {e.pos};
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<FlowEntry> flow(const bcl::Node& n, States& st) {
  using K = bcl::NodeKind;
  if (bcl::is_leaf_kind(n.kind)) {
    const std::string code = leaf_text(n);
    const Pos pos{n.line, n.col};
    if (auto it = st.find(code); it != st.end()) return {FlowEntry{code, pos, "comesFrom", {code}, it->second}};
    if (n.kind == K::Identifier) st[code] = {pos};
    return {FlowEntry{code, pos, "comesFrom", {}, {}}};
  }
  switch (n.kind) {
    case K::Assignment:
    case K::AugmentedAssignment: {
      auto out = flow(n.child(1), st);
      auto b = bind(n.child(0), n.child(1), st);
      out.insert(out.end(), b.begin(), b.end());
      sort_entries(out);
      return out;
    }
    case K::ForStatement: {
      std::vector<FlowEntry> out;
      for (int pass = 0; pass < 2; ++pass) {
        auto t = flow(n.child(1), st);
        out.insert(out.end(), t.begin(), t.end());
        t = bind(n.child(0), n.child(1), st);
        out.insert(out.end(), t.begin(), t.end());
        t = flow(n.child(2), st);
        out.insert(out.end(), t.begin(), t.end());
      }
      return merge_same(std::move(out));
    }
    case K::WhileStatement: {
      std::vector<FlowEntry> out;
      for (int pass = 0; pass < 2; ++pass) {
        auto t = flow_children(n, st);
        out.insert(out.end(), t.begin(), t.end());
      }
      return merge_same(std::move(out));
    }
    case K::IfStatement: {
      std::vector<FlowEntry> out;
      States current = st;
      std::vector<States> branches;
      bool has_else = false;
      for (const auto& c : n.children) {
        if (c.kind == K::ElifClause || c.kind == K::ElseClause) {
          if (c.kind == K::ElseClause) has_else = true;
          States s = st;
          auto t = flow(c, s);
          out.insert(out.end(), t.begin(), t.end());
          branches.push_back(std::move(s));
        } else {
          auto t = flow(c, current);
          out.insert(out.end(), t.begin(), t.end());
        }
      }
      branches.push_back(std::move(current));
      if (!has_else) branches.push_back(st);
      States merged;
      for (const auto& b : branches)
        for (const auto& [k, v] : b) merged[k].insert(v.begin(), v.end());
      st = std::move(merged);
      sort_entries(out);
      return out;
    }
    default: {
      auto out = flow_children(n, st);
      sort_entries(out);
      return out;
    }
  }
}

std::vector<std::string> normalized_flow(const bcl::Node& root) {
  States st;
  auto all = flow(root, st);
  sort_entries(all);
  std::set<Pos> involved;
  for (const auto& e : all) {
    if (!e.parent_pos.empty()) involved.insert(e.pos);
    involved.insert(e.parent_pos.begin(), e.parent_pos.end());
  }
  std::vector<FlowEntry> kept;
  for (auto& e : all) {
    if (!involved.count(e.pos)) continue;
    auto it = std::find_if(kept.begin(), kept.end(), [&](const FlowEntry& k) { return k.pos == e.pos; });
    if (it == kept.end()) {
      kept.push_back(std::move(e));
    } else {
      for (const auto& p : e.parent_names) add_name(it->parent_names, p);
      it->parent_pos.insert(e.parent_pos.begin(), e.parent_pos.end());
    }
  }
  std::map<std::string, std::string> names;
  auto norm = [&](const std::string& n) {
    auto it = names.find(n);
    if (it != names.end()) return it->second;
    std::string v = "var_" + std::to_string(names.size());
    names.emplace(n, v);
    return v;
  };
  std::vector<std::string> out;
  for (const auto& e : kept) {
    std::vector<std::string> ps;
    for (const auto& p : e.parent_names) ps.push_back(norm(p));
    const std::string v = norm(e.name);
    out.push_back(v + " " + e.rel + " [" + text::join(ps, ",") + "]");
  }
  return out;
}

double dataflow_score(const std::vector<std::string>& ref, std::vector<std::string> cand, bool& degenerate) {
  degenerate = ref.empty();
  if (ref.empty()) return cand.empty() ? 1.0 : 0.0;
  std::size_t hit = 0;
  for (const auto& e : ref) {
    auto it = std::find(cand.begin(), cand.end(), e);
    if (it != cand.end()) {
      ++hit;
      cand.erase(it);
    }
  }
  return static_cast<double>(hit) / static_cast<double>(ref.size());
}

std::vector<std::string> wer_tokens(std::string_view s) {
  std::string cleaned;
  for (unsigned char ch : s) {
    if (std::ispunct(ch)) continue;
    cleaned += static_cast<char>(std::tolower(ch));
  }
  return text::split_whitespace(cleaned);
}

}  // namespace

std::size_t levenshtein(std::string_view a, std::string_view b) {
  return edit_distance(text::decode_utf8(a), text::decode_utf8(b));
}

double normalized_levenshtein(std::string_view a, std::string_view b) {
  const auto ua = text::decode_utf8(a), ub = text::decode_utf8(b);
  const std::size_t m = std::max(ua.size(), ub.size());
  if (m == 0) return 0.0;
  return static_cast<double>(edit_distance(ua, ub)) / static_cast<double>(m);
}

bool exact_match(std::string_view prediction, std::string_view reference) {
  return rstrip_lines(prediction) == rstrip_lines(reference);
}

double exact_match_accuracy(const std::vector<std::string>& predictions,
                            const std::vector<std::vector<std::string>>& references) {
  if (predictions.size() != references.size())
    throw Error("LengthMismatch", std::to_string(predictions.size()) + " predictions for " +
                                      std::to_string(references.size()) + " cases");
  if (predictions.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i)
    for (const auto& r : references[i])
      if (exact_match(predictions[i], r)) {
        ++hits;
        break;
      }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

double wer(std::string_view reference, std::string_view hypothesis) {
  const auto r = wer_tokens(reference);
  if (r.empty()) throw Error("EmptyReference", "reference has no words");
  return static_cast<double>(edit_distance(r, wer_tokens(hypothesis))) / static_cast<double>(r.size());
}

void CodeBleuWeights::validate() const {
  const double w[] = {ngram, weighted_ngram, syntax, dataflow};
  double sum = 0;
  for (double x : w) {
    if (!(x >= 0)) throw Error("InvalidWeights", "weights must be non-negative");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw Error("InvalidWeights", "weights must sum to 1");
}

double bleu(std::string_view reference, std::string_view candidate) {
  const auto r = text::split_whitespace(reference), h = text::split_whitespace(candidate);
  if (h.empty() || r.empty()) return r.empty() && h.empty() ? 1.0 : 0.0;
  const std::size_t order = effective_order(r.size(), h.size());
  double log_sum = 0;
  for (std::size_t n = 1; n <= order; ++n) {
    const auto hc = ngrams(h, n), rc = ngrams(r, n);
    long num = 0, den = 0;
    for (const auto& [g, c] : hc) {
      den += c;
      if (auto it = rc.find(g); it != rc.end()) num += std::min(c, it->second);
    }
    log_sum += std::log(smoothed(num, std::max<long>(1, den))) / static_cast<double>(order);
  }
  const double bp = h.size() > r.size() ? 1.0 : std::exp(1.0 - static_cast<double>(r.size()) / h.size());
  return bp * std::exp(log_sum);
}

double weighted_ngram_match(std::string_view reference, std::string_view candidate) {
  const auto r = text::split_whitespace(reference), h = text::split_whitespace(candidate);
  if (h.empty() || r.empty()) return r.empty() && h.empty() ? 1.0 : 0.0;
  const auto& kw = keywords();
  auto weight = [&](const std::string& t) { return kw.count(t) ? 1.0 : 0.2; };
  const std::size_t order = effective_order(r.size(), h.size());
  double log_sum = 0;
  for (std::size_t n = 1; n <= order; ++n) {
    const auto hc = ngrams(h, n), rc = ngrams(r, n);
    double num = 0, den = 0;
    for (const auto& [g, c] : rc) {
      const auto it = hc.find(g);
      const long clipped = it == hc.end() ? 0 : std::min(c, it->second);
      const double w = n == 1 ? weight(g[0]) : 1.0;
      num += w * clipped;
      den += w * c;
    }
    log_sum += std::log(smoothed(num, den > 0 ? den : 1.0)) / static_cast<double>(order);
  }
  return std::exp(log_sum);
}

double syntax_match(std::string_view reference, std::string_view candidate) {
  return syntax_score(bcl::parse_program(reference).root, bcl::parse_program(candidate).root);
}

std::vector<std::string> dataflow_edges(std::string_view code) {
  return normalized_flow(bcl::parse_program(code).root);
}

CodeBleu codebleu(std::string_view reference, std::string_view candidate, const CodeBleuWeights& w) {
  w.validate();
  CodeBleu out;
  out.ngram_match = bleu(reference, candidate);
  out.weighted_ngram_match = weighted_ngram_match(reference, candidate);
  try {
    const auto ref = bcl::parse_program(reference);
    const auto cand = bcl::parse_program(candidate);
    out.syntax_match = syntax_score(ref.root, cand.root);
    out.dataflow_match = dataflow_score(normalized_flow(ref.root), normalized_flow(cand.root), out.dataflow_degenerate);
  } catch (const bcl::ParseError&) {
    out.parse_failed = true;
  }
  out.composite = w.ngram * out.ngram_match + w.weighted_ngram * out.weighted_ngram_match +
                  w.syntax * out.syntax_match + w.dataflow * out.dataflow_match;
  return out;
}

BestReference best_reference(std::string_view candidate, const std::vector<std::string>& references, Metric m) {
  if (references.empty()) throw Error("InvalidArgs", "no references");
  BestReference best;
  for (std::size_t i = 0; i < references.size(); ++i) {
    double s = 0;
    switch (m) {
      case Metric::codebleu: s = codebleu(references[i], candidate).composite; break;
      case Metric::exact: s = exact_match(candidate, references[i]) ? 1.0 : 0.0; break;
      case Metric::ld: s = static_cast<double>(levenshtein(references[i], candidate)); break;
      case Metric::nld: s = normalized_levenshtein(references[i], candidate); break;
    }
    const bool maximize = m == Metric::codebleu || m == Metric::exact;
    if (i == 0 || (maximize ? s > best.score : s < best.score)) best = {i, s};
  }
  return best;
}

ClassifierReport classifier_report(const std::vector<std::string>& gold, const std::vector<std::string>& predicted) {
  if (gold.size() != predicted.size())
    throw Error("LengthMismatch", std::to_string(gold.size()) + " gold labels, " + std::to_string(predicted.size()) +
                                      " predictions");
  auto index = [](const std::string& l, bool allow_missed) {
    for (std::size_t i = 0; i < kReportLabels.size(); ++i)
      if (l == kReportLabels[i] && (allow_missed || i < 5)) return i;
    throw Error("InvalidLabel", "unknown label '" + l + "'");
  };
  ClassifierReport rep;
  long correct = 0;
  for (std::size_t k = 0; k < gold.size(); ++k) {
    const auto g = index(gold[k], false), p = index(predicted[k], true);
    ++rep.counts[g][p];
    if (g == p) ++correct;
    if (p == 5) ++rep.missed;
  }
  long total_support = 0;
  double macro = 0, weighted = 0;
  for (std::size_t c = 0; c < 5; ++c) {
    long tp = rep.counts[c][c], pred = 0, support = 0;
    for (std::size_t j = 0; j < 6; ++j) {
      pred += rep.counts[j][c];
      support += rep.counts[c][j];
    }
    ClassScore& s = rep.per_class[c];
    s.support = support;
    s.precision = pred ? static_cast<double>(tp) / pred : 0.0;
    s.recall = support ? static_cast<double>(tp) / support : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    macro += s.f1 / 5.0;
    weighted += s.f1 * support;
    total_support += support;
  }
  rep.macro_f1 = macro;
  rep.weighted_f1 = total_support ? weighted / total_support : 0.0;
  rep.accuracy = gold.empty() ? 0.0 : static_cast<double>(correct) / gold.size();
  return rep;
}

}  // namespace beamassist::eval
