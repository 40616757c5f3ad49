#include "beamassist/registry.hpp"

#include <cctype>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "beamassist/analysis/protocol.hpp"
#include "beamassist/bcl/ast.hpp"
#include "beamassist/error.hpp"
#include "beamassist/text.hpp"

namespace beamassist::registry {

const std::array<CommandClass, 5>& all_classes() {
  static const std::array<CommandClass, 5> c{CommandClass::Op, CommandClass::Ana, CommandClass::Notebook,
                                             CommandClass::gpcam, CommandClass::xicam};
  return c;
}

std::string class_name(CommandClass c) {
  switch (c) {
    case CommandClass::Op: return "Op";
    case CommandClass::Ana: return "Ana";
    case CommandClass::Notebook: return "Notebook";
    case CommandClass::gpcam: return "gpcam";
    case CommandClass::xicam: return "xicam";
  }
  return "?";
}

std::optional<CommandClass> class_from_name(std::string_view name) {
  for (auto c : all_classes())
    if (class_name(c) == name) return c;
  return std::nullopt;
}

int class_index(CommandClass c) { return static_cast<int>(c); }

std::string style_name(PromptStyle s) {
  switch (s) {
    case PromptStyle::LIST: return "LIST";
    case PromptStyle::ID: return "ID";
    case PromptStyle::ONE_WORD: return "ONE_WORD";
  }
  return "?";
}

std::optional<PromptStyle> style_from_name(std::string_view name) {
  for (auto s : {PromptStyle::LIST, PromptStyle::ID, PromptStyle::ONE_WORD})
    if (style_name(s) == name) return s;
  return std::nullopt;
}

std::string class_label(CommandClass c, PromptStyle style) {
  switch (style) {
    case PromptStyle::ONE_WORD: return class_name(c);
    case PromptStyle::ID: return std::to_string(class_index(c));
    case PromptStyle::LIST: {
      std::string s = "[";
      for (int k = 0; k < 5; ++k) {
        if (k) s += ", ";
        s += k == class_index(c) ? "1" : "0";
      }
      return s + "]";
    }
  }
  return {};
}

bool FunctionEntry::visible_to(std::string_view cog) const {
  if (cogs.empty()) return true;
  for (const auto& c : cogs)
    if (c == cog) return true;
  return false;
}

std::vector<std::string> FunctionEntry::phrases() const {
  std::vector<std::string> out{input};
  for (const auto& u : usage_examples) out.push_back(u.input);
  for (const auto& p : extra_phrases) out.push_back(p);
  return out;
}

const FunctionEntry* Registry::find(std::string_view id) const {
  for (const auto& e : entries)
    if (e.id == id) return &e;
  return nullptr;
}

// ---- JSON ----

json entry_to_json(const FunctionEntry& e) {
  json j;
  j["id"] = e.id;
  j["input"] = e.input;
  j["output"] = e.output;
  j["command_class"] = class_name(e.command_class);
  if (e.signature) j["signature"] = *e.signature;
  if (!e.param_docs.empty()) {
    json arr = json::array();
    for (const auto& p : e.param_docs) arr.push_back({{"name", p.name}, {"type", p.type}, {"description", p.description}});
    j["param_docs"] = arr;
  }
  if (!e.usage_examples.empty()) {
    json arr = json::array();
    for (const auto& u : e.usage_examples) arr.push_back({{"input", u.input}, {"output", u.output}});
    j["usage_examples"] = arr;
  }
  if (e.notes) j["notes"] = *e.notes;
  if (!e.extra_phrases.empty()) j["extra_phrases"] = e.extra_phrases;
  if (!e.cogs.empty()) j["cogs"] = e.cogs;
  if (e.builtin) j["builtin"] = true;
  if (e.unchecked) j["unchecked"] = true;
  return j;
}

namespace {

[[noreturn]] void malformed(const std::string& where, const std::string& what) {
  throw Error("MalformedRegistry", where + ": " + what);
}

std::string req_string(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) malformed(where, std::string("missing '") + key + "'");
  if (!j[key].is_string()) malformed(where, std::string("'") + key + "' must be a string");
  return j[key].get<std::string>();
}

std::vector<std::string> string_list(const json& j, const char* key, const std::string& where) {
  std::vector<std::string> out;
  if (!j.contains(key)) return out;
  if (!j[key].is_array()) malformed(where, std::string("'") + key + "' must be a list");
  for (const auto& v : j[key]) {
    if (!v.is_string()) malformed(where, std::string("'") + key + "' must contain strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

const std::set<std::string>& known_entry_keys() {
  static const std::set<std::string> k{"id",    "input",          "output", "command_class",  "signature", "param_docs",
                                       "usage_examples", "notes", "extra_phrases", "cogs", "builtin",  "unchecked"};
  return k;
}

}  // namespace

FunctionEntry entry_from_json(const json& j) {
  if (!j.is_object()) malformed("entry", "not an object");
  FunctionEntry e;
  const std::string where = "entry '" + (j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>() : "?") + "'";
  e.id = req_string(j, "id", where);
  if (e.id.empty()) malformed(where, "empty id");
  e.input = req_string(j, "input", where);
  e.output = req_string(j, "output", where);
  const std::string cls = req_string(j, "command_class", where);
  auto c = class_from_name(cls);
  if (!c) malformed(where, "unknown command_class '" + cls + "'");
  e.command_class = *c;
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known_entry_keys().count(it.key())) malformed(where, "unknown field '" + it.key() + "'");
  if (j.contains("signature")) e.signature = req_string(j, "signature", where);
  if (j.contains("notes")) e.notes = req_string(j, "notes", where);
  if (j.contains("param_docs")) {
    if (!j["param_docs"].is_array()) malformed(where, "'param_docs' must be a list");
    for (const auto& p : j["param_docs"]) {
      if (!p.is_object()) malformed(where, "param_docs items must be objects");
      e.param_docs.push_back({req_string(p, "name", where), p.value("type", std::string{}),
                              p.value("description", std::string{})});
    }
  }
  if (j.contains("usage_examples")) {
    if (!j["usage_examples"].is_array()) malformed(where, "'usage_examples' must be a list");
    for (const auto& u : j["usage_examples"]) {
      if (!u.is_object()) malformed(where, "usage_examples items must be objects");
      e.usage_examples.push_back({req_string(u, "input", where), req_string(u, "output", where)});
    }
  }
  e.extra_phrases = string_list(j, "extra_phrases", where);
  e.cogs = string_list(j, "cogs", where);
  for (const char* flag : {"builtin", "unchecked"}) {
    if (j.contains(flag) && !j[flag].is_boolean()) malformed(where, std::string("'") + flag + "' must be a boolean");
  }
  e.builtin = j.value("builtin", false);
  e.unchecked = j.value("unchecked", false);
  return e;
}

json registry_to_json(const Registry& r) {
  json j;
  j["version"] = r.version;
  json bp = json::object();
  for (const auto& [k, v] : r.base_prompts) bp[k] = v;
  j["base_prompts"] = bp;
  json entries = json::array();
  for (const auto& e : r.entries) entries.push_back(entry_to_json(e));
  j["entries"] = entries;
  return j;
}

Registry registry_from_json(const json& j) {
  if (!j.is_object()) malformed("registry", "top level must be an object");
  Registry r;
  if (j.contains("version")) {
    if (!j["version"].is_number_integer()) malformed("registry", "'version' must be an integer");
    r.version = j["version"].get<long long>();
  }
  if (j.contains("base_prompts")) {
    if (!j["base_prompts"].is_object()) malformed("registry", "'base_prompts' must be an object");
    for (auto it = j["base_prompts"].begin(); it != j["base_prompts"].end(); ++it) {
      if (!it.value().is_string()) malformed("base_prompts", "'" + it.key() + "' must be a string");
      r.base_prompts[it.key()] = it.value().get<std::string>();
    }
  }
  if (!j.contains("entries") || !j["entries"].is_array()) malformed("registry", "'entries' must be a list");
  std::set<std::string> ids;
  for (const auto& ej : j["entries"]) {
    FunctionEntry e = entry_from_json(ej);
    if (!ids.insert(e.id).second) throw Error("DuplicateId", "duplicate entry id '" + e.id + "'");
    r.entries.push_back(std::move(e));
  }
  for (const auto& e : r.entries) {
    try {
      validate_entry(e, r);
    } catch (const Error& err) {
      malformed("entry '" + e.id + "'", err.detail());
    }
  }
  return r;
}

Registry parse_registry(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& ex) {
    throw Error("MalformedRegistry", std::string("invalid JSON: ") + ex.what());
  }
  return registry_from_json(j);
}

Registry load_registry(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("MalformedRegistry", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_registry(ss.str());
}

std::string serialize_registry(const Registry& r) { return registry_to_json(r).dump(2) + "\n"; }

void save_registry(const Registry& r, const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("IoError", "cannot write " + tmp.string());
    out << serialize_registry(r);
    if (!out) throw Error("IoError", "write failed for " + tmp.string());
  }
  fs::rename(tmp, target);
}

// ---- validation ----

namespace {

std::optional<std::string> signature_target(const std::string& sig) {
  const std::string s = text::trim_copy(sig);
  const auto paren = s.find('(');
  const std::string head = text::trim_copy(paren == std::string::npos ? s : s.substr(0, paren));
  if (head.empty()) return std::nullopt;
  for (char c : head)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return std::nullopt;
  return head;
}

void check_code(const std::string& code, const std::set<std::string>& extra, const std::string& what) {
  bcl::ParseOptions opts;
  opts.extra_functions = extra;
  bcl::Program p;
  try {
    p = bcl::parse_program(code, opts);
  } catch (const bcl::ParseError& e) {
    throw Error("InvalidEntry", what + " does not parse: " + e.what());
  }
  if (p.root.children.empty()) throw Error("InvalidEntry", what + " is empty");
  const bcl::Node& last = p.root.children.back();
  const bool ends_in_call =
      last.kind == bcl::NodeKind::ExpressionStatement && last.child(0).kind == bcl::NodeKind::Call;
  const bool is_compound = last.kind == bcl::NodeKind::ForStatement || last.kind == bcl::NodeKind::WhileStatement ||
                           last.kind == bcl::NodeKind::IfStatement;
  if (!ends_in_call && !is_compound && last.kind != bcl::NodeKind::Assignment)
    throw Error("InvalidEntry", what + " must end in a call or assignment");
}

}  // namespace

std::set<std::string> registry_functions(const Registry& r) {
  std::set<std::string> out;
  for (const auto& e : r.entries)
    if (e.signature)
      if (auto t = signature_target(*e.signature)) out.insert(*t);
  return out;
}

void validate_entry(const FunctionEntry& e, const Registry& context) {
  if (e.id.empty()) throw Error("InvalidEntry", "id must not be empty");
  if (text::trim(e.input).empty()) throw Error("InvalidEntry", "input phrase must not be empty");
  if (text::trim(e.output).empty()) throw Error("InvalidEntry", "output must not be empty");
  if (e.unchecked) return;
  if (e.command_class == CommandClass::Op) {
    std::set<std::string> extra = registry_functions(context);
    if (e.signature)
      if (auto t = signature_target(*e.signature)) extra.insert(*t);
    check_code(e.output, extra, "output");
    for (const auto& u : e.usage_examples) check_code(u.output, extra, "usage example output");
  } else if (e.command_class == CommandClass::Ana) {
    try {
      analysis::parse_protocols(e.output);
      for (const auto& u : e.usage_examples) analysis::parse_protocols(u.output);
    } catch (const Error& err) {
      throw Error("InvalidEntry", "output is not a protocol command: " + err.detail());
    }
  }
}

Registry append_function(const Registry& r, FunctionEntry e) {
  validate_entry(e, r);
  Registry out = r;
  bool replaced = false;
  for (auto& existing : out.entries) {
    if (existing.id == e.id) {
      existing = e;
      replaced = true;
      break;
    }
  }
  if (!replaced) out.entries.push_back(std::move(e));
  ++out.version;
  return out;
}

// ---- prompts ----

std::string render_template(const std::string& tmpl, const std::map<std::string, std::string>& vars) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl.compare(i, 2, "{{") == 0) {
      std::size_t j = i + 2;
      while (j < tmpl.size() && (std::isalnum(static_cast<unsigned char>(tmpl[j])) || tmpl[j] == '_' || tmpl[j] == '.'))
        ++j;
      if (j > i + 2 && tmpl.compare(j, 2, "}}") == 0) {
        auto it = vars.find(tmpl.substr(i + 2, j - i - 2));
        if (it != vars.end()) {
          out += it->second;
          i = j + 2;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

namespace {

const std::string& base(const Registry& r, const std::string& key) {
  auto it = r.base_prompts.find(key);
  if (it == r.base_prompts.end()) throw Error("MissingBasePrompt", "no base prompt '" + key + "'");
  return it->second;
}

std::string render_examples(const std::vector<std::pair<std::string, std::string>>& examples) {
  if (examples.empty()) return {};
  std::string out;
  for (std::size_t k = 0; k < examples.size(); ++k) {
    if (k) out += "\n\n";
    out += "Example " + std::to_string(k + 1) + ":\nUser Prompt: " + examples[k].first +
           "\nYour Output: " + examples[k].second;
  }
  return out + "\n";
}

std::string indent_code(const std::string& code, const std::string& pad) {
  std::string out;
  for (const auto& line : text::split_lines(code)) out += pad + line + "\n";
  return out;
}

std::string render_user_function(const FunctionEntry& e) {
  std::string s = "- Input: \"" + e.input + "\"\n";
  if (e.output.find('\n') == std::string::npos) {
    s += "    - Output: `" + e.output + "`";
  } else {
    s += "    - Output:\n        ```python\n" + indent_code(e.output, "        ") + "        ```";
  }
  if (e.signature) s += "\n    - Signature: `" + *e.signature + "`";
  if (!e.param_docs.empty()) {
    s += "\n    - Params:";
    for (const auto& p : e.param_docs) {
      s += "\n        - " + p.name;
      if (!p.type.empty()) s += ": " + p.type;
      if (!p.description.empty()) s += " (" + p.description + ")";
    }
  }
  if (e.notes) s += "\n    - Notes: " + *e.notes;
  if (!e.usage_examples.empty()) {
    s += "\n    - Usage:";
    for (const auto& u : e.usage_examples) s += "\n        - \"" + u.input + "\" -> `" + u.output + "`";
  }
  if (!e.extra_phrases.empty()) {
    s += "\n    - Example phrases:";
    for (const auto& p : e.extra_phrases) s += "\n        - \"" + p + "\"";
  }
  return s;
}

}  // namespace

std::string build_classifier_prompt(const Registry& r, PromptStyle style) {
  const std::string& tmpl = base(r, "classifier");
  const std::string& instructions = base(r, "classifier." + style_name(style));
  std::vector<std::pair<std::string, std::string>> examples;
  for (const auto& e : r.entries) {
    if (!e.visible_to("classifier")) continue;
    const std::string label = class_label(e.command_class, style);
    for (const auto& p : e.phrases()) examples.emplace_back(p, label);
  }
  return render_template(tmpl, {{"output_instructions", instructions}}) + render_examples(examples);
}

std::string build_operator_prompt(const Registry& r) {
  const std::string& tmpl = base(r, "operator");
  std::vector<std::string> blocks;
  for (const auto& e : r.entries) {
    if (e.command_class != CommandClass::Op || e.builtin || !e.visible_to("operator")) continue;
    blocks.push_back(render_user_function(e));
  }
  return render_template(tmpl, {{"user_functions", blocks.empty() ? "none" : text::join(blocks, "\n")}});
}

std::string build_analyst_prompt(const Registry& r) {
  const std::string& tmpl = base(r, "analyst");
  std::vector<std::pair<std::string, std::string>> examples;
  for (const auto& e : r.entries) {
    if (e.command_class != CommandClass::Ana || !e.visible_to("analyst")) continue;
    examples.emplace_back(e.input, e.output);
    for (const auto& u : e.usage_examples) examples.emplace_back(u.input, u.output);
    for (const auto& p : e.extra_phrases) examples.emplace_back(p, e.output);
  }
  return render_template(tmpl, {}) + render_examples(examples);
}

std::string build_refiner_prompt(const Registry& r) { return base(r, "refiner"); }

}  // namespace beamassist::registry
