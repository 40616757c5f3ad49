#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace beamassist::registry {

using json = nlohmann::ordered_json;

enum class CommandClass { Op, Ana, Notebook, gpcam, xicam };

// Fixed order used by the LIST and ID prompt styles.
const std::array<CommandClass, 5>& all_classes();
std::string class_name(CommandClass c);
std::optional<CommandClass> class_from_name(std::string_view name);
int class_index(CommandClass c);

enum class PromptStyle { LIST, ID, ONE_WORD };

std::string style_name(PromptStyle s);
std::optional<PromptStyle> style_from_name(std::string_view name);

// The label a classifier is expected to emit for a class in a given style:
// "Op", "0" or "[1, 0, 0, 0, 0]".
std::string class_label(CommandClass c, PromptStyle style);

struct ParamDoc {
  std::string name;
  std::string type;
  std::string description;
};

struct UsageExample {
  std::string input;
  std::string output;
};

struct FunctionEntry {
  std::string id;
  std::string input;
  std::string output;
  CommandClass command_class = CommandClass::Op;
  std::optional<std::string> signature;
  std::vector<ParamDoc> param_docs;
  std::vector<UsageExample> usage_examples;
  std::optional<std::string> notes;
  std::vector<std::string> extra_phrases;
  // Cogs whose prompts include this entry; empty means all of them.
  std::vector<std::string> cogs;
  // Already documented in the operator base prompt.
  bool builtin = false;
  bool unchecked = false;

  bool visible_to(std::string_view cog) const;
  // input, then usage example phrases, then extra phrases.
  std::vector<std::string> phrases() const;
};

struct Registry {
  long long version = 0;
  std::map<std::string, std::string> base_prompts;
  std::vector<FunctionEntry> entries;

  const FunctionEntry* find(std::string_view id) const;
};

json entry_to_json(const FunctionEntry& e);
FunctionEntry entry_from_json(const json& j);
json registry_to_json(const Registry& r);
Registry registry_from_json(const json& j);

// Throws Error("MalformedRegistry") naming the offending entry, or
// Error("DuplicateId").
Registry load_registry(const std::string& path);
Registry parse_registry(const std::string& text);
// Canonical form: two-space indent, fixed key order, UTF-8, LF, trailing newline.
std::string serialize_registry(const Registry& r);
// Writes via a temporary file and rename.
void save_registry(const Registry& r, const std::string& path);

// Call targets declared by entry signatures ("sam.levitate" from
// "sam.levitate(height)"); they extend the command-language whitelist.
std::set<std::string> registry_functions(const Registry& r);

// Throws Error("InvalidEntry") when the entry violates its invariants.
void validate_entry(const FunctionEntry& e, const Registry& context);

// Returns a new registry with the entry appended, or replacing the entry
// with the same id in place. Version increments by one.
Registry append_function(const Registry& r, FunctionEntry e);

std::string build_classifier_prompt(const Registry& r, PromptStyle style);
std::string build_operator_prompt(const Registry& r);
std::string build_analyst_prompt(const Registry& r);
std::string build_refiner_prompt(const Registry& r);

// Replaces {{name}} placeholders; text that is not a placeholder is left alone.
std::string render_template(const std::string& tmpl, const std::map<std::string, std::string>& vars);

}  // namespace beamassist::registry
