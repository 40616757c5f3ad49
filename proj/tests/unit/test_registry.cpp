#include <filesystem>
#include <fstream>
#include <sstream>

#include "beamassist/error.hpp"
#include "beamassist/registry.hpp"
#include "doctest.h"

using namespace beamassist;
using namespace beamassist::registry;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const std::string kRegistryPath = std::string(BEAMASSIST_DATA_DIR) + "/registry/cms/examples.json";
const std::string kGolden = BEAMASSIST_GOLDEN_DIR;

std::string error_kind(const std::string& text) {
  try {
    parse_registry(text);
  } catch (const Error& e) {
    return e.kind();
  }
  return "ok";
}

FunctionEntry wbs_entry() {
  FunctionEntry e;
  e.id = "wbs";
  e.input = "check where the beamstop is";
  e.output = "wbs()";
  e.command_class = CommandClass::Op;
  return e;
}

std::size_t count_occurrences(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_SUITE("registry") {
  TEST_CASE("entries keep file order") {
    Registry r = parse_registry(R"J({"version": 3, "entries": [
      {"id": "b", "input": "Align the sample", "output": "sam.align()", "command_class": "Op"},
      {"id": "a", "input": "Measure sample for 5 seconds.", "output": "sam.measure(5)", "command_class": "Op"}]})J");
    REQUIRE(r.entries.size() == 2);
    CHECK(r.entries[0].id == "b");
    CHECK(r.entries[1].id == "a");
    CHECK(r.entries[0].command_class == CommandClass::Op);
    CHECK(r.version == 3);
    CHECK(parse_registry(R"J({"entries": []})J").version == 0);
  }

  TEST_CASE("load errors") {
    CHECK(error_kind(R"J({"entries": [
      {"id": "align", "input": "x", "output": "sam.align()", "command_class": "Op"},
      {"id": "align", "input": "y", "output": "sam.align()", "command_class": "Op"}]})J") == "DuplicateId");
    CHECK(error_kind("{not json") == "MalformedRegistry");
    CHECK(error_kind(R"J({"entries": [{"id": "x", "input": "x", "output": "y", "command_class": "Robot"}]})J") ==
          "MalformedRegistry");
    CHECK(error_kind(R"J({"entries": [{"id": "x", "input": "x", "command_class": "Op"}]})J") == "MalformedRegistry");
    try {
      parse_registry(R"J({"entries": [{"id": "bad_one", "input": "x", "output": "sam.measure(", "command_class": "Op"}]})J");
      FAIL("expected MalformedRegistry");
    } catch (const Error& e) {
      CHECK(e.kind() == "MalformedRegistry");
      CHECK(std::string(e.what()).find("bad_one") != std::string::npos);
    }
  }

  TEST_CASE("canonical round trip of the shipped registry") {
    const std::string text = slurp(kRegistryPath);
    Registry r = parse_registry(text);
    CHECK(serialize_registry(r) == text);
    CHECK(serialize_registry(parse_registry(serialize_registry(r))) == serialize_registry(r));
  }

  TEST_CASE("save and load through a file") {
    Registry r = load_registry(kRegistryPath);
    const auto dir = std::filesystem::temp_directory_path() / "beamassist_registry_test";
    std::filesystem::remove_all(dir);
    const std::string path = (dir / "cms" / "examples.json").string();
    save_registry(r, path);
    CHECK(slurp(path) == serialize_registry(r));
    CHECK(serialize_registry(load_registry(path)) == serialize_registry(r));
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("append and replace") {
    Registry r = load_registry(kRegistryPath);
    Registry r2 = append_function(r, wbs_entry());
    CHECK(r2.entries.size() == r.entries.size() + 1);
    CHECK(r2.entries.back().id == "wbs");
    CHECK(r2.version == r.version + 1);
    CHECK(r.entries.size() == r2.entries.size() - 1);

    FunctionEntry align = *r.find("align");
    align.input = "Please align";
    Registry r3 = append_function(r2, align);
    CHECK(r3.entries.size() == r2.entries.size());
    CHECK(r3.find("align")->input == "Please align");
    CHECK(r3.version == r2.version + 1);
    std::size_t pos_before = 0, pos_after = 0;
    for (std::size_t k = 0; k < r2.entries.size(); ++k) {
      if (r2.entries[k].id == "align") pos_before = k;
      if (r3.entries[k].id == "align") pos_after = k;
    }
    CHECK(pos_before == pos_after);
  }

  TEST_CASE("invalid entries are refused unless unchecked") {
    Registry r = load_registry(kRegistryPath);
    FunctionEntry e = wbs_entry();
    e.id = "broken";
    e.output = "sam.measure(";
    try {
      append_function(r, e);
      FAIL("expected InvalidEntry");
    } catch (const Error& err) {
      CHECK(err.kind() == "InvalidEntry");
    }
    e.unchecked = true;
    CHECK_NOTHROW(append_function(r, e));

    FunctionEntry unknown = wbs_entry();
    unknown.id = "levitate";
    unknown.output = "sam.levitate(3)";
    CHECK_THROWS_AS(append_function(r, unknown), Error);
    unknown.signature = "sam.levitate(height)";
    CHECK_NOTHROW(append_function(r, unknown));

    FunctionEntry ana;
    ana.id = "ana_bad";
    ana.input = "do a thing";
    ana.output = "fourier_magic";
    ana.command_class = CommandClass::Ana;
    CHECK_THROWS_AS(append_function(r, ana), Error);
    ana.output = "linecut_qz 0.2";
    CHECK_NOTHROW(append_function(r, ana));
  }

  TEST_CASE("version increments by exactly one per mutation") {
    Registry r = load_registry(kRegistryPath);
    for (int k = 0; k < 5; ++k) {
      FunctionEntry e = wbs_entry();
      e.id = "wbs_" + std::to_string(k % 2);
      Registry next = append_function(r, e);
      CHECK(next.version == r.version + 1);
      r = next;
    }
  }
}

TEST_SUITE("registry.prompts") {
  TEST_CASE("classifier prompt reproduces the golden file") {
    Registry r = load_registry(kRegistryPath);
    const std::string prompt = build_classifier_prompt(r, PromptStyle::ONE_WORD);
    CHECK(prompt == slurp(kGolden + "/classifier_one_word.txt"));
    CHECK(count_occurrences(prompt, "\nYour Output: ") == 58);
    CHECK(prompt == build_classifier_prompt(r, PromptStyle::ONE_WORD));
  }

  TEST_CASE("classifier styles label examples differently") {
    Registry r = load_registry(kRegistryPath);
    const std::string id = build_classifier_prompt(r, PromptStyle::ID);
    const std::string list = build_classifier_prompt(r, PromptStyle::LIST);
    CHECK(id.find("Your Output: 4\n") != std::string::npos);
    CHECK(id.find("0 for Op") != std::string::npos);
    CHECK(list.find("Your Output: [0, 1, 0, 0, 0]") != std::string::npos);
    CHECK(list.find("{{") == std::string::npos);
    CHECK(class_label(CommandClass::xicam, PromptStyle::LIST) == "[0, 0, 0, 0, 1]");
  }

  TEST_CASE("every phrase appears once per occurrence in the registry") {
    Registry r = load_registry(kRegistryPath);
    const std::string prompt = build_classifier_prompt(r, PromptStyle::ONE_WORD);
    std::map<std::string, std::size_t> expected;
    for (const auto& e : r.entries)
      if (e.visible_to("classifier"))
        for (const auto& p : e.phrases()) ++expected[p];
    for (const auto& [phrase, n] : expected)
      CHECK_MESSAGE(count_occurrences(prompt, "User Prompt: " + phrase + "\n") == n, phrase);
  }

  TEST_CASE("empty registry gives the base prompt only") {
    Registry r = load_registry(kRegistryPath);
    r.entries.clear();
    const std::string prompt = build_classifier_prompt(r, PromptStyle::ONE_WORD);
    CHECK(prompt.find("Example 1:") == std::string::npos);
    CHECK(prompt.size() > 100);
    CHECK(build_analyst_prompt(r).find("Example 1:") == std::string::npos);
    CHECK(build_operator_prompt(r).find("User added functions:\nnone\n") != std::string::npos);
  }

  TEST_CASE("missing base prompt") {
    Registry r;
    CHECK_THROWS_WITH_AS(build_classifier_prompt(r, PromptStyle::ONE_WORD), doctest::Contains("MissingBasePrompt"),
                         Error);
    CHECK_THROWS_AS(build_operator_prompt(r), Error);
  }

  TEST_CASE("operator, analyst and refiner prompts reproduce the golden files") {
    Registry r = load_registry(kRegistryPath);
    CHECK(build_operator_prompt(r) == slurp(kGolden + "/operator.txt"));
    CHECK(build_analyst_prompt(r) == slurp(kGolden + "/analyst.txt"));
    CHECK(build_analyst_prompt(r).find("Your Output: linecut_qr 0.1\n") != std::string::npos);
    CHECK(build_refiner_prompt(r) == slurp(kGolden + "/refiner.txt"));
  }

  TEST_CASE("appending wbs only adds its own block") {
    Registry r = load_registry(kRegistryPath);
    Registry r2 = append_function(r, wbs_entry());
    const std::string c1 = build_classifier_prompt(r, PromptStyle::ONE_WORD);
    const std::string c2 = build_classifier_prompt(r2, PromptStyle::ONE_WORD);
    CHECK(c2 == c1 + "\nExample 59:\nUser Prompt: check where the beamstop is\nYour Output: Op\n");

    const std::string o1 = build_operator_prompt(r);
    const std::string o2 = build_operator_prompt(r2);
    const std::string anchor = "- Output: `detselect(pilatus800)`";
    const auto at = o1.find(anchor) + anchor.size();
    const std::string block = "\n- Input: \"check where the beamstop is\"\n    - Output: `wbs()`";
    CHECK(o2 == o1.substr(0, at) + block + o1.substr(at));
    CHECK(build_analyst_prompt(r2) == build_analyst_prompt(r));
  }

  TEST_CASE("user function template renders optional fields") {
    Registry r = load_registry(kRegistryPath);
    FunctionEntry e;
    e.id = "levitate";
    e.input = "float the sample";
    e.output = "sam.levitate(3)";
    e.signature = "sam.levitate(height)";
    e.param_docs = {{"height", "float", "millimeters"}};
    e.notes = "Experimental.";
    e.extra_phrases = {"hover the sample"};
    const std::string o = build_operator_prompt(append_function(r, e));
    CHECK(o.find("- Input: \"float the sample\"\n    - Output: `sam.levitate(3)`\n    - Signature: "
                 "`sam.levitate(height)`\n    - Params:\n        - height: float (millimeters)\n    - Notes: "
                 "Experimental.\n    - Example phrases:\n        - \"hover the sample\"") != std::string::npos);
  }

  TEST_CASE("template placeholders") {
    CHECK(render_template("a {{x}} b {{ y }} {{\n c {{z}}", {{"x", "1"}}) == "a 1 b {{ y }} {{\n c {{z}}");
  }
}
