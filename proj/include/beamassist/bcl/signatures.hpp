#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace beamassist::bcl {

enum class DefaultKind { Required, None, Number };

struct Param {
  std::string name;
  DefaultKind default_kind = DefaultKind::Required;
  double default_number = 0.0;
};

struct Signature {
  std::string target;  // "sam.measure", "time.sleep", "wsam"
  std::vector<Param> params;
  bool variadic = false;  // print/min/max
};

// Whitelisted receivers for attribute calls.
const std::set<std::string>& whitelisted_receivers();

// Signature of a whitelisted call target, or nullopt. Parameter names follow
// the documented instrument API, so `sam.measure(0.5)` and
// `sam.measure(exposure_time=0.5)` bind identically.
const Signature* find_signature(std::string_view target);

// Attribute reads allowed without a call (sam.name, np.pi).
bool is_known_attribute(std::string_view dotted);

// Names of all bare (non-attribute) whitelisted functions.
std::vector<std::string> bare_functions();
// Every whitelisted call target, bare and dotted.
std::vector<std::string> call_targets();

}  // namespace beamassist::bcl
