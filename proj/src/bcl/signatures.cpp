#include "beamassist/bcl/signatures.hpp"

#include <map>

namespace beamassist::bcl {
namespace {

Param req(std::string name) { return {std::move(name), DefaultKind::Required, 0.0}; }
Param opt_none(std::string name) { return {std::move(name), DefaultKind::None, 0.0}; }
Param opt_num(std::string name, double v) { return {std::move(name), DefaultKind::Number, v}; }

const std::map<std::string, Signature, std::less<>>& table() {
  static const std::map<std::string, Signature, std::less<>> t = [] {
    std::map<std::string, Signature, std::less<>> m;
    auto add = [&m](Signature s) { m.emplace(s.target, std::move(s)); };
    // Sample API, parameter names as documented for the instrument.
    add({"sam.measure", {req("exposure_time")}});
    add({"sam.snap", {req("exposure_time")}});
    add({"sam.measureTimeSeries", {req("exposure_time"), req("num_frames"), req("wait_time")}});
    add({"sam.series_measure",
         {req("num_frames"), req("exposure_time"), req("exposure_period"), opt_none("wait_time")}});
    add({"sam.measureSpots",
         {req("num_spots"), req("translation_amount"), req("axis"), req("exposure_time")}});
    add({"sam.setLinkamRate", {req("rate")}});
    add({"sam.setLinkamTemperature", {req("temperature")}});
    add({"sam.linkamTemperature", {}});
    add({"sam.align", {}});
    add({"sam.measureIncidentAngle", {req("angle"), opt_none("exposure_time")}});
    add({"sam.measureIncidentAngles", {opt_none("angles"), opt_none("exposure_time")}});
    add({"sam.setOrigin", {req("axes"), opt_none("positions")}});
    add({"sam.xabs", {req("position")}});
    add({"sam.yabs", {req("position")}});
    add({"sam.thabs", {req("angle")}});
    add({"sam.phiabs", {req("angle")}});
    add({"sam.xr", {req("offset")}});
    add({"sam.yr", {req("offset")}});
    add({"sam.thr", {req("offset")}});
    add({"time.time", {}});
    add({"time.sleep", {req("seconds")}});
    add({"np.arange", {req("start"), opt_none("stop"), opt_none("step")}});
    add({"np.linspace", {req("start"), req("stop"), opt_num("num", 50)}});
    add({"RE.abort", {}});
    add({"beam.off", {}});
    add({"Sample", {req("name")}});
    add({"wsam", {}});
    add({"wbs", {}});
    add({"detselect", {req("detector")}});
    add({"range", {req("start"), opt_none("stop"), opt_none("step")}});
    add({"abs", {req("x")}});
    add({"round", {req("number"), opt_none("ndigits")}});
    add({"int", {req("x")}});
    add({"float", {req("x")}});
    add({"len", {req("obj")}});
    Signature print{"print", {}, true};
    add(print);
    Signature mn{"min", {}, true};
    add(mn);
    Signature mx{"max", {}, true};
    add(mx);
    return m;
  }();
  return t;
}

}  // namespace

const std::set<std::string>& whitelisted_receivers() {
  static const std::set<std::string> r{"sam", "time", "np", "RE", "beam"};
  return r;
}

const Signature* find_signature(std::string_view target) {
  const auto& t = table();
  auto it = t.find(target);
  return it == t.end() ? nullptr : &it->second;
}

bool is_known_attribute(std::string_view dotted) { return dotted == "sam.name" || dotted == "np.pi"; }

std::vector<std::string> bare_functions() {
  std::vector<std::string> out;
  for (const auto& [name, sig] : table()) {
    if (name.find('.') == std::string::npos) out.push_back(name);
  }
  return out;
}

std::vector<std::string> call_targets() {
  std::vector<std::string> out;
  for (const auto& [name, sig] : table()) out.push_back(name);
  return out;
}

}  // namespace beamassist::bcl
