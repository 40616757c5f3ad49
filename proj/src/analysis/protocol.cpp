#include "beamassist/analysis/protocol.hpp"

#include <charconv>

#include "beamassist/error.hpp"
#include "beamassist/text.hpp"

namespace beamassist::analysis {

namespace {

const std::pair<Protocol, const char*> kNames[] = {
    {Protocol::thumbnails, "thumbnails"},
    {Protocol::circular_average, "circular_average"},
    {Protocol::circular_average_q2I_fit, "circular_average_q2I_fit"},
    {Protocol::sector_average, "sector_average"},
    {Protocol::linecut_angle, "linecut_angle"},
    {Protocol::linecut_qr, "linecut_qr"},
    {Protocol::linecut_qz, "linecut_qz"},
    {Protocol::q_image, "q_image"},
    {Protocol::qr_image, "qr_image"},
};

bool takes_arg(Protocol p) {
  return p == Protocol::linecut_angle || p == Protocol::linecut_qr || p == Protocol::linecut_qz ||
         p == Protocol::sector_average;
}

std::optional<double> parse_number(const std::string& tok) {
  double v = 0;
  const char* end = tok.data() + tok.size();
  auto res = std::from_chars(tok.data(), end, v);
  if (res.ec != std::errc() || res.ptr != end) return std::nullopt;
  return v;
}

}  // namespace

std::string protocol_name(Protocol p) {
  for (const auto& [k, n] : kNames)
    if (k == p) return n;
  return "?";
}

std::optional<Protocol> protocol_from_name(std::string_view name) {
  for (const auto& [k, n] : kNames)
    if (name == n) return k;
  return std::nullopt;
}

const std::vector<Protocol>& all_protocols() {
  static const std::vector<Protocol> all = [] {
    std::vector<Protocol> v;
    for (const auto& [k, n] : kNames) v.push_back(k);
    return v;
  }();
  return all;
}

std::string ProtocolCommand::to_string() const {
  std::string s = protocol_name(protocol);
  if (arg) s += " " + text::format_number(*arg);
  return s;
}

std::vector<ProtocolCommand> parse_protocols(std::string_view input) {
  std::string cleaned(input);
  for (char& c : cleaned)
    if (c == ',' || c == ';' || c == '`' || c == '"') c = ' ';
  std::vector<ProtocolCommand> out;
  for (const auto& tok : text::split_whitespace(cleaned)) {
    if (auto p = protocol_from_name(tok)) {
      out.push_back(ProtocolCommand{*p, std::nullopt, std::nullopt});
      continue;
    }
    // Accept "qz=0.1" style as well as a bare number.
    std::string key, num = tok;
    if (auto eq = num.find('='); eq != std::string::npos) {
      key = num.substr(0, eq);
      num = num.substr(eq + 1);
    }
    auto v = parse_number(num);
    if (!v) throw Error("InvalidProtocol", "unknown protocol '" + tok + "'");
    if (out.empty()) throw Error("InvalidProtocol", "number '" + tok + "' without a protocol");
    auto& last = out.back();
    if (key == "thickness") {
      if (!(*v > 0)) throw Error("InvalidProtocol", "thickness must be positive");
      last.thickness = *v;
      continue;
    }
    if (!takes_arg(last.protocol))
      throw Error("InvalidProtocol", protocol_name(last.protocol) + " takes no argument");
    if (last.arg) throw Error("InvalidProtocol", protocol_name(last.protocol) + " given more than one argument");
    last.arg = *v;
  }
  if (out.empty()) throw Error("InvalidProtocol", "no protocol given");
  return out;
}

}  // namespace beamassist::analysis
