#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace beamassist::analysis {

enum class Protocol {
  thumbnails,
  circular_average,
  circular_average_q2I_fit,
  sector_average,
  linecut_angle,
  linecut_qr,
  linecut_qz,
  q_image,
  qr_image,
};

std::string protocol_name(Protocol p);
std::optional<Protocol> protocol_from_name(std::string_view name);
const std::vector<Protocol>& all_protocols();

// One analysis step, e.g. "linecut_qr 0.1". The argument is the fixed
// coordinate of a linecut (qz for linecut_qr, qr for linecut_qz, |q| for
// linecut_angle) or the sector centre in degrees for sector_average.
struct ProtocolCommand {
  Protocol protocol;
  std::optional<double> arg;
  std::optional<double> thickness;

  std::string to_string() const;
};

// Parses Analyst output: one or more protocol names, each optionally followed
// by a number, separated by whitespace, commas, semicolons or newlines.
// Throws Error("InvalidProtocol") on unknown names, stray numbers, or
// arguments given to protocols that take none.
std::vector<ProtocolCommand> parse_protocols(std::string_view text);

}  // namespace beamassist::analysis
