#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace beamassist::text {

std::string_view trim(std::string_view s);
std::string trim_copy(std::string_view s);
std::string to_lower(std::string_view s);
std::vector<std::string> split_lines(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with_ci(std::string_view s, std::string_view prefix);

// Shortest decimal form that round-trips (std::to_chars); integral values
// print without a fractional part ("5", "1.5", "0.02").
std::string format_number(double v);

// UTF-8 -> code points; malformed bytes decode as U+FFFD.
std::u32string decode_utf8(std::string_view s);

// RFC 4180 field quoting.
std::string csv_field(std::string_view s);

}  // namespace beamassist::text
