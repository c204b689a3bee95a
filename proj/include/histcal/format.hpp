#pragma once

#include <charconv>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>

#include "histcal/errors.hpp"

namespace histcal {

/// Shortest decimal string that parses back to exactly `value`.
inline std::string exact(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, end);
}

/// Six significant digits, for human-facing output.
inline std::string brief(double value) {
  std::ostringstream os;
  os << std::setprecision(6) << value;
  return os.str();
}

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

/// Strict number parse: the whole (trimmed) field must be consumed.
inline bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

inline double to_double(std::string_view text, const std::string& what) {
  double v = 0.0;
  if (!parse_double(text, v)) {
    throw parse_error(what + ": not a number: '" + std::string(text) + "'");
  }
  return v;
}

inline long long to_integer(std::string_view text, const std::string& what) {
  text = trim(text);
  long long v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc() || ptr != text.data() + text.size()) {
    throw parse_error(what + ": not an integer: '" + std::string(text) + "'");
  }
  return v;
}

}  // namespace histcal
