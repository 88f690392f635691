#pragma once

#include <charconv>
#include <string>
#include <system_error>

namespace shb {

/// Shortest round-trip decimal form of `x`. Locale-independent, so CSV output
/// is byte-stable across runs.
inline std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  if (res.ec != std::errc{}) return "nan";
  return std::string(buf, res.ptr);
}

}  // namespace shb
