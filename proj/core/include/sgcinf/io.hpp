#pragma once

#include <charconv>
#include <string>
#include <system_error>

#include "sgcinf/types.hpp"

namespace sgcinf {

/// Shortest decimal form that round-trips the double exactly. Keeps emitted
/// bundles and reports byte-stable across runs.
inline std::string format_double(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& file, long line) {
  double out = 0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto res = std::from_chars(begin, end, out);
  if (res.ec != std::errc() || res.ptr != end)
    throw ParseError(file, line, "bad decimal value '" + std::string(s) + "'");
  return out;
}

inline long long parse_int(std::string_view s, const std::string& file, long line) {
  long long out = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ParseError(file, line, "bad integer value '" + std::string(s) + "'");
  return out;
}

}  // namespace sgcinf
