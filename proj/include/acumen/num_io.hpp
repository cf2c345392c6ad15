#pragma once

#include <charconv>
#include <string>
#include <string_view>

#include "acumen/errors.hpp"

namespace acumen {

// Shortest round-trip formatting via to_chars: locale-independent and
// byte-stable across runs.
inline std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    throw Error("malformed number: '" + std::string(s) + "'");
  return v;
}

}  // namespace acumen
