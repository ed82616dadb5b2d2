#pragma once

#include <charconv>
#include <string>

namespace dnfer {

// Shortest round-trip decimal form; the one formatter used by every CSV and
// table emitter so the two forms always show identical numbers.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace dnfer
