#pragma once

#include <charconv>
#include <cmath>
#include <ostream>
#include <string>

namespace tgrowth::detail {

// Shortest text that reads back to the same double.
inline std::string shortest(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct Num {
  double v;
};

inline std::ostream& operator<<(std::ostream& out, Num n) { return out << shortest(n.v); }

}  // namespace tgrowth::detail
