#pragma once

#include <charconv>
#include <cstdlib>
#include <string>
#include <vector>

namespace retina::detail {

/// The double nearest the shortest decimal that round-trips `f`, so JSON
/// output reads "0.1" instead of "0.10000000149011612" while a float parse
/// still recovers `f` exactly.
inline double json_float(float f) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), f);
  *res.ptr = '\0';
  return std::strtod(buf, nullptr);
}

inline std::vector<double> json_floats(const std::vector<float>& v) {
  std::vector<double> out;
  out.reserve(v.size());
  for (float f : v) out.push_back(json_float(f));
  return out;
}

}  // namespace retina::detail
