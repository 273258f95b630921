#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <type_traits>

namespace corrbath::csv {

/// Fixed 12-significant-digit rendering so outputs diff cleanly.
inline std::string num(double v) {
  if (v == 0.0) v = 0.0;  // fold -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline void row(std::ostream &) {}

template <class T, class... Rest>
void row(std::ostream &os, const T &first, const Rest &...rest) {
  if constexpr (std::is_arithmetic_v<T> && !std::is_integral_v<T>)
    os << num(first);
  else
    os << first;
  if constexpr (sizeof...(rest) > 0) {
    os << ',';
    row(os, rest...);
  } else {
    os << '\n';
  }
}

} // namespace corrbath::csv
