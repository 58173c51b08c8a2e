#include "meshprof/format.hpp"

#include <charconv>
#include <cmath>

#include "meshprof/error.hpp"

namespace meshprof {

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

double parse_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last || !std::isfinite(v))
    throw ValidationError("invalid " + what + " '" + text + "'");
  return v;
}

}  // namespace meshprof
