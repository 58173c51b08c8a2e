#pragma once

#include <string>

namespace meshprof {

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);

/// Parses a full string as a double; throws ValidationError naming `what`.
double parse_double(const std::string& text, const std::string& what);

}  // namespace meshprof
