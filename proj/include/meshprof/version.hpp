#pragma once

namespace meshprof {
inline constexpr const char* kVersion = "0.1.0";
}
