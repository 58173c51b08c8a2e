#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace meshprof {

/// Writes via a temporary file in the same directory, then renames.
void write_file_atomic(const std::string& path, std::string_view content);
std::string read_file(const std::string& path);

/// 64-bit FNV-1a, hex encoded. Used for input fingerprints in run manifests.
std::string fnv1a_hex(std::string_view data);

}  // namespace meshprof
