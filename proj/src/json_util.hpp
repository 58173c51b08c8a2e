#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"
#include "meshprof/error.hpp"

namespace meshprof::detail {

using nlohmann::json;

inline std::string join_path(const std::string& base, const std::string& key) {
  return base + "/" + key;
}

inline std::string join_path(const std::string& base, std::size_t index) {
  return base + "/" + std::to_string(index);
}

inline const json& member(const json& j, const std::string& path, const char* key) {
  if (!j.is_object()) throw ParseError(path.empty() ? "/" : path, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(join_path(path, key), "missing member");
  return *it;
}

inline double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ParseError(path, "expected a number");
  double v = j.get<double>();
  if (!std::isfinite(v)) throw ParseError(path, "expected a finite number");
  return v;
}

inline std::int64_t as_integer(const json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ParseError(path, "expected an integer");
  return j.get<std::int64_t>();
}

inline std::vector<double> as_numbers(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path, "expected an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], join_path(path, i)));
  return out;
}

inline std::vector<std::int64_t> as_integers(const json& j, const std::string& path) {
  if (!j.is_array()) throw ParseError(path, "expected an array");
  std::vector<std::int64_t> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_integer(j[i], join_path(path, i)));
  return out;
}

}  // namespace meshprof::detail
