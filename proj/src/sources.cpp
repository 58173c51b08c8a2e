#include "meshprof/sources.hpp"

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <unordered_map>

#include "meshprof/error.hpp"
#include "meshprof/fixtures.hpp"
#include "meshprof/format.hpp"
#include "meshprof/io.hpp"

namespace meshprof {
namespace {

std::vector<std::string> split_on(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

ProfileSource scene_source(const std::vector<std::string>& parts, const IndexVec& extents) {
  if (parts.size() < 3) throw ValidationError("scene fixture expects scene:NAME:QUANTITY");
  fixtures::Scene2D scene =
      parts[1] == "default"
          ? fixtures::default_scene()
          : fixtures::scene_from_json(nlohmann::json::parse(read_file(parts[1])));
  const auto quantity = fixtures::parse_scene_quantity(parts[2]);
  fixtures::CullingConfig config;
  bool directional = false;
  for (std::size_t i = 3; i < parts.size(); ++i) {
    if (parts[i] == "dir") {
      directional = true;
    } else if (parts[i].rfind("depth=", 0) == 0) {
      config.max_tree_depth = static_cast<int>(parse_double(parts[i].substr(6), "tree depth"));
    } else {
      throw ValidationError("unknown scene fixture option '" + parts[i] + "'");
    }
  }
  auto renderer = std::make_shared<const fixtures::CullingRenderer>(std::move(scene), config);
  const GridDomain domain = fixtures::scene_domain(renderer->scene(), extents);
  return {fixtures::scene_profile(renderer, domain, quantity, directional), domain,
          "scene " + parts[1] + " " + parts[2]};
}

std::string join_numbers(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + format_double(values[i]);
  return out;
}

}  // namespace

ProfileSource fixture_source(const std::string& spec, const IndexVec& extents) {
  const auto parts = split_on(spec, ':');
  const std::string& kind = parts.at(0);
  auto arg = [&](const char* what) {
    if (parts.size() != 2) throw ValidationError(std::string("fixture ") + kind + " expects " + what);
    return parts[1];
  };
  auto line_length = [&] {
    if (extents.size() != 1) throw ValidationError("fixture " + kind + " needs a 1D domain, e.g. 1024");
    return extents[0];
  };
  const GridDomain unit(extents);

  if (kind == "const") {
    ValueVector v;
    for (const auto& s : split_on(arg("a value"), ',')) v.push_back(parse_double(s, "constant"));
    return {fixtures::constant_profile(v), unit, "constant"};
  }
  if (kind == "sum") return {fixtures::coordinate_sum(unit).profile(), unit, "coordinate sum"};
  if (kind == "step")
    return {fixtures::step_profile(unit, parse_double(arg("a position"), "step position")), unit,
            "step"};
  if (kind == "bowl") return {fixtures::parameter_bowl(unit), unit, "parameter bowl"};
  if (kind == "spike") {
    auto f = fixtures::fig2a_spike(line_length(), parse_double(arg("a width"), "spike width"));
    return {f.profile(), f.domain, "spike"};
  }
  if (kind == "ramp") {
    auto f = fixtures::fig2b_ramp(line_length());
    return {f.profile(), f.domain, "ramp"};
  }
  if (kind == "zeromean") {
    auto f = fixtures::example1_f_eps(line_length(), parse_double(arg("eps"), "eps"));
    return {f.profile(), f.domain, "zero-mean"};
  }
  if (kind == "scene") return scene_source(parts, extents);
  throw ValidationError("unknown fixture '" + spec + "'");
}

ProfileFunction exec_profile(const std::string& command, const GridDomain& domain,
                             std::size_t arity, bool thread_safe) {
  if (command.empty()) throw ValidationError("empty --exec command");
  auto query = [command, domain, arity](const GridPoint& p) {
    std::string index, coord, args;
    for (std::size_t a = 0; a < p.dims(); ++a) {
      index += (a ? "," : "") + std::to_string(p.index[a]);
      coord += (a ? "," : "") + format_double(domain.world(a, p.index[a]));
      args += " " + std::to_string(p.index[a]);
    }
    const std::string line =
        "MESHPROF_INDEX=" + index + " MESHPROF_COORD=" + coord + " " + command + args;
    FILE* pipe = ::popen(line.c_str(), "r");
    if (!pipe) throw ProfileError("cannot start command: " + command);
    std::string output;
    char buf[4096];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) output.append(buf, n);
    const int status = ::pclose(pipe);
    if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0)
      throw ProfileError("command exited with status " +
                         std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : status) +
                         "; output: " + output);
    std::string cleaned = output;
    for (char& c : cleaned)
      if (c == ',' || c == ';') c = ' ';
    std::istringstream in(cleaned);
    ValueVector values;
    std::string token;
    while (in >> token) {
      try {
        values.push_back(parse_double(token, "number"));
      } catch (const ValidationError&) {
        throw ProfileError("unparseable command output: " + output);
      }
    }
    if (values.size() != arity)
      throw ProfileError("expected " + std::to_string(arity) + " numbers, command printed: " +
                         output);
    return values;
  };
  return ProfileFunction{arity, query, true, thread_safe};
}

ProfileFunction persistent_profile(ProfileFunction f, const GridDomain& domain,
                                   const std::string& dir, const std::string& key) {
  std::filesystem::create_directories(dir);
  const auto path = (std::filesystem::path(dir) / (key + ".csv")).string();

  struct Store {
    std::mutex mutex;
    std::unordered_map<std::uint64_t, ValueVector> values;
    std::ofstream out;
  };
  auto store = std::make_shared<Store>();
  if (std::ifstream in(path); in) {
    std::string line;
    while (std::getline(in, line)) {
      const auto fields = split_on(line, ',');
      if (fields.size() != f.arity + 1) continue;  // torn trailing line
      try {
        ValueVector v;
        for (std::size_t j = 1; j < fields.size(); ++j) v.push_back(parse_double(fields[j], "value"));
        store->values[std::stoull(fields[0])] = std::move(v);
      } catch (const std::exception&) {
        continue;
      }
    }
  }
  store->out.open(path, std::ios::app);
  if (!store->out) throw ValidationError("cannot open query cache " + path);

  ProfileFunction wrapped = f;
  wrapped.query = [inner = std::move(f.query), store, domain](const GridPoint& p) {
    const auto key = domain.linear_index(p);
    {
      std::lock_guard lock(store->mutex);
      if (auto it = store->values.find(key); it != store->values.end()) return it->second;
    }
    ValueVector v = inner(p);
    std::lock_guard lock(store->mutex);
    store->values.emplace(key, v);
    store->out << key << "," << join_numbers(v) << "\n" << std::flush;
    return v;
  };
  return wrapped;
}

}  // namespace meshprof
