#include "meshprof/export.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "meshprof/error.hpp"
#include "meshprof/format.hpp"

namespace meshprof {

Palette parse_palette(const std::string& name) {
  if (name == "gray") return Palette::Gray;
  if (name == "diverging") return Palette::Diverging;
  if (name == "labels") return Palette::Labels;
  throw ValidationError("unknown palette '" + name + "' (expected gray, diverging or labels)");
}

std::string palette_name(Palette palette) {
  switch (palette) {
    case Palette::Gray: return "gray";
    case Palette::Diverging: return "diverging";
    case Palette::Labels: return "labels";
  }
  return "gray";
}

Slice Slice::parse(const std::string& text) {
  Slice slice;
  if (text.empty()) return slice;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    try {
      if (eq == std::string::npos) throw std::invalid_argument(item);
      slice.fixed.emplace_back(std::stoul(item.substr(0, eq)), std::stoll(item.substr(eq + 1)));
    } catch (const std::exception&) {
      throw ValidationError("invalid slice '" + text + "' (expected axis=index[,axis=index])");
    }
  }
  return slice;
}

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, 8> kLabelColors{{
    {31, 119, 180},
    {214, 39, 40},
    {44, 160, 44},
    {255, 127, 14},
    {148, 103, 189},
    {140, 86, 75},
    {227, 119, 194},
    {127, 127, 127},
}};

std::uint8_t ramp(double t) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0));
}

}  // namespace

RenderedImage render_slice(const Subdivision& sub, const Slice& slice, Palette palette,
                           std::size_t component) {
  const auto& domain = sub.domain();
  if (component >= sub.arity()) throw ValidationError("component out of range");
  GridPoint p{IndexVec(domain.dims(), 0)};
  std::vector<bool> is_fixed(domain.dims(), false);
  for (const auto& [axis, index] : slice.fixed) {
    if (axis >= domain.dims()) throw ValidationError("slice axis out of range");
    if (index < 0 || index >= domain.extents()[axis])
      throw ValidationError("slice index out of range on axis " + std::to_string(axis));
    is_fixed[axis] = true;
    p.index[axis] = index;
  }
  std::vector<std::size_t> free_axes;
  for (std::size_t a = 0; a < domain.dims(); ++a)
    if (!is_fixed[a]) free_axes.push_back(a);
  if (free_axes.empty()) throw ValidationError("slice fixes every axis");
  for (std::size_t i = 2; i < free_axes.size(); ++i)
    if (domain.extents()[free_axes[i]] > 1)
      throw ValidationError("axis " + std::to_string(free_axes[i]) +
                            " needs a fixed index, e.g. --slice " + std::to_string(free_axes[i]) + "=0");
  const std::size_t ax = free_axes[0];
  const std::optional<std::size_t> ay =
      free_axes.size() > 1 ? std::optional<std::size_t>(free_axes[1]) : std::nullopt;
  const Index width = domain.extents()[ax];
  const Index height = ay ? domain.extents()[*ay] : 1;

  std::vector<double> values(static_cast<std::size_t>(width * height));
  for (Index row = 0; row < height; ++row) {
    if (ay) p.index[*ay] = height - 1 - row;
    for (Index col = 0; col < width; ++col) {
      p.index[ax] = col;
      values[static_cast<std::size_t>(row * width + col)] = sub.evaluate(p)[component];
    }
  }
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = *lo_it, hi = *hi_it;

  const int channels = palette == Palette::Gray ? 1 : 3;
  std::ostringstream header;
  header << (channels == 1 ? "P5" : "P6") << "\n" << width << " " << height << "\n255\n";
  std::string bytes = header.str();
  bytes.reserve(bytes.size() + values.size() * channels);
  const double max_abs = std::max(std::abs(lo), std::abs(hi));
  for (double v : values) {
    switch (palette) {
      case Palette::Gray:
        bytes.push_back(static_cast<char>(hi > lo ? ramp((v - lo) / (hi - lo)) : 0));
        break;
      case Palette::Diverging: {
        const std::uint8_t a = max_abs > 0.0 ? ramp(std::abs(v) / max_abs) : 0;
        const auto fade = static_cast<char>(255 - a);
        const char full = static_cast<char>(255);
        if (v > 0.0)
          bytes.append({fade, fade, full});
        else if (v < 0.0)
          bytes.append({full, fade, fade});
        else
          bytes.append({full, full, full});
        break;
      }
      case Palette::Labels: {
        const auto label = static_cast<long>(std::lround(v));
        const auto& c = kLabelColors[static_cast<std::size_t>(((label % 8) + 8) % 8)];
        bytes.append({static_cast<char>(c[0]), static_cast<char>(c[1]), static_cast<char>(c[2])});
        break;
      }
    }
  }

  nlohmann::json fixed = nlohmann::json::object();
  for (const auto& [axis, index] : slice.fixed) fixed[std::to_string(axis)] = index;
  nlohmann::json sidecar{{"format", channels == 1 ? "pgm" : "ppm"},
                         {"palette", palette_name(palette)},
                         {"width", width},
                         {"height", height},
                         {"x_axis", ax},
                         {"component", component},
                         {"min", lo},
                         {"max", hi},
                         {"fixed_axes", fixed}};
  if (ay) sidecar["y_axis"] = *ay;
  return {std::move(bytes), std::move(sidecar)};
}

std::string leaves_csv(const Subdivision& sub) {
  std::ostringstream out;
  const auto d = sub.domain().dims();
  for (std::size_t a = 0; a < d; ++a) out << "lo" << a << ",";
  for (std::size_t a = 0; a < d; ++a) out << "hi" << a << ",";
  for (std::size_t j = 0; j < sub.arity(); ++j) out << "v" << j << ",";
  out << "samples\n";
  sub.for_each_leaf([&](const LeafView& leaf) {
    for (auto v : leaf.box.lo) out << v << ",";
    for (auto v : leaf.box.hi) out << v << ",";
    for (double v : leaf.data.value) out << format_double(v) << ",";
    out << leaf.data.samples << "\n";
  });
  return out.str();
}

}  // namespace meshprof
