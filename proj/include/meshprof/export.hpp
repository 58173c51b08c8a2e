#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "meshprof/mesh.hpp"

namespace meshprof {

enum class Palette {
  /// Linear gray ramp from min (black) to max (white); PGM.
  Gray,
  /// Signed values: blue above zero, red below, white at zero; PPM.
  Diverging,
  /// Fixed colors per integer label; PPM.
  Labels,
};

Palette parse_palette(const std::string& name);
std::string palette_name(Palette palette);

/// Fixed indices for axes not shown in the image ("axis=k" on the CLI).
struct Slice {
  std::vector<std::pair<std::size_t, Index>> fixed;

  static Slice parse(const std::string& text);
};

struct RenderedImage {
  /// Binary P5 or P6 file contents.
  std::string bytes;
  /// min/max annotation and layout of the image.
  nlohmann::json sidecar;
};

/// One pixel per grid cell of a 2D slice. The image x axis is the first free
/// domain axis, y the second (top row = highest index).
RenderedImage render_slice(const Subdivision& sub, const Slice& slice, Palette palette,
                           std::size_t component = 0);

/// One row per leaf: lo..., hi..., value..., samples.
std::string leaves_csv(const Subdivision& sub);

}  // namespace meshprof
