#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "meshprof/random.hpp"

namespace meshprof {

using Index = std::int64_t;
using IndexVec = std::vector<Index>;

/// A grid point addressed by its integer cell indices.
struct GridPoint {
  IndexVec index;

  std::size_t dims() const { return index.size(); }
  bool operator==(const GridPoint&) const = default;
};

/// Axis-aligned box of grid cells, lo inclusive and hi exclusive.
struct GridCuboid {
  IndexVec lo;
  IndexVec hi;

  GridCuboid() = default;
  GridCuboid(IndexVec lo_, IndexVec hi_);

  std::size_t dims() const { return lo.size(); }
  Index extent(std::size_t axis) const { return hi[axis] - lo[axis]; }
  std::uint64_t cell_count() const;
  /// Euclidean length of the extent vector, in cells.
  double grid_diameter() const;
  bool contains(const GridPoint& p) const;
  bool contains(const GridCuboid& other) const;
  /// Number of axes with extent >= 2.
  std::size_t splittable_axes() const;

  /// Linear cell offset of p inside this cuboid, axis 0 most significant.
  std::uint64_t local_offset(const GridPoint& p) const;
  GridPoint point_at(std::uint64_t offset) const;

  std::string to_string() const;
  bool operator==(const GridCuboid&) const = default;
};

/// The sampled input space: a regular grid of cells over a world-space box.
class GridDomain {
public:
  GridDomain() = default;
  GridDomain(IndexVec extents, std::vector<double> origin, std::vector<double> cell_size);
  /// Unit cells starting at the origin.
  explicit GridDomain(IndexVec extents);

  std::size_t dims() const { return extents_.size(); }
  const IndexVec& extents() const { return extents_; }
  const std::vector<double>& origin() const { return origin_; }
  const std::vector<double>& cell_size() const { return cell_size_; }

  std::uint64_t cell_count() const;
  GridCuboid cuboid() const;
  bool contains(const GridPoint& p) const;

  /// Cell-center world coordinate.
  std::vector<double> world(const GridPoint& p) const;
  double world(std::size_t axis, Index i) const {
    return origin_[axis] + (static_cast<double>(i) + 0.5) * cell_size_[axis];
  }
  /// Cell containing the world coordinate, clamped to the grid.
  GridPoint locate(std::span<const double> coords) const;

  std::uint64_t linear_index(const GridPoint& p) const;
  GridPoint point_at(std::uint64_t linear) const;

  double max_cell_size() const;

  bool operator==(const GridDomain&) const = default;

private:
  IndexVec extents_;
  std::vector<double> origin_;
  std::vector<double> cell_size_;
};

void to_json(nlohmann::json& j, const GridDomain& domain);
GridDomain domain_from_json(const nlohmann::json& j, const std::string& path = "");

nlohmann::json cuboid_to_json(const GridCuboid& box);
GridCuboid cuboid_from_json(const nlohmann::json& j, const std::string& path);

/// Children of a cuboid: every axis of extent >= 2 is cut at
/// lo + floor(extent / 2). Children are ordered lexicographically by
/// (low=0, high=1) per cut axis, axis 0 most significant. Throws
/// ValidationError("unsplittable") for a single cell.
std::vector<GridCuboid> split(const GridCuboid& cuboid);

/// Index into split(cuboid) of the child containing p.
std::size_t child_slot(const GridCuboid& cuboid, const GridPoint& p);

/// min(k, cell_count) distinct cells drawn uniformly without replacement.
/// With k >= cell_count every cell is returned once, in offset order.
std::vector<GridPoint> sample_points(const GridCuboid& cuboid, std::uint64_t k, Rng& rng);

/// "(i,j,...)"
std::string format_point(const GridPoint& p);

/// Parses "64x64" or "256x256x1".
IndexVec parse_extents(const std::string& text);

}  // namespace meshprof
