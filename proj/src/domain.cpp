#include "meshprof/domain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "json_util.hpp"
#include "meshprof/error.hpp"

namespace meshprof {

GridCuboid::GridCuboid(IndexVec lo_, IndexVec hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo.size() != hi.size() || lo.empty())
    throw ValidationError("cuboid: lo and hi must have the same nonzero dimension");
  for (std::size_t a = 0; a < lo.size(); ++a)
    if (lo[a] >= hi[a]) throw ValidationError("cuboid: empty along axis " + std::to_string(a));
}

std::uint64_t GridCuboid::cell_count() const {
  std::uint64_t n = 1;
  for (std::size_t a = 0; a < dims(); ++a) n *= static_cast<std::uint64_t>(extent(a));
  return n;
}

double GridCuboid::grid_diameter() const {
  double sum = 0.0;
  for (std::size_t a = 0; a < dims(); ++a) {
    const double e = static_cast<double>(extent(a));
    sum += e * e;
  }
  return std::sqrt(sum);
}

bool GridCuboid::contains(const GridPoint& p) const {
  if (p.dims() != dims()) return false;
  for (std::size_t a = 0; a < dims(); ++a)
    if (p.index[a] < lo[a] || p.index[a] >= hi[a]) return false;
  return true;
}

bool GridCuboid::contains(const GridCuboid& other) const {
  if (other.dims() != dims()) return false;
  for (std::size_t a = 0; a < dims(); ++a)
    if (other.lo[a] < lo[a] || other.hi[a] > hi[a]) return false;
  return true;
}

std::size_t GridCuboid::splittable_axes() const {
  std::size_t n = 0;
  for (std::size_t a = 0; a < dims(); ++a) n += extent(a) >= 2 ? 1 : 0;
  return n;
}

std::uint64_t GridCuboid::local_offset(const GridPoint& p) const {
  std::uint64_t offset = 0;
  for (std::size_t a = 0; a < dims(); ++a)
    offset = offset * static_cast<std::uint64_t>(extent(a)) +
             static_cast<std::uint64_t>(p.index[a] - lo[a]);
  return offset;
}

GridPoint GridCuboid::point_at(std::uint64_t offset) const {
  GridPoint p{IndexVec(dims())};
  for (std::size_t a = dims(); a-- > 0;) {
    const auto e = static_cast<std::uint64_t>(extent(a));
    p.index[a] = lo[a] + static_cast<Index>(offset % e);
    offset /= e;
  }
  return p;
}

std::string GridCuboid::to_string() const {
  std::ostringstream out;
  for (std::size_t a = 0; a < dims(); ++a) {
    if (a) out << "x";
    out << "[" << lo[a] << "," << hi[a] << ")";
  }
  return out.str();
}

GridDomain::GridDomain(IndexVec extents, std::vector<double> origin, std::vector<double> cell_size)
    : extents_(std::move(extents)), origin_(std::move(origin)), cell_size_(std::move(cell_size)) {
  if (extents_.empty()) throw ValidationError("domain: at least one axis required");
  if (origin_.size() != extents_.size() || cell_size_.size() != extents_.size())
    throw ValidationError("domain: extents, origin and cell_size differ in dimension");
  for (std::size_t a = 0; a < extents_.size(); ++a) {
    if (extents_[a] < 1) throw ValidationError("domain: extent must be >= 1");
    if (!(cell_size_[a] > 0.0) || !std::isfinite(cell_size_[a]))
      throw ValidationError("domain: cell_size must be positive");
    if (!std::isfinite(origin_[a])) throw ValidationError("domain: origin must be finite");
  }
}

GridDomain::GridDomain(IndexVec extents)
    : GridDomain(extents, std::vector<double>(extents.size(), 0.0),
                 std::vector<double>(extents.size(), 1.0)) {}

std::uint64_t GridDomain::cell_count() const { return cuboid().cell_count(); }

GridCuboid GridDomain::cuboid() const { return GridCuboid(IndexVec(dims(), 0), extents_); }

bool GridDomain::contains(const GridPoint& p) const {
  if (p.dims() != dims()) return false;
  for (std::size_t a = 0; a < dims(); ++a)
    if (p.index[a] < 0 || p.index[a] >= extents_[a]) return false;
  return true;
}

std::vector<double> GridDomain::world(const GridPoint& p) const {
  std::vector<double> w(dims());
  for (std::size_t a = 0; a < dims(); ++a) w[a] = world(a, p.index[a]);
  return w;
}

GridPoint GridDomain::locate(std::span<const double> coords) const {
  GridPoint p{IndexVec(dims())};
  for (std::size_t a = 0; a < dims(); ++a) {
    const double rel = (coords[a] - origin_[a]) / cell_size_[a];
    p.index[a] = std::clamp<Index>(static_cast<Index>(std::floor(rel)), 0, extents_[a] - 1);
  }
  return p;
}

std::uint64_t GridDomain::linear_index(const GridPoint& p) const {
  return cuboid().local_offset(p);
}

GridPoint GridDomain::point_at(std::uint64_t linear) const { return cuboid().point_at(linear); }

double GridDomain::max_cell_size() const {
  return *std::max_element(cell_size_.begin(), cell_size_.end());
}

void to_json(nlohmann::json& j, const GridDomain& domain) {
  j = nlohmann::json{{"extents", domain.extents()},
                     {"origin", domain.origin()},
                     {"cell_size", domain.cell_size()}};
}

GridDomain domain_from_json(const nlohmann::json& j, const std::string& path) {
  using namespace detail;
  auto extents = as_integers(member(j, path, "extents"), join_path(path, "extents"));
  auto origin = as_numbers(member(j, path, "origin"), join_path(path, "origin"));
  auto cell_size = as_numbers(member(j, path, "cell_size"), join_path(path, "cell_size"));
  try {
    return GridDomain(std::move(extents), std::move(origin), std::move(cell_size));
  } catch (const ValidationError& e) {
    throw ParseError(path.empty() ? "/" : path, e.what());
  }
}

nlohmann::json cuboid_to_json(const GridCuboid& box) {
  return nlohmann::json{{"lo", box.lo}, {"hi", box.hi}};
}

GridCuboid cuboid_from_json(const nlohmann::json& j, const std::string& path) {
  using namespace detail;
  auto lo = as_integers(member(j, path, "lo"), join_path(path, "lo"));
  auto hi = as_integers(member(j, path, "hi"), join_path(path, "hi"));
  try {
    return GridCuboid(std::move(lo), std::move(hi));
  } catch (const ValidationError& e) {
    throw ParseError(path, e.what());
  }
}

std::vector<GridCuboid> split(const GridCuboid& cuboid) {
  if (cuboid.cell_count() <= 1) throw ValidationError("unsplittable: single-cell cuboid");
  std::vector<std::size_t> cut_axes;
  for (std::size_t a = 0; a < cuboid.dims(); ++a)
    if (cuboid.extent(a) >= 2) cut_axes.push_back(a);

  const std::size_t n = std::size_t{1} << cut_axes.size();
  std::vector<GridCuboid> children;
  children.reserve(n);
  for (std::size_t code = 0; code < n; ++code) {
    GridCuboid child = cuboid;
    for (std::size_t j = 0; j < cut_axes.size(); ++j) {
      const std::size_t a = cut_axes[j];
      const Index mid = cuboid.lo[a] + cuboid.extent(a) / 2;
      // First cut axis is the most significant bit of the child code.
      const bool high = (code >> (cut_axes.size() - 1 - j)) & 1U;
      if (high)
        child.lo[a] = mid;
      else
        child.hi[a] = mid;
    }
    children.push_back(std::move(child));
  }
  return children;
}

std::size_t child_slot(const GridCuboid& cuboid, const GridPoint& p) {
  std::size_t code = 0;
  for (std::size_t a = 0; a < cuboid.dims(); ++a) {
    if (cuboid.extent(a) < 2) continue;
    const Index mid = cuboid.lo[a] + cuboid.extent(a) / 2;
    code = (code << 1) | (p.index[a] >= mid ? 1U : 0U);
  }
  return code;
}

std::vector<GridPoint> sample_points(const GridCuboid& cuboid, std::uint64_t k, Rng& rng) {
  if (k == 0) throw ValidationError("sample_points: k must be positive");
  const std::uint64_t n = cuboid.cell_count();
  std::vector<GridPoint> points;
  if (k >= n) {
    points.reserve(n);
    for (std::uint64_t i = 0; i < n; ++i) points.push_back(cuboid.point_at(i));
    return points;
  }
  // Floyd's subset sampling: a uniform k-subset in k draws.
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(k * 2);
  points.reserve(k);
  for (std::uint64_t j = n - k; j < n; ++j) {
    const std::uint64_t t = rng.below(j + 1);
    const std::uint64_t pick = chosen.insert(t).second ? t : j;
    if (pick == j) chosen.insert(j);
    points.push_back(cuboid.point_at(pick));
  }
  return points;
}

std::string format_point(const GridPoint& p) {
  std::string out = "(";
  for (std::size_t a = 0; a < p.dims(); ++a) {
    if (a) out += ",";
    out += std::to_string(p.index[a]);
  }
  return out + ")";
}

IndexVec parse_extents(const std::string& text) {
  IndexVec extents;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = text.find('x', start);
    const std::string part = text.substr(start, end == std::string::npos ? end : end - start);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(part, &used);
      if (used != part.size() || v < 1) throw std::invalid_argument(part);
      extents.push_back(v);
    } catch (const std::exception&) {
      throw ValidationError("invalid grid extents '" + text + "' (expected e.g. 64x64)");
    }
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return extents;
}

}  // namespace meshprof
