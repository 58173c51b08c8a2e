#include "meshprof/fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>

#include "json_util.hpp"
#include "meshprof/error.hpp"
#include "meshprof/random.hpp"

namespace meshprof::fixtures {

double LipschitzFixture::at(const GridPoint& p) const {
  const auto w = domain.world(p);
  return evaluate(w);
}

ProfileFunction LipschitzFixture::profile() const {
  return ProfileFunction{1, [f = *this](const GridPoint& p) { return ValueVector{f.at(p)}; },
                         true, true};
}

namespace {

void require_line(Index n) {
  if (n < 16) throw ValidationError("fixture needs n >= 16");
}

}  // namespace

LipschitzFixture fig2a_spike(Index n, double width, std::optional<double> center) {
  require_line(n);
  if (!(width >= 1.0) || width > static_cast<double>(n))
    throw ValidationError("spike width must lie in [1, n]");
  const double c = center.value_or(std::floor(static_cast<double>(n) / 3.0) + 0.5);
  const double half = width / 2.0;
  LipschitzFixture f{"spike", GridDomain({n}), [c, half](std::span<const double> x) {
                       return std::max(0.0, half - std::abs(x[0] - c));
                     }};
  f.lipschitz = 1.0;
  if (c - half >= 0.0 && c + half <= static_cast<double>(n)) {
    f.integral = half * half;
    f.integral_abs = half * half;
    f.integral_sq = 2.0 * half * half * half / 3.0;
  }
  return f;
}

LipschitzFixture fig2b_ramp(Index n) {
  require_line(n);
  const double peak = std::sqrt(static_cast<double>(n));
  LipschitzFixture f{"ramp", GridDomain({n}),
                     [peak](std::span<const double> x) { return std::max(0.0, peak - x[0]); }};
  f.lipschitz = 1.0;
  const double nn = static_cast<double>(n);
  f.integral = nn / 2.0;
  f.integral_abs = nn / 2.0;
  f.integral_sq = std::pow(nn, 1.5) / 3.0;
  return f;
}

LipschitzFixture example1_f_eps(Index n, double eps) {
  require_line(n);
  if (!(eps > 0.0 && eps < 0.25)) throw ValidationError("eps must lie in (0, 1/4)");
  const double nn = static_cast<double>(n);
  const double peak = std::pow(nn, 1.0 - 2.0 * eps);
  // Zero mean: peak^2/2 + t^2/2 - t (n - peak) = 0 for the plateau depth t.
  const double rest = nn - peak;
  if (rest * rest < peak * peak)
    throw ValidationError("example1_f_eps: n too small for eps (no zero-mean plateau)");
  const double depth = rest - std::sqrt(rest * rest - peak * peak);
  const double kink = peak + depth;
  LipschitzFixture f{"zero-mean", GridDomain({n}), [peak, kink, depth](std::span<const double> x) {
                       return x[0] <= kink ? peak - x[0] : -depth;
                     }};
  f.lipschitz = 1.0;
  f.integral = 0.0;
  return f;
}

LipschitzFixture coordinate_sum(const GridDomain& domain) {
  LipschitzFixture f{"sum", domain, [](std::span<const double> x) {
                       double s = 0.0;
                       for (double v : x) s += v;
                       return s;
                     }};
  f.lipschitz = 1.0;
  return f;
}

ProfileFunction constant_profile(ValueVector value) {
  const auto m = value.size();
  return ProfileFunction{m, [v = std::move(value)](const GridPoint&) { return v; }, true, true};
}

ProfileFunction step_profile(const GridDomain& domain, double position, double low, double high) {
  return ProfileFunction{
      1,
      [domain, position, low, high](const GridPoint& p) {
        return ValueVector{domain.world(0, p.index[0]) < position ? low : high};
      },
      true, true};
}

ProfileFunction parameter_bowl(const GridDomain& domain) {
  if (domain.dims() < 2) throw ValidationError("parameter_bowl needs two axes");
  return ProfileFunction{1,
                         [domain](const GridPoint& p) {
                           const double d = domain.world(1, p.index[1]) - domain.world(0, p.index[0]);
                           return ValueVector{d * d};
                         },
                         true, true};
}

double max_adjacent_slope(const LipschitzFixture& fixture) {
  const auto& domain = fixture.domain;
  double best = 0.0;
  const auto n = domain.cell_count();
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto p = domain.point_at(i);
    const double v = fixture.at(p);
    for (std::size_t a = 0; a < domain.dims(); ++a) {
      if (p.index[a] + 1 >= domain.extents()[a]) continue;
      GridPoint q = p;
      ++q.index[a];
      best = std::max(best, std::abs(fixture.at(q) - v) / domain.cell_size()[a]);
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

void Scene2D::validate() const {
  if (!(width > 0.0) || !(height > 0.0)) throw ValidationError("scene world must be positive");
  if (rays_per_side < 8) throw ValidationError("rays_per_side must be >= 8");
  auto inside = [&](const Rect& r) {
    return r.x0 < r.x1 && r.y0 < r.y1 && r.x0 >= 0.0 && r.y0 >= 0.0 && r.x1 <= width &&
           r.y1 <= height;
  };
  for (const auto& o : objects) {
    if (!inside(o.box)) throw ValidationError("scene object outside the world or empty");
    if (!(o.polygons >= 1.0)) throw ValidationError("scene object needs >= 1 polygon");
  }
  for (const auto& b : blockers)
    if (!inside(b)) throw ValidationError("scene blocker outside the world or empty");
}

double Scene2D::total_polygons() const {
  double total = 0.0;
  for (const auto& o : objects) total += o.polygons;
  return total;
}

Scene2D default_scene(std::uint64_t seed) {
  Scene2D scene;
  Rng rng(seed);
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 10; ++j) {
      const double cx = 5.0 + 10.0 * i + rng.uniform(-1.5, 1.5);
      const double cy = 5.0 + 10.0 * j + rng.uniform(-1.5, 1.5);
      const double polys = std::round(std::pow(10.0, rng.uniform(2.0, 4.0)));
      scene.objects.push_back({{cx - 1.0, cy - 1.0, cx + 1.0, cy + 1.0}, polys});
    }
  }
  scene.blockers = {
      {49.6, 0.0, 50.4, 62.0},
      {0.0, 29.6, 38.0, 30.4},
      {58.0, 69.6, 100.0, 70.4},
  };
  return scene;
}

Scene2D random_scene(std::uint64_t seed, int objects, int walls, int rays_per_side) {
  Scene2D scene;
  scene.rays_per_side = rays_per_side;
  Rng rng(seed);
  for (int i = 0; i < objects; ++i) {
    const double w = rng.uniform(0.5, 4.0), h = rng.uniform(0.5, 4.0);
    const double x = rng.uniform(0.0, scene.width - w), y = rng.uniform(0.0, scene.height - h);
    scene.objects.push_back(
        {{x, y, x + w, y + h}, std::round(std::pow(10.0, rng.uniform(2.0, 4.0)))});
  }
  for (int i = 0; i < walls; ++i) {
    const double len = rng.uniform(20.0, 70.0);
    const bool horizontal = rng.below(2) == 0;
    const double w = horizontal ? len : 1.0, h = horizontal ? 1.0 : len;
    const double x = rng.uniform(0.0, scene.width - w), y = rng.uniform(0.0, scene.height - h);
    scene.blockers.push_back({x, y, x + w, y + h});
  }
  return scene;
}

namespace {

nlohmann::json rect_to_json(const Rect& r) {
  return {{"lo", {r.x0, r.y0}}, {"hi", {r.x1, r.y1}}};
}

Rect rect_from_json(const nlohmann::json& j, const std::string& path) {
  using namespace detail;
  const auto lo = as_numbers(member(j, path, "lo"), join_path(path, "lo"));
  const auto hi = as_numbers(member(j, path, "hi"), join_path(path, "hi"));
  if (lo.size() != 2 || hi.size() != 2) throw ParseError(path, "expected 2D lo/hi");
  return {lo[0], lo[1], hi[0], hi[1]};
}

}  // namespace

Scene2D scene_from_json(const nlohmann::json& j) {
  using namespace detail;
  Scene2D scene;
  const auto world = as_numbers(member(j, "", "world"), "/world");
  if (world.size() != 2) throw ParseError("/world", "expected [W, H]");
  scene.width = world[0];
  scene.height = world[1];
  const auto& objects = member(j, "", "objects");
  if (!objects.is_array()) throw ParseError("/objects", "expected an array");
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const std::string path = join_path("/objects", i);
    scene.objects.push_back({rect_from_json(member(objects[i], path, "box"), path + "/box"),
                             as_number(member(objects[i], path, "polys"), path + "/polys")});
  }
  if (auto it = j.find("blockers"); it != j.end()) {
    if (!it->is_array()) throw ParseError("/blockers", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i)
      scene.blockers.push_back(rect_from_json((*it)[i], join_path("/blockers", i)));
  }
  if (auto it = j.find("rays_per_side"); it != j.end())
    scene.rays_per_side = static_cast<int>(as_integer(*it, "/rays_per_side"));
  try {
    scene.validate();
  } catch (const ValidationError& e) {
    throw ParseError("/", e.what());
  }
  return scene;
}

nlohmann::json to_json(const Scene2D& scene) {
  nlohmann::json objects = nlohmann::json::array();
  for (const auto& o : scene.objects)
    objects.push_back({{"box", rect_to_json(o.box)}, {"polys", o.polygons}});
  nlohmann::json blockers = nlohmann::json::array();
  for (const auto& b : scene.blockers) blockers.push_back(rect_to_json(b));
  return {{"world", {scene.width, scene.height}},
          {"objects", objects},
          {"blockers", blockers},
          {"rays_per_side", scene.rays_per_side}};
}

std::array<double, 2> ray_direction(int rays_per_side, int i) {
  const int side = i / rays_per_side;
  const int k = i % rays_per_side;
  const double angle =
      (-45.0 + (k + 0.5) * 90.0 / rays_per_side) * std::numbers::pi / 180.0;
  double dx = std::cos(angle), dy = std::sin(angle);
  for (int s = 0; s < side; ++s) {
    const double t = dx;
    dx = -dy;
    dy = t;
  }
  return {dx, dy};
}

std::optional<double> ray_rect_entry(double ox, double oy, double dx, double dy, const Rect& r) {
  double tmin = 0.0;
  double tmax = std::numeric_limits<double>::infinity();
  const double o[2] = {ox, oy}, d[2] = {dx, dy};
  const double lo[2] = {r.x0, r.y0}, hi[2] = {r.x1, r.y1};
  for (int a = 0; a < 2; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < lo[a] || o[a] > hi[a]) return std::nullopt;
      continue;
    }
    double t1 = (lo[a] - o[a]) / d[a];
    double t2 = (hi[a] - o[a]) / d[a];
    if (t1 > t2) std::swap(t1, t2);
    tmin = std::max(tmin, t1);
    tmax = std::min(tmax, t2);
    if (tmin > tmax) return std::nullopt;
  }
  return tmin;
}

namespace {

struct RaySet {
  int first = 0;
  int last = 0;
};

RaySet rays_for(const Scene2D& scene, std::optional<int> side) {
  if (side && (*side < 0 || *side > 3)) throw ValidationError("side must be 0..3");
  const int r = scene.rays_per_side;
  return side ? RaySet{*side * r, (*side + 1) * r} : RaySet{0, 4 * r};
}

/// Distance along each ray to the first blocker (infinity if none).
std::vector<double> blocker_distances(const Scene2D& scene, double x, double y, RaySet rays) {
  std::vector<double> out;
  out.reserve(rays.last - rays.first);
  for (int i = rays.first; i < rays.last; ++i) {
    const auto [dx, dy] = ray_direction(scene.rays_per_side, i);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : scene.blockers)
      if (auto t = ray_rect_entry(x, y, dx, dy, b)) best = std::min(best, *t);
    out.push_back(best);
  }
  return out;
}

double box_distance(const Rect& r, double x, double y) {
  const double dx = std::max({r.x0 - x, 0.0, x - r.x1});
  const double dy = std::max({r.y0 - y, 0.0, y - r.y1});
  return std::hypot(dx, dy);
}

Rect bounds_of(const Scene2D& scene, const std::vector<int>& objects) {
  Rect r = scene.objects[objects.front()].box;
  for (int i : objects) {
    const auto& b = scene.objects[i].box;
    r = {std::min(r.x0, b.x0), std::min(r.y0, b.y0), std::max(r.x1, b.x1), std::max(r.y1, b.y1)};
  }
  return r;
}

}  // namespace

std::vector<bool> visible_objects(const Scene2D& scene, double x, double y,
                                  std::optional<int> side) {
  const RaySet rays = rays_for(scene, side);
  const auto blocked = blocker_distances(scene, x, y, rays);
  std::vector<bool> seen(scene.objects.size(), false);
  for (int i = rays.first; i < rays.last; ++i) {
    const auto [dx, dy] = ray_direction(scene.rays_per_side, i);
    const double limit = blocked[i - rays.first];
    for (std::size_t o = 0; o < scene.objects.size(); ++o) {
      if (seen[o]) continue;
      if (auto t = ray_rect_entry(x, y, dx, dy, scene.objects[o].box); t && *t < limit)
        seen[o] = true;
    }
  }
  return seen;
}

int num_visible(const Scene2D& scene, double x, double y, std::optional<int> side) {
  const auto seen = visible_objects(scene, x, y, side);
  return static_cast<int>(std::count(seen.begin(), seen.end(), true));
}

void CullingConfig::validate() const {
  if (max_tree_depth < 1 || max_tree_depth > 12)
    throw ValidationError("max_tree_depth must lie in [1, 12]");
}

CullingRenderer::CullingRenderer(Scene2D scene, CullingConfig config)
    : scene_(std::move(scene)), config_(config) {
  scene_.validate();
  config_.validate();
  std::vector<int> all(scene_.objects.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
  build_node({0.0, 0.0, scene_.width, scene_.height}, std::move(all), 1);
}

int CullingRenderer::build_node(const Rect& region, std::vector<int> objects, int depth) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.push_back({objects.empty() ? region : bounds_of(scene_, objects), {}, {}});
  if (depth >= config_.max_tree_depth || objects.size() <= 1) {
    nodes_[index].objects = std::move(objects);
    return index;
  }
  const double mx = region.center_x(), my = region.center_y();
  std::array<std::vector<int>, 4> groups;
  for (int o : objects) {
    const auto& b = scene_.objects[o].box;
    groups[(b.center_y() >= my ? 2 : 0) + (b.center_x() >= mx ? 1 : 0)].push_back(o);
  }
  const std::array<Rect, 4> quads{Rect{region.x0, region.y0, mx, my},
                                  Rect{mx, region.y0, region.x1, my},
                                  Rect{region.x0, my, mx, region.y1},
                                  Rect{mx, my, region.x1, region.y1}};
  for (int q = 0; q < 4; ++q) {
    if (groups[q].empty()) continue;
    const int child = build_node(quads[q], std::move(groups[q]), depth + 1);
    nodes_[index].children.push_back(child);
  }
  return index;
}

CullStats CullingRenderer::render(double x, double y, std::optional<int> side) const {
  const RaySet rays = rays_for(scene_, side);
  const auto blocked = blocker_distances(scene_, x, y, rays);
  std::vector<std::array<double, 2>> dirs;
  dirs.reserve(rays.last - rays.first);
  for (int i = rays.first; i < rays.last; ++i) dirs.push_back(ray_direction(scene_.rays_per_side, i));

  auto node_visible = [&](const Rect& bounds) {
    for (std::size_t r = 0; r < dirs.size(); ++r)
      if (auto t = ray_rect_entry(x, y, dirs[r][0], dirs[r][1], bounds); t && *t < blocked[r])
        return true;
    return false;
  };

  // Front-to-back by distance to the node bounds; ties by node index.
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  queue.emplace(box_distance(nodes_[0].bounds, x, y), 0);
  CullStats stats;
  while (!queue.empty()) {
    const int n = queue.top().second;
    queue.pop();
    const auto& node = nodes_[n];
    ++stats.num_occl_tests;
    if (!node_visible(node.bounds)) continue;
    for (int o : node.objects) {
      ++stats.num_classified_visible;
      stats.num_polygons_rendered += scene_.objects[o].polygons;
    }
    for (int c : node.children) queue.emplace(box_distance(nodes_[c].bounds, x, y), c);
  }
  return stats;
}

SceneQuantity parse_scene_quantity(const std::string& name) {
  if (name == "numvisible") return SceneQuantity::NumVisible;
  if (name == "classified") return SceneQuantity::ClassifiedVisible;
  if (name == "tests") return SceneQuantity::OcclusionTests;
  if (name == "polygons") return SceneQuantity::PolygonsRendered;
  if (name == "cost") return SceneQuantity::CullingCost;
  if (name == "brute") return SceneQuantity::BruteForceCost;
  throw ValidationError("unknown scene quantity '" + name +
                        "' (expected numvisible, classified, tests, polygons, cost or brute)");
}

namespace {

void require_render_model(const CostModel& model) {
  model.validate();
  if (model.unit_costs.size() != 2)
    throw ValidationError("render cost model needs (polygon, occlusion test) unit costs");
}

}  // namespace

double simulated_cost(const CullStats& stats, const CostModel& model) {
  require_render_model(model);
  const double counts[] = {stats.num_polygons_rendered, static_cast<double>(stats.num_occl_tests)};
  return model.apply(counts);
}

double brute_force_cost(const Scene2D& scene, const CostModel& model) {
  require_render_model(model);
  const double counts[] = {scene.total_polygons(), 0.0};
  return model.apply(counts);
}

GridDomain scene_domain(const Scene2D& scene, const IndexVec& extents) {
  if (extents.size() < 2) throw ValidationError("scene domains need at least two axes");
  std::vector<double> origin(extents.size(), 0.0);
  std::vector<double> cell(extents.size(), 1.0);
  cell[0] = scene.width / static_cast<double>(extents[0]);
  cell[1] = scene.height / static_cast<double>(extents[1]);
  return GridDomain(extents, origin, cell);
}

ProfileFunction scene_profile(std::shared_ptr<const CullingRenderer> renderer,
                              const GridDomain& domain, SceneQuantity quantity, bool directional,
                              const CostModel& model) {
  if (domain.dims() < 2) throw ValidationError("scene profiles need at least two axes");
  require_render_model(model);
  auto value = [renderer, quantity, model](double x, double y, std::optional<int> side) {
    const auto& scene = renderer->scene();
    switch (quantity) {
      case SceneQuantity::NumVisible: return static_cast<double>(num_visible(scene, x, y, side));
      case SceneQuantity::BruteForceCost: return brute_force_cost(scene, model);
      default: break;
    }
    const auto stats = renderer->render(x, y, side);
    switch (quantity) {
      case SceneQuantity::ClassifiedVisible: return static_cast<double>(stats.num_classified_visible);
      case SceneQuantity::OcclusionTests: return static_cast<double>(stats.num_occl_tests);
      case SceneQuantity::PolygonsRendered: return stats.num_polygons_rendered;
      default: return simulated_cost(stats, model);
    }
  };
  const std::size_t arity = directional ? 4 : 1;
  return ProfileFunction{arity,
                         [domain, value, directional](const GridPoint& p) {
                           const double x = domain.world(0, p.index[0]);
                           const double y = domain.world(1, p.index[1]);
                           if (!directional) return ValueVector{value(x, y, std::nullopt)};
                           ValueVector v(4);
                           for (int s = 0; s < 4; ++s) v[s] = value(x, y, s);
                           return v;
                         },
                         true, true};
}

}  // namespace meshprof::fixtures
