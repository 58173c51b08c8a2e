#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "meshprof/analysis.hpp"
#include "meshprof/builder.hpp"
#include "meshprof/domain.hpp"

namespace meshprof::fixtures {

// ---------------------------------------------------------------------------
// Closed-form test functions

/// Closed-form function of the world coordinate with a declared Lipschitz
/// constant (Euclidean norm on the world coordinates).
struct LipschitzFixture {
  std::string name;
  GridDomain domain;
  std::function<double(std::span<const double>)> evaluate;
  double lipschitz = 1.0;
  /// Analytic integrals over the domain, where known.
  std::optional<double> integral;
  std::optional<double> integral_abs;
  std::optional<double> integral_sq;

  double at(const GridPoint& p) const;
  ProfileFunction profile() const;
};

/// Tent of base width w (height w/2) on [0, n], zero elsewhere. Centered on
/// the cell center floor(n/3) + 0.5 unless `center` is given. A cuboid sample
/// of constant size almost always misses it.
LipschitzFixture fig2a_spike(Index n, double width, std::optional<double> center = std::nullopt);

/// max(0, sqrt(n) - x) on [0, n]: integral of |f| grows like n and of f^2
/// like n^(3/2).
LipschitzFixture fig2b_ramp(Index n);

/// Zero-mean 1-Lipschitz function: n^(1-2eps) - x up to the kink
/// m = n^(1-2eps) + a n^(1-4eps), constant -a n^(1-4eps) after it, with `a`
/// solving the zero-mean condition in closed form. Its standard deviation
/// grows like n^(1-3eps).
LipschitzFixture example1_f_eps(Index n, double eps);

/// Sum of the world coordinates; 1-Lipschitz in the l1 norm.
LipschitzFixture coordinate_sum(const GridDomain& domain);

ProfileFunction constant_profile(ValueVector value);

/// low below the step position along axis 0, high from it on.
ProfileFunction step_profile(const GridDomain& domain, double position, double low = 0.0,
                             double high = 100.0);

/// (p - x)^2 with x on axis 0 and the parameter p on axis 1, world units.
ProfileFunction parameter_bowl(const GridDomain& domain);

/// Empirical max |f(a) - f(b)| / |a - b| over all axis-adjacent cell pairs.
double max_adjacent_slope(const LipschitzFixture& fixture);

// ---------------------------------------------------------------------------
// Scene fixture

struct Rect {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  bool contains(double x, double y) const { return x >= x0 && x <= x1 && y >= y0 && y <= y1; }
  double center_x() const { return 0.5 * (x0 + x1); }
  double center_y() const { return 0.5 * (y0 + y1); }
  bool operator==(const Rect&) const = default;
};

struct SceneObject {
  Rect box;
  double polygons = 1;
  bool operator==(const SceneObject&) const = default;
};

/// Desk-scale 2D stand-in for a walk-through scene: renderable objects with
/// polygon counts and opaque blockers, seen through 4 * rays_per_side rays.
struct Scene2D {
  double width = 100.0;
  double height = 100.0;
  std::vector<SceneObject> objects;
  std::vector<Rect> blockers;
  int rays_per_side = 64;

  void validate() const;
  double total_polygons() const;
  bool operator==(const Scene2D&) const = default;
};

/// 10x10 grid of small jittered objects with log-uniform polygon counts and
/// three long opaque walls.
Scene2D default_scene(std::uint64_t seed = 1);

/// Random objects and walls for property tests.
Scene2D random_scene(std::uint64_t seed, int objects = 40, int walls = 3, int rays_per_side = 16);

Scene2D scene_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Scene2D& scene);

/// Unit direction of ray i (of 4R). Side s covers rays [sR, (s+1)R); side 0
/// faces +x and sides proceed counterclockwise. Sides are exact 90 degree
/// rotations of side 0.
std::array<double, 2> ray_direction(int rays_per_side, int i);

/// Entry parameter of the ray into the rectangle (0 when the origin is
/// inside), or nullopt.
std::optional<double> ray_rect_entry(double ox, double oy, double dx, double dy, const Rect& r);

/// Objects hit by at least one ray before the ray reaches a blocker.
/// `side` restricts to one side's rays (0..3).
int num_visible(const Scene2D& scene, double x, double y, std::optional<int> side = std::nullopt);
std::vector<bool> visible_objects(const Scene2D& scene, double x, double y,
                                  std::optional<int> side = std::nullopt);

struct CullingConfig {
  int max_tree_depth = 3;
  void validate() const;
};

struct CullStats {
  int num_classified_visible = 0;
  int num_occl_tests = 0;
  double num_polygons_rendered = 0;
};

/// Quadtree over the scene objects with front-to-back traversal and a
/// ray-based conservative occlusion test per node. Read-only after
/// construction.
class CullingRenderer {
public:
  CullingRenderer(Scene2D scene, CullingConfig config);

  CullStats render(double x, double y, std::optional<int> side = std::nullopt) const;

  const Scene2D& scene() const { return scene_; }
  const CullingConfig& config() const { return config_; }
  std::size_t node_count() const { return nodes_.size(); }

private:
  struct TreeNode {
    Rect bounds;
    std::vector<int> objects;   // stored at leaves only
    std::vector<int> children;  // node indices
  };

  int build_node(const Rect& region, std::vector<int> objects, int depth);

  Scene2D scene_;
  CullingConfig config_;
  std::vector<TreeNode> nodes_;
};

enum class SceneQuantity {
  NumVisible,
  ClassifiedVisible,
  OcclusionTests,
  PolygonsRendered,
  CullingCost,
  BruteForceCost,
};

SceneQuantity parse_scene_quantity(const std::string& name);

/// Cost of rendering with culling: model applied to (polygons, tests).
double simulated_cost(const CullStats& stats, const CostModel& model);
/// Cost without culling: every polygon is sent once.
double brute_force_cost(const Scene2D& scene, const CostModel& model);

/// Grid domain over the scene world with the given extents (axes beyond the
/// first two are carried along but ignored by the scene).
GridDomain scene_domain(const Scene2D& scene, const IndexVec& extents);

/// Profile of one scene quantity. Scalar, or one value per side (arity 4)
/// when `directional`. Thread-safe and pure.
ProfileFunction scene_profile(std::shared_ptr<const CullingRenderer> renderer,
                              const GridDomain& domain, SceneQuantity quantity,
                              bool directional = false,
                              const CostModel& model = default_render_cost_model());

}  // namespace meshprof::fixtures
