#include "doctest.h"

#include <cmath>
#include <numbers>

#include "meshprof/error.hpp"
#include "meshprof/fixtures.hpp"
#include "support.hpp"

using namespace meshprof;
using namespace meshprof::fixtures;

namespace {

// Independent visibility oracle: rays as long segments intersected with the
// four rectangle edges by the cross-product formula, angles recomputed here.
std::optional<double> segment_hit(double ox, double oy, double dx, double dy, const Rect& r) {
  if (ox > r.x0 && ox < r.x1 && oy > r.y0 && oy < r.y1) return 0.0;
  const double corners[4][2] = {{r.x0, r.y0}, {r.x1, r.y0}, {r.x1, r.y1}, {r.x0, r.y1}};
  std::optional<double> best;
  for (int e = 0; e < 4; ++e) {
    const double ax = corners[e][0], ay = corners[e][1];
    const double ex = corners[(e + 1) % 4][0] - ax, ey = corners[(e + 1) % 4][1] - ay;
    const double denom = dx * ey - dy * ex;
    if (std::abs(denom) < 1e-15) continue;
    const double t = ((ax - ox) * ey - (ay - oy) * ex) / denom;
    const double u = ((ax - ox) * dy - (ay - oy) * dx) / denom;
    if (t >= 0 && u >= 0 && u <= 1 && (!best || t < *best)) best = t;
  }
  return best;
}

int oracle_visible(const Scene2D& s, double x, double y, std::optional<int> side = std::nullopt) {
  const int R = s.rays_per_side;
  std::vector<bool> seen(s.objects.size(), false);
  for (int side_i = 0; side_i < 4; ++side_i) {
    if (side && *side != side_i) continue;
    for (int k = 0; k < R; ++k) {
      const double deg = 90.0 * side_i - 45.0 + (k + 0.5) * 90.0 / R;
      const double dx = std::cos(deg * std::numbers::pi / 180), dy = std::sin(deg * std::numbers::pi / 180);
      double wall = std::numeric_limits<double>::infinity();
      for (const auto& b : s.blockers)
        if (auto t = segment_hit(x, y, dx, dy, b)) wall = std::min(wall, *t);
      for (std::size_t o = 0; o < s.objects.size(); ++o)
        if (auto t = segment_hit(x, y, dx, dy, s.objects[o].box); t && *t < wall) seen[o] = true;
    }
  }
  return static_cast<int>(std::count(seen.begin(), seen.end(), true));
}

Scene2D blank(int rays = 64) {
  Scene2D s;
  s.rays_per_side = rays;
  return s;
}

}  // namespace

TEST_CASE("declared Lipschitz constants hold on adjacent cells") {
  for (Index n : {Index{256}, Index{1024}, Index{16384}}) {
    const auto spike = fig2a_spike(n, 16);
    CHECK(max_adjacent_slope(spike) <= spike.lipschitz * (1 + 1e-6));
    const auto ramp = fig2b_ramp(n);
    CHECK(max_adjacent_slope(ramp) <= ramp.lipschitz * (1 + 1e-6));
    const auto ex = example1_f_eps(n, 0.1);
    CHECK(max_adjacent_slope(ex) <= ex.lipschitz * (1 + 1e-6));
  }
  const auto sum = coordinate_sum(GridDomain({128, 128}));
  CHECK(max_adjacent_slope(sum) <= sum.lipschitz * (1 + 1e-6));
}

TEST_CASE("spike is zero outside its support") {
  const auto f = fig2a_spike(1024, 16);
  const double c = 1024 / 3 + 0.5;
  int nonzero = 0;
  for (Index i = 0; i < 1024; ++i) {
    const double v = f.at(GridPoint{{i}});
    if (std::abs(i + 0.5 - c) >= 8) CHECK(v == 0.0);
    nonzero += v > 0;
  }
  CHECK(nonzero == 15);
  CHECK(f.at(GridPoint{{341}}) == 8.0);
  CHECK_THROWS_AS(fig2a_spike(1024, 0.5), ValidationError);
}

TEST_CASE("ramp integrals against closed forms") {
  for (Index n : {Index{256}, Index{1024}, Index{4096}}) {
    const auto f = fig2b_ramp(n);
    double s1 = 0, s2 = 0;
    for (Index i = 0; i < n; ++i) {
      const double v = f.at(GridPoint{{i}});
      s1 += std::abs(v);
      s2 += v * v;
    }
    CHECK(s1 == doctest::Approx(*f.integral_abs).epsilon(0.01));
    CHECK(s2 == doctest::Approx(*f.integral_sq).epsilon(0.01));
    CHECK(*f.integral_abs == doctest::Approx(n / 2.0));
  }
}

TEST_CASE("zero-mean fixture parameter validation") {
  CHECK_THROWS_AS(example1_f_eps(8, 0.1), ValidationError);
  CHECK_THROWS_AS(example1_f_eps(1024, 0.25), ValidationError);
  CHECK_THROWS_AS(example1_f_eps(1024, 0.0), ValidationError);
  const auto f = example1_f_eps(4096, 0.1);
  double sum = 0;
  for (Index i = 0; i < 4096; ++i) sum += f.at(GridPoint{{i}});
  CHECK(std::abs(sum / 4096) <= 2.0);
  CHECK(f.at(GridPoint{{0}}) > 0);
  CHECK(f.at(GridPoint{{4095}}) < 0);
}

TEST_CASE("step and bowl profiles") {
  const GridDomain dom({10, 4});
  const auto step = step_profile(dom, 5.0);
  CHECK(step.query(GridPoint{{4, 0}})[0] == 0.0);
  CHECK(step.query(GridPoint{{5, 3}})[0] == 100.0);
  const auto bowl = parameter_bowl(GridDomain({8, 8}));
  CHECK(bowl.query(GridPoint{{3, 3}})[0] == 0.0);
  CHECK(bowl.query(GridPoint{{1, 4}})[0] == 9.0);
}

TEST_CASE("ray directions cover four rotated sectors") {
  for (int R : {8, 16, 64}) {
    for (int i = 0; i < 4 * R; ++i) {
      const auto d = ray_direction(R, i);
      CHECK(std::hypot(d[0], d[1]) == doctest::Approx(1.0));
      const double deg = std::atan2(d[1], d[0]) * 180 / std::numbers::pi;
      const double expect = 90.0 * (i / R) - 45.0 + (i % R + 0.5) * 90.0 / R;
      CHECK(std::remainder(deg - expect, 360.0) == doctest::Approx(0.0).epsilon(1e-9));
    }
    const auto a = ray_direction(R, 0), b = ray_direction(R, R);
    CHECK(b[0] == -a[1]);
    CHECK(b[1] == a[0]);
  }
}

TEST_CASE("ray-rectangle entry") {
  const Rect r{2, -1, 4, 1};
  CHECK(*ray_rect_entry(0, 0, 1, 0, r) == doctest::Approx(2.0));
  CHECK_FALSE(ray_rect_entry(0, 0, -1, 0, r).has_value());
  CHECK(*ray_rect_entry(3, 0, 1, 0, r) == 0.0);
  CHECK_FALSE(ray_rect_entry(0, 5, 1, 0, r).has_value());
}

TEST_CASE("visibility agrees with the segment-intersection oracle") {
  Rng rng(12);
  std::vector<Scene2D> scenes{default_scene()};
  for (std::uint64_t s = 1; s <= 6; ++s) scenes.push_back(random_scene(s));
  for (const auto& scene : scenes) {
    for (int i = 0; i < 40; ++i) {
      const double x = rng.uniform(0, scene.width), y = rng.uniform(0, scene.height);
      CHECK(num_visible(scene, x, y) == oracle_visible(scene, x, y));
      const int side = static_cast<int>(rng.below(4));
      CHECK(num_visible(scene, x, y, side) == oracle_visible(scene, x, y, side));
    }
  }
}

TEST_CASE("visibility examples") {
  Scene2D ring = blank();
  for (int k = 0; k < 8; ++k) {
    const double a = k * std::numbers::pi / 4;
    const double cx = 50 + 30 * std::cos(a), cy = 50 + 30 * std::sin(a);
    ring.objects.push_back({{cx - 5, cy - 5, cx + 5, cy + 5}, 10});
  }
  CHECK(num_visible(ring, 50, 50) == 8);

  Scene2D boxed = ring;
  boxed.blockers = {{40, 40, 60, 41}, {40, 59, 60, 60}, {40, 40, 41, 60}, {59, 40, 60, 60}};
  CHECK(num_visible(boxed, 50, 50) == 0);
  CHECK(num_visible(boxed, 50, 50) <= static_cast<int>(boxed.objects.size()));

  Scene2D single = blank(8);
  single.objects.push_back({{70, 70, 90, 90}, 5});
  CHECK(num_visible(single, 10, 10) == 1);
  CHECK(num_visible(single, 90, 20) == 1);
}

TEST_CASE("scene validation and JSON round-trip") {
  Scene2D bad = blank(4);
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = blank();
  bad.objects.push_back({{90, 90, 101, 95}, 1});
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  bad = blank();
  bad.objects.push_back({{1, 1, 2, 2}, 0.5});
  CHECK_THROWS_AS(bad.validate(), ValidationError);
  const auto s = default_scene(3);
  CHECK(scene_from_json(to_json(s)) == s);
  CHECK(s.objects.size() == 100);
  CHECK(s.blockers.size() == 3);
  CHECK(default_scene(3) == s);
  CHECK_THROWS_AS(scene_from_json(nlohmann::json{{"world", {100}}}), ParseError);
}

TEST_CASE("culling: no blockers at depth 1 means one test and everything rendered") {
  const auto s = random_scene(4, 30, 0, 16);
  const CullingRenderer r(s, CullingConfig{1});
  const auto st = r.render(33, 47);
  CHECK(st.num_occl_tests == 1);
  CHECK(st.num_classified_visible == 30);
  CHECK(st.num_polygons_rendered == doctest::Approx(s.total_polygons()));
  const CullingRenderer empty(blank(), CullingConfig{3});
  const auto e = empty.render(5, 5);
  CHECK(e.num_occl_tests == 1);
  CHECK(simulated_cost(e, default_render_cost_model()) == doctest::Approx(0.052));
  CHECK_THROWS_AS(CullingConfig{0}.validate(), ValidationError);
  CHECK_THROWS_AS(CullingConfig{13}.validate(), ValidationError);
}

TEST_CASE("culling: a full-width wall hides everything behind it") {
  Scene2D s = blank(32);
  s.blockers.push_back({0, 49, 100, 51});
  double front = 0;
  for (int i = 0; i < 4; ++i) {
    s.objects.push_back({{10.0 + 25 * i, 10, 12.0 + 25 * i, 12}, 100});
    front += 100;
    s.objects.push_back({{10.0 + 25 * i, 80, 12.0 + 25 * i, 82}, 1000});
  }
  const CullingRenderer r(s, CullingConfig{3});
  const auto st = r.render(50, 25);
  CHECK(st.num_polygons_rendered == front);
  CHECK(st.num_classified_visible == oracle_visible(s, 50, 25));
  CHECK(st.num_occl_tests < static_cast<int>(r.node_count()));
}

TEST_CASE("culling is conservative at every cell and depth") {
  std::vector<Scene2D> scenes{default_scene(), random_scene(9, 30, 4, 16)};
  for (const auto& scene : scenes) {
    const GridDomain dom = scene_domain(scene, {32, 32});
    for (int depth = 1; depth <= 8; ++depth) {
      const CullingRenderer r(scene, CullingConfig{depth});
      testing::for_each_point(dom, [&](const GridPoint& p) {
        const auto w = dom.world(p);
        CHECK(r.render(w[0], w[1]).num_classified_visible >= num_visible(scene, w[0], w[1]));
      });
    }
  }
}

TEST_CASE("deeper culling trees test more and render less") {
  const auto scene = default_scene();
  std::vector<CullingRenderer> renderers;
  for (int d = 1; d <= 8; ++d) renderers.emplace_back(scene, CullingConfig{d});
  Rng rng(77);
  for (int i = 0; i < 200; ++i) {
    const double x = rng.uniform(0, 100), y = rng.uniform(0, 100);
    CullStats prev = renderers[0].render(x, y);
    for (int d = 1; d < 8; ++d) {
      const auto st = renderers[d].render(x, y);
      CHECK(st.num_occl_tests >= prev.num_occl_tests);
      CHECK(st.num_polygons_rendered <= prev.num_polygons_rendered);
      prev = st;
    }
  }
}

TEST_CASE("directional profiles") {
  Scene2D iso = blank(16);
  // four-fold symmetric about (50, 50)
  for (const Rect& r : {Rect{70, 45, 74, 55}, Rect{45, 70, 55, 74}, Rect{26, 45, 30, 55}, Rect{45, 26, 55, 30},
                        Rect{80, 80, 84, 84}, Rect{16, 80, 20, 84}, Rect{16, 16, 20, 20}, Rect{80, 16, 84, 20}})
    iso.objects.push_back({r, 50});
  iso.blockers = {{60, 40, 61, 60}, {40, 60, 60, 61}, {39, 40, 40, 60}, {40, 39, 60, 40}};
  for (int s = 1; s < 4; ++s) CHECK(num_visible(iso, 50, 50, s) == num_visible(iso, 50, 50, 0));
  const CullingRenderer r(iso, CullingConfig{3});
  for (int s = 1; s < 4; ++s) {
    CHECK(r.render(50, 50, s).num_occl_tests == r.render(50, 50, 0).num_occl_tests);
    CHECK(r.render(50, 50, s).num_polygons_rendered == doctest::Approx(r.render(50, 50, 0).num_polygons_rendered).epsilon(1e-9));
  }

  Scene2D east = blank(64);
  for (int i = 0; i < 5; ++i) east.objects.push_back({{80, 30.0 + 8 * i, 82, 36.0 + 8 * i}, 10});
  CHECK(num_visible(east, 20, 50, 0) == 5);
  for (int s = 1; s < 4; ++s) CHECK(num_visible(east, 20, 50, s) == 0);

  auto renderer = std::make_shared<const CullingRenderer>(default_scene(), CullingConfig{});
  const GridDomain dom = scene_domain(renderer->scene(), {16, 16});
  const auto dir = scene_profile(renderer, dom, SceneQuantity::NumVisible, true);
  const auto scalar = scene_profile(renderer, dom, SceneQuantity::NumVisible);
  CHECK(dir.arity == 4);
  CHECK(dir.thread_safe);
  testing::for_each_point(dom, [&](const GridPoint& p) {
    const auto v = dir.query(p);
    const double total = scalar.query(p)[0];
    CHECK(*std::max_element(v.begin(), v.end()) <= total);
    CHECK(total <= v[0] + v[1] + v[2] + v[3]);
  });
  // all visible objects in one sector: max over sides equals the scalar count
  const auto eg = scene_domain(east, {10, 10});
  const auto w = eg.world(GridPoint{{2, 5}});
  int best = 0;
  for (int s = 0; s < 4; ++s) best = std::max(best, num_visible(east, w[0], w[1], s));
  CHECK(best == num_visible(east, w[0], w[1]));
}

TEST_CASE("scene quantities and costs") {
  const auto scene = default_scene();
  auto renderer = std::make_shared<const CullingRenderer>(scene, CullingConfig{3});
  const GridDomain dom = scene_domain(scene, {8, 8, 2});
  CHECK(dom.cell_size()[0] == 12.5);
  const auto model = default_render_cost_model();
  const auto cost = scene_profile(renderer, dom, SceneQuantity::CullingCost);
  const auto brute = scene_profile(renderer, dom, SceneQuantity::BruteForceCost);
  const auto tests = scene_profile(renderer, dom, SceneQuantity::OcclusionTests);
  const auto polys = scene_profile(renderer, dom, SceneQuantity::PolygonsRendered);
  testing::for_each_point(dom, [&](const GridPoint& p) {
    CHECK(cost.query(p)[0] == doctest::Approx(4e-6 * polys.query(p)[0] + 0.052 * tests.query(p)[0]));
    CHECK(brute.query(p)[0] == doctest::Approx(4e-6 * scene.total_polygons()));
  });
  CHECK(brute_force_cost(scene, model) == doctest::Approx(4e-6 * scene.total_polygons()));
  CHECK(parse_scene_quantity("numvisible") == SceneQuantity::NumVisible);
  CHECK_THROWS_AS(parse_scene_quantity("fps"), ValidationError);
}
