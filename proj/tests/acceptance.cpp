// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <sstream>

#include "meshprof/analysis.hpp"
#include "meshprof/builder.hpp"
#include "meshprof/fixtures.hpp"
#include "meshprof/io.hpp"
#include "meshprof/mesh.hpp"
#include "support.hpp"

using namespace meshprof;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double limit_s;  // 0: no runtime limit
  std::function<Outcome()> run;
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

double sup_error(const Subdivision& g, const ProfileFunction& f) {
  double worst = 0;
  testing::for_each_point(g.domain(), [&](const GridPoint& p) {
    worst = std::max(worst, std::abs(g.evaluate(p)[0] - f.query(p)[0]));
  });
  return worst;
}

BuildConfig config(SamplePolicy policy, double s, std::uint64_t seed) {
  BuildConfig c;
  c.policy = policy;
  c.threshold = {s};
  c.seed = seed;
  return c;
}

// ---------------------------------------------------------------------------

Outcome theorem_sup() {
  const GridDomain dom({64, 64});
  const auto f = fixtures::coordinate_sum(dom).profile();
  std::string detail;
  bool pass = true;
  for (double s : {2.0, 4.0}) {
    int ok = 0;
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto g = build(f, dom, config(UniformTheoremPolicy{1.0}, s, seed)).subdivision;
      const double e = sup_error(g, f);
      worst = std::max(worst, e);
      ok += e <= 4 * s;
    }
    pass = pass && ok >= 95;
    detail += "s=" + fmt(s) + ": " + std::to_string(ok) + "/100 within 4s (worst sup error " + fmt(worst) + ") ";
  }
  return {pass, detail};
}

Outcome theorem_l2() {
  const GridDomain dom({64, 64});
  const auto f = fixtures::coordinate_sum(dom).profile();
  std::string detail;
  bool pass = true;
  for (double s : {2.0, 4.0}) {
    int ok = 0;
    double worst = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto g = build(f, dom, config(L2TheoremPolicy{1.0}, s, seed)).subdivision;
      const double rms = error_vs_oracle(g, f).rms_error;
      worst = std::max(worst, rms);
      ok += rms <= 4 * s;
    }
    pass = pass && ok >= 95;
    detail += "s=" + fmt(s) + ": " + std::to_string(ok) + "/100 within 4s (worst rms " + fmt(worst) + ") ";
  }
  return {pass, detail};
}

Outcome spike_lower_bound() {
  const auto spike = fixtures::fig2a_spike(1024, 16);
  const auto f = spike.profile();
  const double s = 2.0;
  int missed = 0, found = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    missed += build(f, spike.domain, config(FixedPolicy{4}, s, seed)).subdivision.leaf_count() == 1;
    found += build(f, spike.domain, config(UniformTheoremPolicy{spike.lipschitz}, s, seed)).subdivision.leaf_count() >= 2;
  }
  return {missed >= 80 && found >= 95,
          "fixed(4) missed " + std::to_string(missed) + "/100, theorem-sized found " + std::to_string(found) + "/100"};
}

Outcome ramp_scaling() {
  std::vector<double> r1, r2;
  for (Index n : {Index{256}, Index{1024}, Index{4096}}) {
    const auto f = fixtures::fig2b_ramp(n);
    double a = 0, b = 0;
    for (Index i = 0; i < n; ++i) {
      const double v = f.at(GridPoint{{i}});
      a += std::abs(v);
      b += v * v;
    }
    r1.push_back(a / n);
    r2.push_back(b / std::pow(double(n), 1.5));
  }
  auto spread = [](const std::vector<double>& v) {
    return *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
  };
  return {spread(r1) < 2 && spread(r2) < 2,
          "int|f|/n ratio spread " + fmt(spread(r1)) + ", int f^2/n^1.5 spread " + fmt(spread(r2))};
}

Outcome zero_mean_deviation() {
  std::vector<double> ratios;
  double worst_mean = 0;
  for (Index n : {Index{1024}, Index{4096}, Index{16384}}) {
    const auto f = fixtures::example1_f_eps(n, 0.1);
    long double sum = 0, sq = 0;
    for (Index i = 0; i < n; ++i) {
      const double v = f.at(GridPoint{{i}});
      sum += v;
      sq += static_cast<long double>(v) * v;
    }
    const double mean = static_cast<double>(sum / n);
    const double sd = std::sqrt(static_cast<double>(sq / n) - mean * mean);
    ratios.push_back(sd / std::pow(double(n), 0.7));
    worst_mean = std::max(worst_mean, std::abs(mean));
  }
  const double spread = *std::max_element(ratios.begin(), ratios.end()) / *std::min_element(ratios.begin(), ratios.end());
  const double step = 1.0;
  return {spread < 2 && worst_mean <= 2 * step,
          "sigma/n^0.7 spread " + fmt(spread) + ", max |mean| " + fmt(worst_mean)};
}

Outcome oracle_equivalence() {
  Rng rng(6);
  const double s = 1.0;
  int exact = 0;
  std::uint64_t queries = 0, cells = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const GridDomain dom({4 + static_cast<Index>(rng.below(61)), 4 + static_cast<Index>(rng.below(61))});
    // cut positions per axis, one value per product cell, all values distinct multiples of 3 (> s apart)
    std::vector<std::vector<Index>> cuts(2);
    for (std::size_t a = 0; a < 2; ++a) {
      const auto n = rng.below(5);
      for (std::uint64_t i = 0; i < n; ++i) cuts[a].push_back(1 + static_cast<Index>(rng.below(dom.extents()[a] - 1)));
      std::sort(cuts[a].begin(), cuts[a].end());
    }
    std::vector<double> table((cuts[0].size() + 1) * (cuts[1].size() + 1));
    for (auto& v : table) v = 3.0 * static_cast<double>(rng.below(20)) - 30.0;
    ProfileFunction f{1, [cuts, table](const GridPoint& p) {
                        std::size_t slot[2];
                        for (std::size_t a = 0; a < 2; ++a)
                          slot[a] = static_cast<std::size_t>(std::upper_bound(cuts[a].begin(), cuts[a].end(), p.index[a]) -
                                                             cuts[a].begin());
                        return ValueVector{table[slot[0] * (cuts[1].size() + 1) + slot[1]]};
                      }};
    // largest jump between values over the cell size bounds the slope
    const double jump = 57.0;
    const auto r = build(f, dom, config(UniformTheoremPolicy{jump / dom.max_cell_size()}, s, rng.next()));
    bool same = true;
    testing::for_each_point(dom, [&](const GridPoint& p) { same = same && r.subdivision.evaluate(p) == f.query(p); });
    exact += same;
    queries += r.report.distinct_queries;
    cells += dom.cell_count();
  }
  return {exact == 100, std::to_string(exact) + "/100 trees exact (queried " + fmt(100.0 * queries / cells, 3) +
                            "% of cells)"};
}

Outcome algebra_exactness() {
  Rng rng(71);
  const GridDomain dom({32, 32});
  int combine_ok = 0, avg_ok = 0;
  double worst_rel = 0;
  std::function<void(Node&)> realify = [&](Node& n) {
    if (n.is_leaf()) {
      n.leaf = LeafData::constant({rng.uniform(-1e3, 1e3)});
      return;
    }
    for (auto& c : n.children) realify(c);
  };
  for (int trial = 0; trial < 200; ++trial) {
    Node na = testing::random_node(dom.cuboid(), rng, 1, 1.5, 0);
    Node nb = testing::random_node(dom.cuboid(), rng, 1, 1.5, 0);
    realify(na);
    realify(nb);
    const Subdivision a(dom, 1, na), b(dom, 1, nb);
    const auto d = combine(a, b, CombineOp::Subtract);
    bool ok = true;
    long double sum = 0, abs_sum = 0;
    testing::for_each_point(dom, [&](const GridPoint& p) {
      ok = ok && d.evaluate(p)[0] == a.evaluate(p)[0] - b.evaluate(p)[0];
      sum += a.evaluate(p)[0];
      abs_sum += std::abs(a.evaluate(p)[0]);
    });
    combine_ok += ok;
    const double mean = static_cast<double>(sum / dom.cell_count());
    const double scale = std::max(std::abs(mean), static_cast<double>(abs_sum / dom.cell_count()));
    const double rel = std::abs(weighted_average(a, Distribution::uniform())[0] - mean) / scale;
    worst_rel = std::max(worst_rel, rel);
    avg_ok += rel <= 1e-12;
  }
  return {combine_ok == 200 && avg_ok == 200, "subtract exact " + std::to_string(combine_ok) + "/200, average within 1e-12 " +
                                                  std::to_string(avg_ok) + "/200 (worst relative " + fmt(worst_rel) + ")"};
}

Outcome cost_identity() {
  const GridDomain dom({16, 16});
  const std::vector<Subdivision> counts{Subdivision::constant(dom, {1e6}), Subdivision::constant(dom, {100})};
  CostModel model{{{"polygons", 4e-6, "ms"}, {"occlusion_tests", 0.052, "ms"}}, Combinator::Sequential};
  const double seq = cost_estimate(counts, model).evaluate(GridPoint{{3, 3}})[0];
  model.combinator = Combinator::Parallel;
  const double par = cost_estimate(counts, model).evaluate(GridPoint{{3, 3}})[0];
  return {seq == 9.2 && par == 5.2, "sequential " + fmt(seq, 17) + " ms, parallel " + fmt(par, 17) + " ms"};
}

Outcome parameter_optimization() {
  const GridDomain dom({32, 32});
  const auto f = fixtures::parameter_bowl(dom);
  const auto sub = build(f, dom, config(GridDiameterPolicy{0.5}, 1.0, 5)).subdivision;
  const auto prof = parameter_profile(sub, 1);
  int within = 0;
  for (Index x = 0; x < 32; ++x) {
    const Index p = prof.at({x});
    Index width = 0;
    sub.for_each_leaf([&](const LeafView& l) {
      if (l.box.contains(GridPoint{{x, p}})) width = l.box.extent(1);
    });
    within += std::abs(p - x) <= width;
  }

  const auto scene = fixtures::default_scene();
  const GridDomain sdom = fixtures::scene_domain(scene, {64, 64});
  std::vector<std::pair<double, Subdivision>> builds;
  double oracle_best = 1e300;
  int oracle_depth = 0;
  for (int depth = 1; depth <= 8; ++depth) {
    auto r = std::make_shared<const fixtures::CullingRenderer>(scene, fixtures::CullingConfig{depth});
    const auto cost = fixtures::scene_profile(r, sdom, fixtures::SceneQuantity::CullingCost);
    builds.emplace_back(depth, build(cost, sdom, config(GridDiameterPolicy{}, 0.05, 1)).subdivision);
    long double total = 0;
    testing::for_each_point(sdom, [&](const GridPoint& p) { total += cost.query(p)[0]; });
    if (total < oracle_best) oracle_best = static_cast<double>(total), oracle_depth = depth;
  }
  const auto sweep = parameter_sweep(builds, Distribution::uniform());
  return {within == 32 && sweep.best_parameter == oracle_depth,
          "bowl: " + std::to_string(within) + "/32 columns within one leaf width; sweep best depth " +
              fmt(sweep.best_parameter) + ", dense oracle " + std::to_string(oracle_depth)};
}

Outcome quality_trends() {
  auto r = std::make_shared<const fixtures::CullingRenderer>(fixtures::default_scene(), fixtures::CullingConfig{});
  const GridDomain dom = fixtures::scene_domain(r->scene(), {64, 64, 1});
  const auto f = fixtures::scene_profile(r, dom, fixtures::SceneQuantity::NumVisible);
  std::uint64_t prev_q = UINT64_MAX;
  double prev_e = -1;
  bool pass = true;
  std::string detail;
  for (double s : {10.0, 50.0, 100.0, 500.0}) {
    const auto res = build(f, dom, config(GridDiameterPolicy{}, s, 1));
    const double e = error_vs_oracle(res.subdivision, f).mean_abs_error;
    pass = pass && res.report.distinct_queries <= prev_q && e >= prev_e;
    prev_q = res.report.distinct_queries;
    prev_e = e;
    detail += "s=" + fmt(s) + " q=" + std::to_string(res.report.distinct_queries) + " err=" + fmt(e) + "; ";
  }
  return {pass, detail};
}

Outcome selection_consistency() {
  auto r = std::make_shared<const fixtures::CullingRenderer>(fixtures::default_scene(), fixtures::CullingConfig{});
  const GridDomain dom = fixtures::scene_domain(r->scene(), {64, 64});
  const auto brute = fixtures::scene_profile(r, dom, fixtures::SceneQuantity::BruteForceCost);
  const auto cull = fixtures::scene_profile(r, dom, fixtures::SceneQuantity::CullingCost);
  const std::vector<Subdivision> trees{build(brute, dom, config(GridDiameterPolicy{}, 0.05, 2)).subdivision,
                                       build(cull, dom, config(GridDiameterPolicy{}, 0.05, 2)).subdivision};
  const auto map = selection_map(trees);
  const auto diff = combine(trees[1], trees[0], CombineOp::Subtract);
  int agree = 0, pays = 0, pays_dense = 0;
  testing::for_each_point(dom, [&](const GridPoint& p) {
    const double label = map.evaluate(p)[0];
    const double d = diff.evaluate(p)[0];
    agree += label == (d < 0 ? 1.0 : 0.0);
    pays += label == 1.0;
    pays_dense += cull.query(p)[0] < brute.query(p)[0];
  });
  const auto cells = static_cast<int>(dom.cell_count());
  return {agree == cells && pays > 0, "map agrees with difference sign on " + std::to_string(agree) + "/" +
                                          std::to_string(cells) + " cells; culling pays off on " + std::to_string(pays) +
                                          " cells (dense oracle " + std::to_string(pays_dense) + ")"};
}

Outcome direction_extension() {
  Rng rng(12);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto w = view_weights(View{rng.uniform(-1080, 1080), rng.uniform(1e-3, 360)});
    worst = std::max(worst, std::abs(w[0] + w[1] + w[2] + w[3] - 1.0));
  }
  const GridDomain dom({4, 4});
  const auto sub = Subdivision::constant(dom, {1.0, 2.0, 4.0, 9.0});
  double full_err = 0;
  for (int i = 0; i < 100; ++i)
    full_err = std::max(full_err, std::abs(evaluate_view(sub, GridPoint{{1, 2}}, View{rng.uniform(-360, 360), 360}) - 4.0));

  fixtures::Scene2D iso;
  iso.rays_per_side = 32;
  for (const fixtures::Rect& r : {fixtures::Rect{70, 45, 74, 55}, fixtures::Rect{45, 70, 55, 74}, fixtures::Rect{26, 45, 30, 55},
                                  fixtures::Rect{45, 26, 55, 30}, fixtures::Rect{80, 80, 84, 84}, fixtures::Rect{16, 80, 20, 84},
                                  fixtures::Rect{16, 16, 20, 20}, fixtures::Rect{80, 16, 84, 20}})
    iso.objects.push_back({r, 500});
  iso.blockers = {{62, 30, 63, 70}, {30, 62, 70, 63}, {37, 30, 38, 70}, {30, 37, 70, 38}};
  auto renderer = std::make_shared<const fixtures::CullingRenderer>(iso, fixtures::CullingConfig{3});
  // the single cell of a 1x1 grid is centered on the symmetry center
  const GridDomain one = fixtures::scene_domain(iso, {1, 1});
  double iso_err = 0;
  for (auto q : {fixtures::SceneQuantity::NumVisible, fixtures::SceneQuantity::OcclusionTests,
                 fixtures::SceneQuantity::PolygonsRendered, fixtures::SceneQuantity::CullingCost}) {
    const auto v = fixtures::scene_profile(renderer, one, q, true).query(GridPoint{{0, 0}});
    for (double x : v) iso_err = std::max(iso_err, std::abs(x - v[0]));
  }
  return {worst < 1e-12 && full_err < 1e-12 && iso_err <= 1e-9,
          "max |sum w - 1| " + fmt(worst) + ", full-circle error " + fmt(full_err) + ", isotropic spread " + fmt(iso_err)};
}

Outcome determinism() {
  const std::string steps[] = {
      "build --fixture scene:default:numvisible --domain 64x64 --threshold 20 --seed 3 --sample-log vis.csv --out vis.json",
      "build --fixture scene:default:polygons --domain 64x64 --threshold 2000 --seed 3 --jobs 4 --out polys.json",
      "build --fixture scene:default:tests --domain 64x64 --threshold 2 --seed 3 --out tests.json",
      "build --fixture scene:default:brute --domain 64x64 --threshold 0.01 --seed 3 --out brute.json",
      "cost --counts polys.json tests.json --out cost.json",
      "diff cost.json brute.json --out diff.json",
      "select --candidates brute.json cost.json --out sel.json",
      "render vis.json --out vis.pgm",
      "render diff.json --palette diverging --out diff.ppm",
      "render sel.json --palette labels --out sel.ppm",
      "leaves diff.json --out diff.csv",
      "quality --fixture scene:default:numvisible --domain 32x32 --thresholds 10,50 --seed 3 --out quality.csv",
  };
  std::vector<fs::path> dirs;
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = fs::temp_directory_path() / ("meshprof_accept_" + std::to_string(::getpid()) + "_" + std::to_string(run));
    fs::remove_all(dir);
    fs::create_directories(dir);
    for (const auto& s : steps) {
      const std::string cmd = "cd '" + dir.string() + "' && '" MESHPROF_EXE "' " + s + " > /dev/null";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {false, "command failed: " + s};
    }
    dirs.push_back(dir);
  }
  int files = 0, same = 0;
  for (const auto& entry : fs::directory_iterator(dirs[0])) {
    ++files;
    const auto other = dirs[1] / entry.path().filename();
    same += fs::exists(other) && read_file(entry.path().string()) == read_file(other.string());
  }
  for (const auto& d : dirs) fs::remove_all(d);
  return {files > 0 && same == files, std::to_string(same) + "/" + std::to_string(files) + " artifacts byte-identical"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "uniform sup-error bound", 30, theorem_sup},
      {2, "mean-square error bound", 30, theorem_l2},
      {3, "narrow spike needs theorem-sized samples", 10, spike_lower_bound},
      {4, "ramp integral scaling", 5, ramp_scaling},
      {5, "zero-mean function deviation scaling", 5, zero_mean_deviation},
      {6, "exact reconstruction of piecewise-constant functions", 60, oracle_equivalence},
      {7, "algebra exactness", 30, algebra_exactness},
      {8, "render cost model identity", 0, cost_identity},
      {9, "parameter optimization", 120, parameter_optimization},
      {10, "quality trends over thresholds", 120, quality_trends},
      {11, "selection consistency", 60, selection_consistency},
      {12, "direction extension", 0, direction_extension},
      {13, "CLI determinism", 0, determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::string timing = fmt(secs, 3) + "s";
    if (c.limit_s > 0) {
      timing += " / limit " + fmt(c.limit_s) + "s";
      if (secs >= c.limit_s) {
        o.pass = false;
        o.detail += " [runtime limit exceeded]";
      }
    }
    failed += !o.pass;
    std::printf("%s %2d %s: %s (%s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name.c_str(), o.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
