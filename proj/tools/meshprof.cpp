#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "json.hpp"
#include "meshprof/analysis.hpp"
#include "meshprof/builder.hpp"
#include "meshprof/error.hpp"
#include "meshprof/export.hpp"
#include "meshprof/format.hpp"
#include "meshprof/io.hpp"
#include "meshprof/mesh.hpp"
#include "meshprof/sources.hpp"
#include "meshprof/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace meshprof;

namespace {

std::vector<std::string> g_argv;

// Collects the outputs of one command and writes them together with a
// manifest named after the primary output.
class Outputs {
 public:
  Outputs(std::string command, bool force) : command_(std::move(command)), force_(force) {}

  void claim(const std::string& path) {
    if (path.empty()) throw ValidationError("empty output path");
    if (!force_ && fs::exists(path))
      throw ValidationError(path + " exists (use --force to overwrite)");
    paths_.push_back(path);
  }

  void input(const std::string& path) { inputs_[path] = fnv1a_hex(read_file(path)); }

  void put(const std::string& path, std::string content) {
    if (std::find(paths_.begin(), paths_.end(), path) == paths_.end()) claim(path);
    contents_[path] = std::move(content);
  }

  json& config() { return config_; }
  json& report() { return report_; }

  void commit() {
    if (paths_.empty()) return;
    const std::string manifest_path = paths_.front() + ".manifest.json";
    if (!force_ && fs::exists(manifest_path))
      throw ValidationError(manifest_path + " exists (use --force to overwrite)");
    json outputs = json::array();
    for (const auto& p : paths_) {
      const auto& content = contents_.at(p);
      write_file_atomic(p, content);
      outputs.push_back({{"path", p}, {"fnv1a", fnv1a_hex(content)}});
    }
    json manifest = {{"tool", "meshprof"},
                     {"version", kVersion},
                     {"command", command_},
                     {"argv", g_argv},
                     {"config", config_},
                     {"inputs", inputs_},
                     {"outputs", outputs},
                     {"report", report_}};
    write_file_atomic(manifest_path, manifest.dump(1) + "\n");
  }

 private:
  std::string command_;
  bool force_;
  std::vector<std::string> paths_;
  std::map<std::string, std::string> contents_;
  json inputs_ = json::object();
  json config_ = json::object();
  json report_ = json::object();
};

Subdivision load_input(Outputs& outputs, const std::string& path) {
  outputs.input(path);
  return load_subdivision(path);
}

GridPoint parse_point(const std::string& text, const GridDomain& domain) {
  GridPoint p;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    p.index.push_back(static_cast<Index>(parse_double(item, "point index")));
  if (!domain.contains(p))
    throw ValidationError("point " + text + " is outside the domain");
  return p;
}

std::vector<double> parse_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(item, what));
  if (out.empty()) throw ValidationError("empty " + what + " list");
  return out;
}

std::optional<View> parse_view(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return View{v.at(0), v.at(1)};
}

std::string join_values(const ValueVector& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

json values_json(const ValueVector& v) {
  json out = json::array();
  for (double x : v) out.push_back(x);
  return out;
}

// ---- build -----------------------------------------------------------------

struct BuildArgs {
  std::string fixture, exec, domain, threshold, policy = "diameter:0.5", spread = "range";
  std::string out, sample_log;
  std::uint64_t seed = 0, min_samples = 2;
  double oversample = 2.0;
  std::size_t arity = 1, repeat = 1;
  unsigned jobs = 1;
  bool serial = false, no_cache = false, timings = false, force = false;
};

struct Source {
  ProfileSource source;
  json echo;
};

Source make_source(const BuildArgs& a) {
  const IndexVec extents = parse_extents(a.domain);
  if (!a.fixture.empty()) {
    return {fixture_source(a.fixture, extents), {{"fixture", a.fixture}}};
  }
  GridDomain domain(extents);
  ProfileFunction f = exec_profile(a.exec, domain, a.arity, !a.serial);
  if (a.repeat > 1) f = median_of(std::move(f), a.repeat);
  json echo = {{"exec", a.exec}, {"arity", a.arity}, {"repeat", a.repeat}};
  if (const char* dir = std::getenv("MESHPROF_CACHE_DIR"); dir && *dir) {
    json key = {{"exec", a.exec}, {"domain", domain}, {"arity", a.arity}, {"repeat", a.repeat}};
    f = persistent_profile(std::move(f), domain, dir, fnv1a_hex(key.dump()));
  }
  return {{std::move(f), domain, "command " + a.exec}, echo};
}

BuildConfig make_config(const BuildArgs& a, const std::string& threshold) {
  BuildConfig c;
  c.threshold = parse_list(threshold, "threshold");
  c.policy = parse_policy(a.policy);
  c.oversample_exponent = a.oversample;
  c.seed = a.seed;
  c.min_samples = a.min_samples;
  if (a.spread == "range") c.spread = SpreadMode::Range;
  else if (a.spread == "mean") c.spread = SpreadMode::DeviationFromMean;
  else throw ValidationError("unknown spread mode '" + a.spread + "' (range, mean)");
  c.use_cache = !a.no_cache;
  c.jobs = a.jobs;
  return c;
}

int cmd_build(const BuildArgs& a) {
  if (a.fixture.empty() == a.exec.empty())
    throw ValidationError("exactly one of --fixture and --exec is required");
  Outputs outputs("build", a.force);
  outputs.claim(a.out);
  if (!a.sample_log.empty()) outputs.claim(a.sample_log);

  Source src = make_source(a);
  BuildConfig config = make_config(a, a.threshold);
  if (src.source.profile.arity != config.threshold.size() && config.threshold.size() == 1)
    config.threshold.assign(src.source.profile.arity, config.threshold.front());

  BuildResult result = build(src.source.profile, src.source.domain, config, !a.sample_log.empty());
  outputs.config() = {{"source", src.echo}, {"domain", a.domain}, {"build", to_json(config)}};
  outputs.report() = to_json(result.report, a.timings);
  outputs.put(a.out, dump(result.subdivision));
  if (!a.sample_log.empty()) outputs.put(a.sample_log, sample_log_csv(result.sample_log));
  outputs.commit();
  std::cout << to_json(result.report, a.timings).dump() << "\n";
  return 0;
}

// ---- quality ---------------------------------------------------------------

int cmd_quality(const BuildArgs& a, const std::string& thresholds) {
  if (a.fixture.empty()) throw ValidationError("--fixture is required");
  Outputs outputs("quality", a.force);
  outputs.claim(a.out);
  Source src = make_source(a);
  std::string csv = quality_csv_header();
  for (double s : parse_list(thresholds, "threshold")) {
    BuildConfig config = make_config(a, format_double(s));
    config.threshold.assign(src.source.profile.arity, s);
    BuildResult r = build(src.source.profile, src.source.domain, config);
    csv += quality_csv_row(s, r.report, error_vs_oracle(r.subdivision, src.source.profile));
  }
  outputs.config() = {{"source", src.echo},
                      {"domain", a.domain},
                      {"thresholds", thresholds},
                      {"policy", a.policy},
                      {"seed", a.seed}};
  outputs.put(a.out, csv);
  outputs.commit();
  std::cout << csv;
  return 0;
}

// ---- algebra ---------------------------------------------------------------

int cmd_eval(const std::string& tree, const std::vector<std::string>& points,
             const std::string& points_file, const std::vector<double>& view) {
  const Subdivision sub = load_subdivision(tree);
  std::vector<std::string> all = points;
  if (!points_file.empty()) {
    std::istringstream in(read_file(points_file));
    std::string line;
    while (std::getline(in, line))
      if (!line.empty() && line[0] != '#') all.push_back(line);
  }
  if (all.empty()) throw ValidationError("no points given (--point or --points)");
  const auto v = parse_view(view);
  for (const auto& text : all) {
    const GridPoint p = parse_point(text, sub.domain());
    std::cout << format_point(p) << " "
              << (v ? format_double(evaluate_view(sub, p, *v)) : join_values(sub.evaluate(p)))
              << "\n";
  }
  return 0;
}

int cmd_diff(const std::string& a, const std::string& b, const std::string& op,
             const std::string& out, bool force) {
  Outputs outputs("diff", force);
  outputs.claim(out);
  const Subdivision result =
      combine(load_input(outputs, a), load_input(outputs, b), parse_combine_op(op));
  outputs.config() = {{"op", op}};
  outputs.report() = {{"leaf_count", result.leaf_count()}, {"depth", result.depth()}};
  outputs.put(out, dump(result));
  outputs.commit();
  return 0;
}

int cmd_avg(const std::string& tree, const std::string& dist_path) {
  const Subdivision sub = load_subdivision(tree);
  const Distribution dist = dist_path.empty()
                                ? Distribution::uniform()
                                : distribution_from_json(json::parse(read_file(dist_path)));
  const auto [lo, hi] = sub.min_max();
  std::cout << json{{"average", values_json(weighted_average(sub, dist))},
                    {"min", values_json(lo)},
                    {"max", values_json(hi)}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_cost(const std::vector<std::string>& counts, const std::string& model_path,
             const std::string& combinator, const std::string& out, bool force) {
  Outputs outputs("cost", force);
  outputs.claim(out);
  CostModel model;
  if (model_path.empty()) {
    model = default_render_cost_model();
  } else {
    outputs.input(model_path);
    model = cost_model_from_json(json::parse(read_file(model_path)));
  }
  if (combinator == "sequential") model.combinator = Combinator::Sequential;
  else if (combinator == "parallel") model.combinator = Combinator::Parallel;
  else if (!combinator.empty())
    throw ValidationError("unknown combinator '" + combinator + "' (sequential, parallel)");
  std::vector<Subdivision> trees;
  for (const auto& c : counts) trees.push_back(load_input(outputs, c));
  const Subdivision result = cost_estimate(trees, model);
  outputs.config() = {{"model", to_json(model)}};
  outputs.put(out, dump(result));
  outputs.commit();
  return 0;
}

int cmd_select(const std::vector<std::string>& candidates, const std::string& point,
               const std::vector<double>& view, const std::string& out, bool force) {
  const auto v = parse_view(view);
  if (point.empty() == out.empty())
    throw ValidationError("select needs either --point or --out");
  Outputs outputs("select", force);
  if (!out.empty()) outputs.claim(out);
  std::vector<Subdivision> trees;
  for (const auto& c : candidates) trees.push_back(load_input(outputs, c));
  if (!point.empty()) {
    const auto [index, value] = select(trees, parse_point(point, trees.at(0).domain()), v);
    std::cout << json{{"index", index}, {"candidate", candidates[index]}, {"value", value}}.dump()
              << "\n";
    return 0;
  }
  if (v)
    for (auto& t : trees)
      if (t.arity() != 1) t = resolve_view(t, *v);
  const Subdivision map = selection_map(trees);
  outputs.config() = {{"candidates", candidates}};
  if (v) outputs.config()["view"] = {v->direction_deg, v->fov_deg};
  outputs.put(out, dump(map));
  outputs.commit();
  return 0;
}

int cmd_optimize(const std::string& tree, std::optional<std::size_t> axis,
                 const std::vector<std::string>& sweep, const std::string& dist_path,
                 const std::string& out, bool force) {
  if (axis.has_value() == !sweep.empty())
    throw ValidationError("optimize needs exactly one of --param-axis and --sweep");
  Outputs outputs("optimize", force);
  if (!out.empty()) outputs.claim(out);
  std::string text;
  if (axis) {
    if (tree.empty()) throw ValidationError("--param-axis requires --tree");
    const ParameterProfile prof = parameter_profile(load_input(outputs, tree), *axis);
    for (std::size_t a = 0; a < prof.input_extents.size(); ++a) text += "i" + std::to_string(a) + ",";
    text += "best_parameter,best_value\n";
    IndexVec cell(prof.input_extents.size(), 0);
    for (std::size_t i = 0; i < prof.best.size(); ++i) {
      for (Index c : cell) text += std::to_string(c) + ",";
      text += std::to_string(prof.best[i]) + "," + format_double(prof.best_value[i]) + "\n";
      for (std::size_t a = cell.size(); a-- > 0;) {
        if (++cell[a] < prof.input_extents[a]) break;
        cell[a] = 0;
      }
    }
    outputs.config() = {{"parameter_axis", *axis}};
  } else {
    std::vector<std::pair<double, Subdivision>> builds;
    for (const auto& item : sweep) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ValidationError("--sweep expects PARAM=FILE, got " + item);
      builds.emplace_back(parse_double(item.substr(0, eq), "sweep parameter"),
                          load_input(outputs, item.substr(eq + 1)));
    }
    Distribution dist = Distribution::uniform();
    if (!dist_path.empty()) {
      outputs.input(dist_path);
      dist = distribution_from_json(json::parse(read_file(dist_path)));
    }
    const SweepResult r = parameter_sweep(builds, dist);
    json table = json::array();
    for (const auto& [p, v] : r.table) table.push_back({p, v});
    text = json{{"best_parameter", r.best_parameter}, {"table", table}}.dump(1) + "\n";
    outputs.config() = {{"sweep", sweep}};
  }
  if (out.empty()) {
    std::cout << text;
  } else {
    outputs.put(out, text);
    outputs.commit();
  }
  return 0;
}

int cmd_render(const std::string& tree, const std::string& slice, const std::string& palette,
               std::size_t component, const std::string& out, bool force) {
  Outputs outputs("render", force);
  outputs.claim(out);
  const std::string sidecar = out + ".json";
  outputs.claim(sidecar);
  const RenderedImage img = render_slice(load_input(outputs, tree), Slice::parse(slice),
                                         parse_palette(palette), component);
  outputs.config() = {{"slice", slice}, {"palette", palette}, {"component", component}};
  outputs.put(out, img.bytes);
  outputs.put(sidecar, img.sidecar.dump(1) + "\n");
  outputs.commit();
  return 0;
}

int cmd_leaves(const std::string& tree, const std::string& out, bool force) {
  Outputs outputs("leaves", force);
  outputs.claim(out);
  outputs.put(out, leaves_csv(load_input(outputs, tree)));
  outputs.commit();
  return 0;
}

void add_build_options(CLI::App* cmd, BuildArgs& a) {
  cmd->add_option("--fixture", a.fixture, "in-process fixture, e.g. sum, spike:16, scene:default:numvisible");
  cmd->add_option("--domain", a.domain, "grid extents, e.g. 64x64")->required();
  cmd->add_option("--policy", a.policy, "diameter[:f] | uniform:c | l2:c | fixed:k")->capture_default_str();
  cmd->add_option("--seed", a.seed)->capture_default_str();
  cmd->add_option("--min-samples", a.min_samples)->capture_default_str();
  cmd->add_option("--oversample", a.oversample, "log exponent for theorem policies")->capture_default_str();
  cmd->add_option("--spread", a.spread, "range | mean")->capture_default_str();
  cmd->add_option("--jobs", a.jobs)->capture_default_str();
  cmd->add_flag("--no-cache", a.no_cache, "re-query repeated points");
  cmd->add_option("--out", a.out)->required();
  cmd->add_flag("--force", a.force, "overwrite existing outputs");
}

}  // namespace

int main(int argc, char** argv) {
  g_argv.assign(argv + 1, argv + argc);
  CLI::App app{"Adaptive subdivision profiles of blackbox algorithms"};
  app.set_version_flag("--version", std::string("meshprof ") + kVersion);
  app.require_subcommand(1);

  BuildArgs build_args;
  auto* build_cmd = app.add_subcommand("build", "build a subdivision from a profile source");
  add_build_options(build_cmd, build_args);
  build_cmd->add_option("--exec", build_args.exec, "external command printing the value(s)");
  build_cmd->add_option("--threshold", build_args.threshold, "spread threshold, one or per component")->required();
  build_cmd->add_option("--arity", build_args.arity, "values printed by --exec")->capture_default_str();
  build_cmd->add_option("--repeat", build_args.repeat, "median of r runs per --exec query")->capture_default_str();
  build_cmd->add_flag("--serial", build_args.serial, "--exec command is not safe to run concurrently");
  build_cmd->add_option("--sample-log", build_args.sample_log, "CSV of every distinct query");
  build_cmd->add_flag("--timings", build_args.timings, "include wall time in the report");

  BuildArgs quality_args;
  std::string thresholds;
  auto* quality_cmd = app.add_subcommand("quality", "error and query counts over thresholds");
  add_build_options(quality_cmd, quality_args);
  quality_cmd->add_option("--thresholds", thresholds, "comma separated")->required();

  std::string tree, tree_b, out, op = "subtract", dist, model, combinator, point, slice,
                                palette = "gray", points_file;
  std::vector<std::string> points, counts, candidates, sweep;
  std::vector<double> view;
  std::optional<std::size_t> param_axis;
  std::size_t component = 0;
  bool force = false;

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a subdivision at grid points");
  eval_cmd->add_option("tree", tree)->required();
  eval_cmd->add_option("--point", points, "i,j,...");
  eval_cmd->add_option("--points", points_file, "file with one point per line");
  eval_cmd->add_option("--view", view, "direction and field of view in degrees")->expected(2);

  auto* diff_cmd = app.add_subcommand("diff", "combine two subdivisions over their common refinement");
  diff_cmd->add_option("a", tree)->required();
  diff_cmd->add_option("b", tree_b)->required();
  diff_cmd->add_option("--op", op, "subtract | add | min | max | ratio")->capture_default_str();

  auto* avg_cmd = app.add_subcommand("avg", "average under an input distribution");
  avg_cmd->add_option("tree", tree)->required();
  avg_cmd->add_option("--dist", dist, "distribution JSON (default uniform)");

  auto* cost_cmd = app.add_subcommand("cost", "combine count subdivisions with a cost model");
  cost_cmd->add_option("--counts", counts, "one tree per unit cost, in model order")->required();
  cost_cmd->add_option("--model", model, "cost model JSON (default render costs)");
  cost_cmd->add_option("--combinator", combinator, "sequential | parallel");

  auto* select_cmd = app.add_subcommand("select", "pick the cheapest candidate");
  select_cmd->add_option("--candidates", candidates)->required();
  select_cmd->add_option("--point", point);
  select_cmd->add_option("--view", view)->expected(2);

  auto* optimize_cmd = app.add_subcommand("optimize", "best parameter per region or overall");
  optimize_cmd->add_option("--tree", tree);
  optimize_cmd->add_option("--param-axis", param_axis);
  optimize_cmd->add_option("--sweep", sweep, "PARAM=FILE, repeatable");
  optimize_cmd->add_option("--dist", dist);

  auto* render_cmd = app.add_subcommand("render", "PGM/PPM heatmap of a 2D slice");
  render_cmd->add_option("tree", tree)->required();
  render_cmd->add_option("--slice", slice, "fixed axes beyond the first two, e.g. 2=0");
  render_cmd->add_option("--palette", palette, "gray | diverging | labels")->capture_default_str();
  render_cmd->add_option("--component", component)->capture_default_str();

  auto* leaves_cmd = app.add_subcommand("leaves", "CSV of all leaves");
  leaves_cmd->add_option("tree", tree)->required();

  for (auto* cmd : {diff_cmd, cost_cmd, render_cmd, leaves_cmd}) {
    cmd->add_option("--out", out)->required();
    cmd->add_flag("--force", force, "overwrite existing outputs");
  }
  for (auto* cmd : {select_cmd, optimize_cmd}) {
    cmd->add_option("--out", out);
    cmd->add_flag("--force", force, "overwrite existing outputs");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*build_cmd) return cmd_build(build_args);
    if (*quality_cmd) return cmd_quality(quality_args, thresholds);
    if (*eval_cmd) return cmd_eval(tree, points, points_file, view);
    if (*diff_cmd) return cmd_diff(tree, tree_b, op, out, force);
    if (*avg_cmd) return cmd_avg(tree, dist);
    if (*cost_cmd) return cmd_cost(counts, model, combinator, out, force);
    if (*select_cmd) return cmd_select(candidates, point, view, out, force);
    if (*optimize_cmd) return cmd_optimize(tree, param_axis, sweep, dist, out, force);
    if (*render_cmd) return cmd_render(tree, slice, palette, component, out, force);
    if (*leaves_cmd) return cmd_leaves(tree, out, force);
  } catch (const ProfileError& e) {
    std::cerr << "meshprof: profile failure: " << e.what() << "\n";
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "meshprof: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "meshprof: invalid JSON: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "meshprof: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
