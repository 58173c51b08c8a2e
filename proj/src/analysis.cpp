#include "meshprof/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "meshprof/error.hpp"
#include "meshprof/format.hpp"

namespace meshprof {
namespace {

void require_same_domain(std::span<const Subdivision* const> inputs) {
  if (inputs.empty()) throw ValidationError("at least one subdivision required");
  for (const auto* sub : inputs)
    if (!(sub->domain() == inputs.front()->domain()))
      throw ValidationError("domain mismatch between subdivisions");
}

Node refine_node(const GridCuboid& box, std::vector<const Node*>& nodes,
                 const LeafCombiner& combine) {
  const bool all_leaves =
      std::all_of(nodes.begin(), nodes.end(), [](const Node* n) { return n->is_leaf(); });
  Node out;
  out.box = box;
  if (all_leaves) {
    std::vector<const ValueVector*> values;
    values.reserve(nodes.size());
    for (const Node* n : nodes) values.push_back(&n->leaf.value);
    out.leaf = combine(values);
    return out;
  }
  const auto boxes = split(box);
  out.children.reserve(boxes.size());
  std::vector<const Node*> next(nodes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    for (std::size_t t = 0; t < nodes.size(); ++t)
      next[t] = nodes[t]->is_leaf() ? nodes[t] : &nodes[t]->children[i];
    out.children.push_back(refine_node(boxes[i], next, combine));
  }
  return out;
}

double apply_op(CombineOp op, double a, double b, bool& degenerate) {
  switch (op) {
    case CombineOp::Subtract: return a - b;
    case CombineOp::Add: return a + b;
    case CombineOp::Min: return std::min(a, b);
    case CombineOp::Max: return std::max(a, b);
    case CombineOp::Ratio:
      if (b == 0.0) {
        degenerate = true;
        return 0.0;
      }
      return a / b;
  }
  return 0.0;
}

std::vector<const Subdivision*> pointers(std::span<const Subdivision> subs) {
  std::vector<const Subdivision*> out;
  out.reserve(subs.size());
  for (const auto& s : subs) out.push_back(&s);
  return out;
}

void require_scalar(std::span<const Subdivision> subs, const char* what) {
  for (const auto& s : subs)
    if (s.arity() != 1) throw ValidationError(std::string(what) + " requires scalar subdivisions");
}

}  // namespace

CombineOp parse_combine_op(const std::string& name) {
  if (name == "subtract") return CombineOp::Subtract;
  if (name == "add") return CombineOp::Add;
  if (name == "min") return CombineOp::Min;
  if (name == "max") return CombineOp::Max;
  if (name == "ratio") return CombineOp::Ratio;
  throw ValidationError("unknown operation '" + name + "'");
}

Subdivision refine_together(std::span<const Subdivision* const> inputs, std::size_t output_arity,
                            const LeafCombiner& combine) {
  require_same_domain(inputs);
  std::vector<const Node*> roots;
  roots.reserve(inputs.size());
  for (const auto* sub : inputs) roots.push_back(&sub->root());
  const auto& domain = inputs.front()->domain();
  Node root = refine_node(domain.cuboid(), roots, combine);
  return Subdivision(domain, output_arity, std::move(root));
}

Subdivision combine(const Subdivision& a, const Subdivision& b, CombineOp op) {
  if (!(a.domain() == b.domain())) throw ValidationError("domain mismatch between subdivisions");
  if (a.arity() != b.arity()) throw ValidationError("value arity mismatch between subdivisions");
  const Subdivision* inputs[] = {&a, &b};
  return refine_together(inputs, a.arity(), [op](std::span<const ValueVector* const> v) {
    const ValueVector& x = *v[0];
    const ValueVector& y = *v[1];
    bool degenerate = false;
    ValueVector out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = apply_op(op, x[j], y[j], degenerate);
    LeafData leaf = LeafData::constant(std::move(out));
    leaf.degenerate = degenerate;
    return leaf;
  });
}

Subdivision reduce_max(const Subdivision& sub) {
  const Subdivision* inputs[] = {&sub};
  return refine_together(inputs, 1, [](std::span<const ValueVector* const> v) {
    return LeafData::constant({*std::max_element(v[0]->begin(), v[0]->end())});
  });
}

Subdivision scale(const Subdivision& sub, double factor) {
  const Subdivision* inputs[] = {&sub};
  return refine_together(inputs, sub.arity(), [factor](std::span<const ValueVector* const> v) {
    ValueVector out = *v[0];
    for (double& x : out) x *= factor;
    return LeafData::constant(std::move(out));
  });
}

Distribution Distribution::weight_table(GridDomain table, std::vector<double> weights) {
  if (weights.size() != table.cell_count())
    throw ValidationError("weight table has " + std::to_string(weights.size()) +
                          " weights for " + std::to_string(table.cell_count()) + " cells");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("weights must be nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw ValidationError("weights must not all be zero");
  Distribution d;
  d.table_ = std::move(table);
  d.weights_ = std::move(weights);
  return d;
}

double Distribution::cell_weight(const GridDomain& domain, const GridPoint& p) const {
  if (!table_) return 1.0;
  const auto& t = *table_;
  if (t.dims() != domain.dims()) throw ValidationError("distribution dimension mismatch");
  GridPoint q{IndexVec(t.dims())};
  for (std::size_t a = 0; a < t.dims(); ++a) {
    const double rel = (domain.world(a, p.index[a]) - t.origin()[a]) / t.cell_size()[a];
    const auto i = static_cast<Index>(std::floor(rel));
    if (i < 0 || i >= t.extents()[a]) return 0.0;
    q.index[a] = i;
  }
  return weights_[t.linear_index(q)];
}

Distribution distribution_from_json(const nlohmann::json& j) {
  using namespace detail;
  const auto& type = member(j, "", "type");
  if (type == "uniform") return Distribution::uniform();
  if (type != "table") throw ParseError("/type", "expected \"uniform\" or \"table\"");
  GridDomain table = domain_from_json(member(j, "", "domain"), "/domain");
  auto weights = as_numbers(member(j, "", "weights"), "/weights");
  try {
    return Distribution::weight_table(std::move(table), std::move(weights));
  } catch (const ValidationError& e) {
    throw ParseError("/weights", e.what());
  }
}

ValueVector weighted_average(const Subdivision& sub, const Distribution& dist) {
  const std::size_t m = sub.arity();
  std::vector<long double> acc(m, 0.0L);
  long double total = 0.0L;
  sub.for_each_leaf([&](const LeafView& leaf) {
    long double mass = 0.0L;
    if (dist.is_uniform()) {
      mass = static_cast<long double>(leaf.box.cell_count());
    } else {
      const auto n = leaf.box.cell_count();
      for (std::uint64_t i = 0; i < n; ++i)
        mass += dist.cell_weight(sub.domain(), leaf.box.point_at(i));
    }
    total += mass;
    for (std::size_t j = 0; j < m; ++j) acc[j] += mass * leaf.data.value[j];
  });
  if (!(total > 0.0L)) throw ValidationError("distribution has zero mass on the domain");
  ValueVector out(m);
  for (std::size_t j = 0; j < m; ++j) out[j] = static_cast<double>(acc[j] / total);
  return out;
}

void CostModel::validate() const {
  if (unit_costs.empty()) throw ValidationError("cost model needs at least one unit cost");
  std::set<std::string> names;
  for (const auto& u : unit_costs) {
    if (!names.insert(u.name).second)
      throw ValidationError("duplicate cost model entry '" + u.name + "'");
    if (!(u.cost >= 0.0) || !std::isfinite(u.cost))
      throw ValidationError("unit cost of '" + u.name + "' must be >= 0");
  }
}

double CostModel::apply(std::span<const double> counts) const {
  if (counts.size() != unit_costs.size())
    throw ValidationError("cost model has " + std::to_string(unit_costs.size()) +
                          " entries but " + std::to_string(counts.size()) + " counts were given");
  double out = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double term = unit_costs[i].cost * counts[i];
    out = combinator == Combinator::Sequential ? out + term : (i == 0 ? term : std::max(out, term));
  }
  return out;
}

CostModel default_render_cost_model(Combinator combinator) {
  return CostModel{{{"polygons", 4e-6, "ms"}, {"occlusion_tests", 0.052, "ms"}}, combinator};
}

CostModel cost_model_from_json(const nlohmann::json& j) {
  using namespace detail;
  CostModel model;
  if (auto it = j.find("combinator"); it != j.end()) {
    if (*it == "sequential")
      model.combinator = Combinator::Sequential;
    else if (*it == "parallel")
      model.combinator = Combinator::Parallel;
    else
      throw ParseError("/combinator", "expected \"sequential\" or \"parallel\"");
  }
  const auto& entries = member(j, "", "unit_costs");
  if (!entries.is_array()) throw ParseError("/unit_costs", "expected an array");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string path = join_path("/unit_costs", i);
    const auto& name = member(entries[i], path, "name");
    if (!name.is_string()) throw ParseError(join_path(path, "name"), "expected a string");
    UnitCost u{name.get<std::string>(), as_number(member(entries[i], path, "cost"),
                                                  join_path(path, "cost")),
               ""};
    if (auto it = entries[i].find("units"); it != entries[i].end() && it->is_string())
      u.units = it->get<std::string>();
    model.unit_costs.push_back(std::move(u));
  }
  try {
    model.validate();
  } catch (const ValidationError& e) {
    throw ParseError("/unit_costs", e.what());
  }
  return model;
}

nlohmann::json to_json(const CostModel& model) {
  nlohmann::json costs = nlohmann::json::array();
  for (const auto& u : model.unit_costs)
    costs.push_back({{"name", u.name}, {"cost", u.cost}, {"units", u.units}});
  return {{"combinator", model.combinator == Combinator::Sequential ? "sequential" : "parallel"},
          {"unit_costs", costs}};
}

Subdivision cost_estimate(std::span<const Subdivision> counts, const CostModel& model) {
  model.validate();
  if (counts.size() != model.unit_costs.size())
    throw ValidationError("cost model has " + std::to_string(model.unit_costs.size()) +
                          " entries but " + std::to_string(counts.size()) +
                          " count subdivisions were given");
  require_scalar(counts, "cost_estimate");
  const auto inputs = pointers(counts);
  return refine_together(inputs, 1, [&model](std::span<const ValueVector* const> v) {
    std::vector<double> c(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) c[i] = (*v[i])[0];
    return LeafData::constant({model.apply(c)});
  });
}

std::array<double, 4> view_weights(const View& view) {
  const double fov = view.fov_deg;
  if (!(fov > 0.0) || fov > 360.0 || !std::isfinite(view.direction_deg))
    throw ValidationError("field of view must lie in (0, 360] degrees");
  // Normalize the cone start into [-45, 315), the span of the four sectors.
  double start = std::fmod(view.direction_deg - fov / 2.0 + 45.0, 360.0);
  if (start < 0.0) start += 360.0;
  start -= 45.0;
  const double end = start + fov;
  std::array<double, 4> w{};
  for (int side = 0; side < 4; ++side) {
    double overlap = 0.0;
    for (int wrap = 0; wrap < 2; ++wrap) {
      const double lo = side * 90.0 - 45.0 + wrap * 360.0;
      const double hi = lo + 90.0;
      overlap += std::max(0.0, std::min(end, hi) - std::max(start, lo));
    }
    w[side] = overlap / fov;
  }
  return w;
}

double evaluate_view(const Subdivision& sub, const GridPoint& p, const View& view) {
  if (sub.arity() != 4)
    throw ValidationError("view evaluation requires 4 side values, subdivision has arity " +
                          std::to_string(sub.arity()));
  const auto w = view_weights(view);
  const auto& v = sub.evaluate(p);
  double out = 0.0;
  for (std::size_t side = 0; side < 4; ++side) out += v[side] * w[side];
  return out;
}

Subdivision resolve_view(const Subdivision& sub, const View& view) {
  if (sub.arity() != 4)
    throw ValidationError("view evaluation requires 4 side values, subdivision has arity " +
                          std::to_string(sub.arity()));
  const auto w = view_weights(view);
  const Subdivision* inputs[] = {&sub};
  return refine_together(inputs, 1, [&w](std::span<const ValueVector* const> v) {
    double out = 0.0;
    for (std::size_t side = 0; side < 4; ++side) out += (*v[0])[side] * w[side];
    return LeafData::constant({out});
  });
}

std::pair<std::size_t, double> select(std::span<const Subdivision> candidates, const GridPoint& p,
                                      const std::optional<View>& view) {
  if (candidates.empty()) throw ValidationError("select: no candidates");
  require_same_domain(pointers(candidates));
  std::size_t best = 0;
  double best_value = 0.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double v = 0.0;
    if (view && candidates[i].arity() != 1) {
      v = evaluate_view(candidates[i], p, *view);
    } else {
      if (candidates[i].arity() != 1)
        throw ValidationError("select: directional candidates need a view");
      v = candidates[i].evaluate(p)[0];
    }
    if (i == 0 || v < best_value) {
      best = i;
      best_value = v;
    }
  }
  return {best, best_value};
}

Subdivision selection_map(std::span<const Subdivision> candidates) {
  if (candidates.empty()) throw ValidationError("selection_map: no candidates");
  require_scalar(candidates, "selection_map");
  const auto inputs = pointers(candidates);
  return refine_together(inputs, 1, [](std::span<const ValueVector* const> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
      if ((*v[i])[0] < (*v[best])[0]) best = i;
    return LeafData::constant({static_cast<double>(best)});
  });
}

SweepResult parameter_sweep(std::span<const std::pair<double, Subdivision>> builds,
                            const Distribution& dist) {
  if (builds.empty()) throw ValidationError("parameter_sweep: no parameter values");
  SweepResult result;
  std::size_t best = 0;
  for (std::size_t i = 0; i < builds.size(); ++i) {
    const auto& [param, sub] = builds[i];
    if (sub.arity() != 1) throw ValidationError("parameter_sweep requires scalar subdivisions");
    const double avg = weighted_average(sub, dist)[0];
    result.table.emplace_back(param, avg);
    const auto& incumbent = result.table[best];
    if (avg < incumbent.second || (avg == incumbent.second && param < incumbent.first)) best = i;
  }
  result.best_parameter = result.table[best].first;
  return result;
}

Index ParameterProfile::at(const IndexVec& input_cell) const {
  std::uint64_t offset = 0;
  for (std::size_t a = 0; a < input_extents.size(); ++a)
    offset = offset * static_cast<std::uint64_t>(input_extents[a]) +
             static_cast<std::uint64_t>(input_cell.at(a));
  return best.at(offset);
}

ParameterProfile parameter_profile(const Subdivision& sub, std::size_t parameter_axis) {
  const auto& domain = sub.domain();
  if (domain.dims() < 2) throw ValidationError("parameter_profile needs at least two axes");
  if (parameter_axis >= domain.dims())
    throw ValidationError("invalid parameter axis " + std::to_string(parameter_axis));
  if (sub.arity() != 1) throw ValidationError("parameter_profile requires a scalar subdivision");

  ParameterProfile profile;
  profile.parameter_axis = parameter_axis;
  for (std::size_t a = 0; a < domain.dims(); ++a)
    if (a != parameter_axis) profile.input_extents.push_back(domain.extents()[a]);
  const GridCuboid inputs(IndexVec(profile.input_extents.size(), 0), profile.input_extents);
  const auto n = inputs.cell_count();
  const Index params = domain.extents()[parameter_axis];
  profile.best.resize(n);
  profile.best_value.resize(n);

  GridPoint p{IndexVec(domain.dims())};
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto input = inputs.point_at(i);
    for (std::size_t a = 0, b = 0; a < domain.dims(); ++a)
      if (a != parameter_axis) p.index[a] = input.index[b++];
    Index best = 0;
    double best_value = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < params; ++k) {
      p.index[parameter_axis] = k;
      const double v = sub.evaluate(p)[0];
      if (v < best_value) {
        best = k;
        best_value = v;
      }
    }
    profile.best[i] = best;
    profile.best_value[i] = best_value;
  }
  return profile;
}

ErrorStats error_vs_oracle(const Subdivision& sub, const ProfileFunction& f) {
  const auto& domain = sub.domain();
  const auto n = domain.cell_count();
  if (n > kOracleCellLimit)
    throw ValidationError("exhaustive comparison limited to " + std::to_string(kOracleCellLimit) +
                          " cells, domain has " + std::to_string(n));
  if (f.arity != sub.arity()) throw ValidationError("profile arity does not match subdivision");
  long double abs_sum = 0.0L, sq_sum = 0.0L, approx_sum = 0.0L, exact_sum = 0.0L;
  ErrorStats stats;
  for (std::uint64_t i = 0; i < n; ++i) {
    const auto p = domain.point_at(i);
    const auto exact = f.query(p);
    const auto& approx = sub.evaluate(p);
    for (std::size_t j = 0; j < sub.arity(); ++j) {
      const double e = std::abs(approx[j] - exact.at(j));
      abs_sum += e;
      sq_sum += static_cast<long double>(e) * e;
      approx_sum += approx[j];
      exact_sum += exact[j];
      stats.max_abs_error = std::max(stats.max_abs_error, e);
    }
  }
  const long double count = static_cast<long double>(n) * sub.arity();
  stats.cells = n;
  stats.mean_abs_error = static_cast<double>(abs_sum / count);
  stats.rms_error = static_cast<double>(std::sqrt(sq_sum / count));
  stats.mean_value = static_cast<double>(approx_sum / count);
  stats.exact_mean = static_cast<double>(exact_sum / count);
  return stats;
}

std::string quality_csv_header() {
  return "threshold,distinct_queries,total_requests,leaf_count,mean_value,exact_mean,"
         "mean_abs_error,max_abs_error,rms_error\n";
}

std::string quality_csv_row(double threshold, const BuildReport& report, const ErrorStats& stats) {
  std::ostringstream out;
  out << format_double(threshold) << "," << report.distinct_queries << ","
      << report.total_requests << "," << report.leaf_count << ","
      << format_double(stats.mean_value) << "," << format_double(stats.exact_mean) << ","
      << format_double(stats.mean_abs_error) << "," << format_double(stats.max_abs_error) << ","
      << format_double(stats.rms_error) << "\n";
  return out.str();
}

}  // namespace meshprof
