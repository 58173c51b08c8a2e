#include "meshprof/builder.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <numbers>
#include <sstream>

#include "meshprof/error.hpp"
#include "meshprof/format.hpp"

namespace meshprof {

ProfileFunction median_of(ProfileFunction f, std::size_t repetitions) {
  if (repetitions == 0) throw ValidationError("median_of: repetitions must be >= 1");
  ProfileFunction wrapped = f;
  wrapped.pure = true;
  wrapped.query = [inner = std::move(f.query), repetitions, arity = f.arity](const GridPoint& p) {
    std::vector<ValueVector> runs;
    runs.reserve(repetitions);
    for (std::size_t r = 0; r < repetitions; ++r) runs.push_back(inner(p));
    ValueVector median(arity);
    std::vector<double> column(repetitions);
    for (std::size_t j = 0; j < arity; ++j) {
      for (std::size_t r = 0; r < repetitions; ++r) column[r] = runs[r].at(j);
      std::sort(column.begin(), column.end());
      median[j] = repetitions % 2 ? column[repetitions / 2]
                                  : 0.5 * (column[repetitions / 2 - 1] + column[repetitions / 2]);
    }
    return median;
  };
  return wrapped;
}

SamplePolicy parse_policy(const std::string& text) {
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const bool has_arg = colon != std::string::npos;
  const std::string arg = has_arg ? text.substr(colon + 1) : std::string();
  auto positive = [&](const char* what) {
    const double v = parse_double(arg, what);
    if (!(v > 0.0)) throw ValidationError(std::string(what) + " must be positive");
    return v;
  };
  if (name == "diameter") return GridDiameterPolicy{has_arg ? positive("diameter factor") : 0.5};
  if (name == "uniform" && has_arg) return UniformTheoremPolicy{positive("Lipschitz constant")};
  if (name == "l2" && has_arg) return L2TheoremPolicy{positive("Lipschitz constant")};
  if (name == "fixed" && has_arg) {
    const double k = parse_double(arg, "sample count");
    if (k < 2 || k != std::floor(k)) throw ValidationError("fixed:k requires an integer k >= 2");
    return FixedPolicy{static_cast<std::uint64_t>(k)};
  }
  throw ValidationError("unknown sample policy '" + text +
                        "' (expected diameter[:f], uniform:c, l2:c or fixed:k)");
}

std::string policy_to_string(const SamplePolicy& policy) {
  struct Visitor {
    std::string operator()(const GridDiameterPolicy& p) const {
      return "diameter:" + format_double(p.factor);
    }
    std::string operator()(const UniformTheoremPolicy& p) const {
      return "uniform:" + format_double(p.lipschitz);
    }
    std::string operator()(const L2TheoremPolicy& p) const {
      return "l2:" + format_double(p.lipschitz);
    }
    std::string operator()(const FixedPolicy& p) const { return "fixed:" + std::to_string(p.k); }
  };
  return std::visit(Visitor{}, policy);
}

void BuildConfig::validate(std::size_t arity) const {
  if (threshold.size() != arity)
    throw ValidationError("threshold has " + std::to_string(threshold.size()) +
                          " components but the profile has arity " + std::to_string(arity));
  for (double s : threshold)
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("thresholds must be positive");
  if (min_samples < 1) throw ValidationError("min_samples must be >= 1");
  if (!(oversample_exponent >= 0.0)) throw ValidationError("oversample exponent must be >= 0");
  if (auto* fixed = std::get_if<FixedPolicy>(&policy); fixed && fixed->k < 2)
    throw ValidationError("fixed policy requires k >= 2");
  if (purity_check_rate < 0.0 || purity_check_rate > 1.0)
    throw ValidationError("purity check rate must lie in [0, 1]");
}

nlohmann::json to_json(const BuildConfig& config) {
  return nlohmann::json{{"threshold", config.threshold},
                        {"policy", policy_to_string(config.policy)},
                        {"oversample_exponent", config.oversample_exponent},
                        {"seed", config.seed},
                        {"min_samples", config.min_samples},
                        {"spread", config.spread == SpreadMode::Range ? "range" : "mean"},
                        {"cache", config.use_cache}};
}

std::uint64_t sample_size(const SamplePolicy& policy, const GridCuboid& cuboid,
                          const GridDomain& domain, const BuildConfig& config) {
  const double cells = static_cast<double>(cuboid.cell_count());
  const double diam = cuboid.grid_diameter();
  const double h = domain.max_cell_size();
  const double s = *std::min_element(config.threshold.begin(), config.threshold.end());
  const double d = static_cast<double>(domain.dims());

  auto oversampled = [&](double k_base) {
    k_base = std::max(k_base, std::numbers::e);
    return std::ceil(k_base * std::pow(std::log(k_base), config.oversample_exponent));
  };

  double k = 0.0;
  if (auto* p = std::get_if<GridDiameterPolicy>(&policy)) {
    k = std::ceil(p->factor * diam);
  } else if (auto* p = std::get_if<UniformTheoremPolicy>(&policy)) {
    k = oversampled(cells * std::pow(p->lipschitz * h / s, d));
  } else if (auto* p = std::get_if<L2TheoremPolicy>(&policy)) {
    k = oversampled(std::sqrt(diam) + p->lipschitz * diam * h / s);
  } else {
    k = static_cast<double>(std::get<FixedPolicy>(policy).k);
  }
  k = std::clamp(k, static_cast<double>(config.min_samples), cells);
  return static_cast<std::uint64_t>(k);
}

bool spread_test(std::span<const ValueVector> values, std::span<const double> threshold,
                 SpreadMode mode) {
  if (values.empty()) throw ValidationError("spread_test: no values");
  const std::size_t m = threshold.size();
  for (const auto& v : values)
    if (v.size() != m) throw ValidationError("spread_test: arity mismatch");
  for (std::size_t j = 0; j < m; ++j) {
    double lo = values[0][j];
    double hi = lo;
    double sum = 0.0;
    for (const auto& v : values) {
      lo = std::min(lo, v[j]);
      hi = std::max(hi, v[j]);
      sum += v[j];
    }
    if (mode == SpreadMode::Range) {
      if (hi - lo > threshold[j]) return false;
    } else {
      const double mean = sum / static_cast<double>(values.size());
      if (std::max(hi - mean, mean - lo) > threshold[j]) return false;
    }
  }
  return true;
}

QueryCache::QueryCache(const GridDomain& domain, const ProfileFunction& f, bool enabled,
                       double purity_check_rate)
    : domain_(domain),
      f_(f),
      enabled_(enabled),
      check_every_(purity_check_rate > 0.0
                       ? static_cast<std::uint64_t>(std::llround(1.0 / purity_check_rate))
                       : 0) {}

ValueVector QueryCache::call(const GridPoint& p) {
  ValueVector v;
  try {
    v = f_.query(p);
  } catch (const std::exception& e) {
    throw ProfileError("query at " + format_point(p) + " failed: " + e.what());
  }
  evaluations_.fetch_add(1);
  if (v.size() != f_.arity)
    throw ProfileError("query at " + format_point(p) + " returned " + std::to_string(v.size()) +
                       " components, expected " + std::to_string(f_.arity));
  for (double x : v)
    if (!std::isfinite(x))
      throw ProfileError("query at " + format_point(p) + " returned a non-finite value");
  return v;
}

ValueVector QueryCache::get(const GridPoint& p) {
  total_requests_.fetch_add(1);
  const std::uint64_t key = domain_.linear_index(p);
  if (enabled_) {
    std::optional<ValueVector> cached;
    {
      std::lock_guard lock(mutex_);
      if (auto it = values_.find(key); it != values_.end()) cached = it->second;
    }
    if (cached) {
      const auto hit = hits_.fetch_add(1) + 1;
      if (f_.pure && check_every_ && hit % check_every_ == 0 && call(p) != *cached)
        throw ProfileError("non-deterministic profile: repeated query at " + format_point(p) +
                           " returned a different value");
      return *cached;
    }
  }
  ValueVector fresh = call(p);
  std::lock_guard lock(mutex_);
  auto it = values_.try_emplace(key, fresh).first;
  return enabled_ ? it->second : fresh;
}

std::uint64_t QueryCache::distinct_queries() const {
  std::lock_guard lock(mutex_);
  return values_.size();
}

std::vector<std::pair<GridPoint, ValueVector>> QueryCache::entries() const {
  std::vector<std::pair<std::uint64_t, ValueVector>> raw;
  {
    std::lock_guard lock(mutex_);
    raw.assign(values_.begin(), values_.end());
  }
  std::sort(raw.begin(), raw.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<GridPoint, ValueVector>> out;
  out.reserve(raw.size());
  for (auto& [key, value] : raw) out.emplace_back(domain_.point_at(key), std::move(value));
  return out;
}

nlohmann::json to_json(const BuildReport& report, bool include_timing) {
  nlohmann::json j{{"distinct_queries", report.distinct_queries},
                   {"total_requests", report.total_requests},
                   {"evaluations", report.evaluations},
                   {"leaf_count", report.leaf_count},
                   {"depth", report.depth},
                   {"saturated_leaves", report.saturated_leaves}};
  if (include_timing) j["wall_time_ms"] = report.wall_time_ms;
  return j;
}

namespace {

class TreeBuilder {
public:
  TreeBuilder(const ProfileFunction& f, const GridDomain& domain, const BuildConfig& config)
      : domain_(domain),
        config_(config),
        cache_(domain, f, config.use_cache, f.pure ? config.purity_check_rate : 0.0),
        parallel_(f.thread_safe && config.jobs > 1),
        free_workers_(parallel_ ? static_cast<int>(config.jobs) - 1 : 0) {}

  Node build(const GridCuboid& box, bool is_root) {
    Node node;
    node.box = box;
    if (box.cell_count() == 1) {
      auto value = cache_.get(box.point_at(0));
      node.leaf = LeafData::constant(std::move(value));
      node.leaf.samples = 1;
      node.leaf.saturated = !is_root;
      return node;
    }

    Rng rng(hash_combine(config_.seed, box.lo) ^ hash_combine(~config_.seed, box.hi));
    const auto k = sample_size(config_.policy, box, domain_, config_);
    const auto points = sample_points(box, k, rng);
    std::vector<ValueVector> values;
    values.reserve(points.size());
    for (const auto& p : points) values.push_back(cache_.get(p));

    if (spread_test(values, config_.threshold, config_.spread)) {
      node.leaf = summarize(values);
      return node;
    }

    auto boxes = split(box);
    node.children.resize(boxes.size());
    std::vector<std::pair<std::size_t, std::future<Node>>> pending;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (parallel_ && i + 1 < boxes.size() && try_acquire()) {
        pending.emplace_back(i, std::async(std::launch::async, [this, b = boxes[i]] {
                               struct Release {
                                 TreeBuilder* self;
                                 ~Release() { self->free_workers_.fetch_add(1); }
                               } release{this};
                               return build(b, false);
                             }));
      } else {
        node.children[i] = build(boxes[i], false);
      }
    }
    for (auto& [i, fut] : pending) node.children[i] = fut.get();
    return node;
  }

  QueryCache& cache() { return cache_; }

private:
  bool try_acquire() {
    int n = free_workers_.load();
    while (n > 0)
      if (free_workers_.compare_exchange_weak(n, n - 1)) return true;
    return false;
  }

  LeafData summarize(const std::vector<ValueVector>& values) const {
    const std::size_t m = values.front().size();
    LeafData leaf;
    leaf.samples = values.size();
    leaf.lo_seen = values.front();
    leaf.hi_seen = values.front();
    for (const auto& v : values)
      for (std::size_t j = 0; j < m; ++j) {
        leaf.lo_seen[j] = std::min(leaf.lo_seen[j], v[j]);
        leaf.hi_seen[j] = std::max(leaf.hi_seen[j], v[j]);
      }
    // Mean as offset from the minimum: exact when all samples agree.
    leaf.value.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
      double excess = 0.0;
      for (const auto& v : values) excess += v[j] - leaf.lo_seen[j];
      const double mean = leaf.lo_seen[j] + excess / static_cast<double>(values.size());
      leaf.value[j] = std::clamp(mean, leaf.lo_seen[j], leaf.hi_seen[j]);
    }
    return leaf;
  }

  const GridDomain& domain_;
  const BuildConfig& config_;
  QueryCache cache_;
  bool parallel_;
  std::atomic<int> free_workers_;
};

}  // namespace

BuildResult build(const ProfileFunction& f, const GridDomain& domain, const BuildConfig& config,
                  bool keep_sample_log) {
  if (!f.query) throw ValidationError("profile function has no query");
  config.validate(f.arity);
  const auto start = std::chrono::steady_clock::now();

  TreeBuilder builder(f, domain, config);
  Node root = builder.build(domain.cuboid(), true);

  BuildReport report;
  report.distinct_queries = builder.cache().distinct_queries();
  report.total_requests = builder.cache().total_requests();
  report.evaluations = builder.cache().evaluations();

  Subdivision provisional(domain, f.arity, std::move(root));
  provisional.for_each_leaf([&](const LeafView& leaf) {
    ++report.leaf_count;
    report.depth = std::max(report.depth, leaf.depth);
    if (leaf.data.saturated) ++report.saturated_leaves;
  });
  report.wall_time_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

  nlohmann::json metadata{{"build", to_json(config)}, {"report", to_json(report)}};
  BuildResult result{provisional.with_metadata(std::move(metadata)), report, {}};
  if (keep_sample_log) result.sample_log = builder.cache().entries();
  return result;
}

double estimate_lipschitz(const ProfileFunction& f, const GridDomain& domain, std::size_t pairs,
                          std::uint64_t seed) {
  std::vector<std::size_t> axes;
  for (std::size_t a = 0; a < domain.dims(); ++a)
    if (domain.extents()[a] >= 2) axes.push_back(a);
  if (axes.empty()) return 0.0;
  Rng rng(seed);
  double best = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    GridPoint a = domain.point_at(rng.below(domain.cell_count()));
    const std::size_t axis = axes[rng.below(axes.size())];
    GridPoint b = a;
    b.index[axis] += a.index[axis] + 1 < domain.extents()[axis] ? 1 : -1;
    const auto va = f.query(a);
    const auto vb = f.query(b);
    for (std::size_t j = 0; j < f.arity; ++j)
      best = std::max(best, std::abs(va.at(j) - vb.at(j)) / domain.cell_size()[axis]);
  }
  return best;
}

std::string sample_log_csv(const std::vector<std::pair<GridPoint, ValueVector>>& log) {
  std::ostringstream out;
  if (!log.empty()) {
    const auto d = log.front().first.dims();
    const auto m = log.front().second.size();
    for (std::size_t a = 0; a < d; ++a) out << (a ? "," : "") << "i" << a;
    for (std::size_t j = 0; j < m; ++j) out << ",v" << j;
    out << "\n";
  }
  for (const auto& [p, v] : log) {
    for (std::size_t a = 0; a < p.dims(); ++a) out << (a ? "," : "") << p.index[a];
    for (double x : v) out << "," << format_double(x);
    out << "\n";
  }
  return out.str();
}

}  // namespace meshprof
