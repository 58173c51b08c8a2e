#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "json.hpp"
#include "meshprof/domain.hpp"
#include "meshprof/mesh.hpp"

namespace meshprof {

/// Blackbox measurement of some property of an algorithm at a grid point.
struct ProfileFunction {
  std::size_t arity = 1;
  std::function<ValueVector(const GridPoint&)> query;
  /// Same input always yields the same output.
  bool pure = true;
  /// query may be called concurrently.
  bool thread_safe = false;
};

/// Wraps a noisy profile: each query runs `repetitions` times and reports the
/// componentwise median. The result is declared pure.
ProfileFunction median_of(ProfileFunction f, std::size_t repetitions = 5);

// Sample-size policies.

/// ceil(factor * grid diameter of the cuboid).
struct GridDiameterPolicy {
  double factor = 0.5;
};
/// Uniform-error policy: k' = cells * (c*h/s)^d, k = k' * ln(k')^oversample.
struct UniformTheoremPolicy {
  double lipschitz = 1.0;
};
/// Mean-square-error policy: k' = sqrt(diam) + c*diam*h/s, same oversampling.
struct L2TheoremPolicy {
  double lipschitz = 1.0;
};
struct FixedPolicy {
  std::uint64_t k = 8;
};

using SamplePolicy =
    std::variant<GridDiameterPolicy, UniformTheoremPolicy, L2TheoremPolicy, FixedPolicy>;

/// Parses "diameter[:factor]", "uniform:c", "l2:c" or "fixed:k".
SamplePolicy parse_policy(const std::string& text);
std::string policy_to_string(const SamplePolicy& policy);

enum class SpreadMode {
  /// max - min <= s per component.
  Range,
  /// |y - mean| <= s per component.
  DeviationFromMean,
};

struct BuildConfig {
  ValueVector threshold{1.0};
  SamplePolicy policy = GridDiameterPolicy{};
  double oversample_exponent = 2.0;
  std::uint64_t seed = 0;
  std::uint64_t min_samples = 2;
  SpreadMode spread = SpreadMode::Range;
  bool use_cache = true;
  /// Fraction of cache hits that re-query a pure profile to verify purity.
  double purity_check_rate = 0.01;
  /// Concurrent subtree builds; honoured only for thread-safe profiles.
  unsigned jobs = 1;

  void validate(std::size_t arity) const;
};

nlohmann::json to_json(const BuildConfig& config);

/// Number of samples the policy draws in `cuboid`, clamped to
/// [min_samples, cell_count].
std::uint64_t sample_size(const SamplePolicy& policy, const GridCuboid& cuboid,
                          const GridDomain& domain, const BuildConfig& config);

/// True iff every component's spread (per config.spread) is within its
/// threshold. Throws ValidationError on arity mismatch or empty input.
bool spread_test(std::span<const ValueVector> values, std::span<const double> threshold,
                 SpreadMode mode = SpreadMode::Range);

/// Memoizes profile queries by grid point. Safe for concurrent use: a point
/// queried concurrently may be computed twice, but only the first stored
/// value is ever returned.
class QueryCache {
public:
  QueryCache(const GridDomain& domain, const ProfileFunction& f, bool enabled = true,
             double purity_check_rate = 0.0);

  ValueVector get(const GridPoint& p);

  std::uint64_t distinct_queries() const;
  std::uint64_t total_requests() const { return total_requests_.load(); }
  /// Calls actually made to the profile function.
  std::uint64_t evaluations() const { return evaluations_.load(); }

  /// Every distinct query, sorted by linear grid index.
  std::vector<std::pair<GridPoint, ValueVector>> entries() const;

private:
  ValueVector call(const GridPoint& p);

  const GridDomain& domain_;
  const ProfileFunction& f_;
  bool enabled_;
  std::uint64_t check_every_;
  mutable std::mutex mutex_;
  std::unordered_map<std::uint64_t, ValueVector> values_;
  std::atomic<std::uint64_t> total_requests_{0};
  std::atomic<std::uint64_t> evaluations_{0};
  std::atomic<std::uint64_t> hits_{0};
};

struct BuildReport {
  std::uint64_t distinct_queries = 0;
  std::uint64_t total_requests = 0;
  std::uint64_t evaluations = 0;
  std::size_t leaf_count = 0;
  std::size_t depth = 0;
  std::size_t saturated_leaves = 0;
  double wall_time_ms = 0.0;
};

/// Wall time is omitted unless requested so that reports stay reproducible.
nlohmann::json to_json(const BuildReport& report, bool include_timing = false);

struct BuildResult {
  Subdivision subdivision;
  BuildReport report;
  /// Distinct queries in linear-index order; filled when requested.
  std::vector<std::pair<GridPoint, ValueVector>> sample_log;
};

/// Recursive sample / spread-test / split construction. Each cuboid draws its
/// samples from a stream seeded by hashing config.seed with the cuboid, so the
/// output tree is independent of traversal order and of config.jobs.
BuildResult build(const ProfileFunction& f, const GridDomain& domain, const BuildConfig& config,
                  bool keep_sample_log = false);

/// Largest |f(a) - f(b)| / distance over `pairs` random axis-adjacent grid
/// point pairs, maximized over components.
double estimate_lipschitz(const ProfileFunction& f, const GridDomain& domain,
                          std::size_t pairs = 256, std::uint64_t seed = 0);

/// CSV text of a sample log: index columns then value columns.
std::string sample_log_csv(const std::vector<std::pair<GridPoint, ValueVector>>& log);

}  // namespace meshprof
