#pragma once

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "meshprof/builder.hpp"
#include "meshprof/domain.hpp"
#include "meshprof/mesh.hpp"

namespace meshprof {

// ---------------------------------------------------------------------------
// Pointwise algebra

enum class CombineOp { Subtract, Add, Min, Max, Ratio };

CombineOp parse_combine_op(const std::string& name);

/// Leaf combiner over the common refinement: receives one value per input
/// tree (in input order) and returns the output leaf.
using LeafCombiner = std::function<LeafData(std::span<const ValueVector* const>)>;

/// Common refinement of several subdivisions on one domain, computed by
/// simultaneous descent. Inputs must share the domain; arity is checked by the
/// caller-supplied combiner.
Subdivision refine_together(std::span<const Subdivision* const> inputs,
                            std::size_t output_arity, const LeafCombiner& combine);

/// op applied componentwise on the common refinement of a and b. Ratio leaves
/// with a zero denominator get value 0 and the degenerate flag.
Subdivision combine(const Subdivision& a, const Subdivision& b, CombineOp op);

/// Scalar subdivision holding the max over components (directional folding).
Subdivision reduce_max(const Subdivision& sub);

/// Every leaf value multiplied by factor.
Subdivision scale(const Subdivision& sub, double factor);

// ---------------------------------------------------------------------------
// Averages

/// Input distribution over a domain: uniform, or a coarse weight table whose
/// cells are looked up by the world coordinate of each fine cell center.
class Distribution {
public:
  static Distribution uniform() { return Distribution(); }
  /// weights in linear-index order of `table`; nonnegative, not all zero.
  static Distribution weight_table(GridDomain table, std::vector<double> weights);

  bool is_uniform() const { return !table_.has_value(); }
  /// Unnormalized weight of a cell of `domain`.
  double cell_weight(const GridDomain& domain, const GridPoint& p) const;

private:
  std::optional<GridDomain> table_;
  std::vector<double> weights_;
};

/// {"type":"uniform"} or {"type":"table","domain":{...},"weights":[...]}.
Distribution distribution_from_json(const nlohmann::json& j);

/// Sum over leaves of value * normalized leaf mass. Throws ValidationError on
/// zero total mass.
ValueVector weighted_average(const Subdivision& sub, const Distribution& dist);

// ---------------------------------------------------------------------------
// Cost models

enum class Combinator { Sequential, Parallel };

struct UnitCost {
  std::string name;
  double cost = 0.0;
  std::string units;
};

/// Per-operation unit costs combined as sum_i t_i f_i (sequential) or
/// max_i t_i f_i (parallel).
struct CostModel {
  std::vector<UnitCost> unit_costs;
  Combinator combinator = Combinator::Sequential;

  void validate() const;
  double apply(std::span<const double> counts) const;
};

/// Rendering model with per-polygon and per-occlusion-test costs in ms,
/// measured 4e-6 ms per polygon and 0.052 ms per test.
CostModel default_render_cost_model(Combinator combinator = Combinator::Sequential);

CostModel cost_model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CostModel& model);

/// Predicted-cost subdivision from one scalar counting subdivision per unit
/// cost, on their common refinement.
Subdivision cost_estimate(std::span<const Subdivision> counts, const CostModel& model);

// ---------------------------------------------------------------------------
// Selection

/// Viewing cone for direction-resolved values (four sides: E, N, W, S).
struct View {
  double direction_deg = 0.0;
  double fov_deg = 90.0;
};

/// Weight of each side's 90 degree sector (E centered at 0 degrees, then N, W,
/// S counterclockwise) in the view cone: angular overlap / fov.
std::array<double, 4> view_weights(const View& view);

/// Side values interpolated by view_weights. Requires arity 4.
double evaluate_view(const Subdivision& sub, const GridPoint& p, const View& view);

/// Scalar subdivision of view-interpolated side values, same leaves.
Subdivision resolve_view(const Subdivision& sub, const View& view);

/// Index of the candidate with the smallest value at p (scalar candidates, or
/// 4-sided candidates resolved through `view`). Ties go to the lowest index.
std::pair<std::size_t, double> select(std::span<const Subdivision> candidates, const GridPoint& p,
                                      const std::optional<View>& view = std::nullopt);

/// Common refinement labeled with the argmin candidate index per leaf.
Subdivision selection_map(std::span<const Subdivision> candidates);

// ---------------------------------------------------------------------------
// Parameter optimization

struct SweepResult {
  double best_parameter = 0.0;
  /// (parameter, averaged scalar value), input order.
  std::vector<std::pair<double, double>> table;
};

/// Average of each scalar subdivision under dist; argmin with ties to the
/// smaller parameter.
SweepResult parameter_sweep(std::span<const std::pair<double, Subdivision>> builds,
                            const Distribution& dist);

struct ParameterProfile {
  std::size_t parameter_axis = 0;
  /// Extents of the remaining (input) axes, in axis order.
  IndexVec input_extents;
  /// Best parameter cell index per input cell, linear order over input axes.
  std::vector<Index> best;
  /// Value at the best parameter.
  std::vector<double> best_value;

  Index at(const IndexVec& input_cell) const;
};

/// For every input cell, the parameter cell index minimizing the scalar
/// subdivision along parameter_axis; ties to the lowest index.
ParameterProfile parameter_profile(const Subdivision& sub, std::size_t parameter_axis);

// ---------------------------------------------------------------------------
// Quality

struct ErrorStats {
  double mean_abs_error = 0.0;
  double max_abs_error = 0.0;
  double rms_error = 0.0;
  double mean_value = 0.0;
  double exact_mean = 0.0;
  std::uint64_t cells = 0;
};

inline constexpr std::uint64_t kOracleCellLimit = 1'000'000;

/// Exhaustive comparison of the subdivision against f over every grid cell,
/// pooled over components. Throws ValidationError above kOracleCellLimit cells.
ErrorStats error_vs_oracle(const Subdivision& sub, const ProfileFunction& f);

/// "threshold,distinct_queries,...": header and row for quality tables.
std::string quality_csv_header();
std::string quality_csv_row(double threshold, const BuildReport& report, const ErrorStats& stats);

}  // namespace meshprof
