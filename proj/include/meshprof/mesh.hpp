#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "meshprof/domain.hpp"

namespace meshprof {

/// One measurement: m components, m fixed per subdivision.
using ValueVector = std::vector<double>;

/// Payload of a leaf: the constant value plus the statistics of the samples
/// that produced it. Leaves created by the analysis algebra carry samples = 0
/// and lo_seen = hi_seen = value.
struct LeafData {
  ValueVector value;
  std::uint64_t samples = 0;
  ValueVector lo_seen;
  ValueVector hi_seen;
  /// Single grid cell reached by splitting: the grid floor stopped refinement.
  bool saturated = false;
  /// Produced by a ratio with zero denominator.
  bool degenerate = false;

  static LeafData constant(ValueVector v) {
    LeafData d;
    d.lo_seen = v;
    d.hi_seen = v;
    d.value = std::move(v);
    return d;
  }

  bool operator==(const LeafData&) const = default;
};

struct Node {
  GridCuboid box;
  std::vector<Node> children;  // empty for leaves, else split(box)
  LeafData leaf;               // meaningful for leaves only

  bool is_leaf() const { return children.empty(); }
  bool operator==(const Node&) const = default;
};

struct LeafView {
  const GridCuboid& box;
  const LeafData& data;
  std::size_t depth;
};

/// Piecewise-constant function over a GridDomain stored as a 2^d-ary tree.
/// Immutable after construction; evaluation is reentrant.
class Subdivision {
public:
  /// Validates the tree: root box equals the domain, children are exactly
  /// split(parent), and every leaf value has `arity` finite components.
  Subdivision(GridDomain domain, std::size_t arity, Node root,
              nlohmann::json metadata = nlohmann::json::object());

  /// Single leaf covering the domain.
  static Subdivision constant(const GridDomain& domain, ValueVector value);

  const GridDomain& domain() const { return domain_; }
  std::size_t arity() const { return arity_; }
  const Node& root() const { return root_; }
  const nlohmann::json& metadata() const { return metadata_; }
  Subdivision with_metadata(nlohmann::json metadata) const;

  /// Descends to the leaf containing p. Throws ValidationError("out of domain").
  /// If `steps` is given it receives the number of internal nodes visited.
  const LeafData& locate(const GridPoint& p, std::size_t* steps = nullptr) const;
  const ValueVector& evaluate(const GridPoint& p, std::size_t* steps = nullptr) const {
    return locate(p, steps).value;
  }

  /// Depth-first leaf sequence in split order.
  std::vector<LeafView> leaves() const;
  void for_each_leaf(const std::function<void(const LeafView&)>& fn) const;

  std::size_t leaf_count() const;
  std::size_t depth() const;

  /// Componentwise extremes over leaf values.
  std::pair<ValueVector, ValueVector> min_max() const;

  bool operator==(const Subdivision& other) const {
    return domain_ == other.domain_ && arity_ == other.arity_ && root_ == other.root_;
  }

private:
  GridDomain domain_;
  std::size_t arity_;
  Node root_;
  nlohmann::json metadata_;
};

/// Depth bound for any subdivision of the cuboid: max over axes of
/// ceil(log2(extent)).
std::size_t max_depth(const GridCuboid& box);

nlohmann::json to_json(const Subdivision& sub);
/// Throws ParseError naming the JSON path of the first problem.
Subdivision subdivision_from_json(const nlohmann::json& doc);

/// Serialized text form (pretty-printed, trailing newline).
std::string dump(const Subdivision& sub);
Subdivision load_subdivision(const std::string& path);
void save_subdivision(const Subdivision& sub, const std::string& path);

}  // namespace meshprof
