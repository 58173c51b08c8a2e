#pragma once

#include <functional>

#include "meshprof/domain.hpp"
#include "meshprof/mesh.hpp"
#include "meshprof/random.hpp"

namespace meshprof::testing {

inline void for_each_point(const GridDomain& domain, const std::function<void(const GridPoint&)>& fn) {
  for (std::uint64_t i = 0; i < domain.cell_count(); ++i) fn(domain.point_at(i));
}

// Random tree with small integer leaf values, so sums stay exact.
inline Node random_node(const GridCuboid& box, Rng& rng, std::size_t arity, double split_prob,
                        int depth) {
  Node node{box, {}, {}};
  if (box.cell_count() > 1 && rng.uniform01() < split_prob / (1.0 + 0.3 * depth)) {
    for (const auto& child : split(box))
      node.children.push_back(random_node(child, rng, arity, split_prob, depth + 1));
    return node;
  }
  ValueVector v(arity);
  for (double& x : v) x = static_cast<double>(static_cast<int>(rng.below(41)) - 20);
  node.leaf = LeafData::constant(v);
  node.leaf.samples = 1;
  return node;
}

inline Subdivision random_tree(const GridDomain& domain, Rng& rng, std::size_t arity = 1,
                               double split_prob = 0.9) {
  return Subdivision(domain, arity, random_node(domain.cuboid(), rng, arity, split_prob, 0));
}

// Linear scan over leaves, independent of the descent in evaluate().
inline ValueVector scan_lookup(const Subdivision& sub, const GridPoint& p) {
  for (const auto& leaf : sub.leaves())
    if (leaf.box.contains(p)) return leaf.data.value;
  throw std::logic_error("no leaf contains point");
}

}  // namespace meshprof::testing
