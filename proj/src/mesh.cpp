#include "meshprof/mesh.hpp"

#include <algorithm>
#include <cmath>

#include "json_util.hpp"
#include "meshprof/error.hpp"
#include "meshprof/io.hpp"

namespace meshprof {
namespace {

constexpr const char* kFormat = "meshprof-subdivision";
constexpr int kVersion = 1;

void validate_node(const Node& node, std::size_t arity) {
  if (node.is_leaf()) {
    if (node.leaf.value.size() != arity)
      throw ValidationError("leaf " + node.box.to_string() + " has arity " +
                            std::to_string(node.leaf.value.size()) + ", expected " +
                            std::to_string(arity));
    for (double v : node.leaf.value)
      if (!std::isfinite(v))
        throw ValidationError("leaf " + node.box.to_string() + " has a non-finite value");
    return;
  }
  const auto expected = split(node.box);
  if (expected.size() != node.children.size())
    throw ValidationError("node " + node.box.to_string() + " has " +
                          std::to_string(node.children.size()) + " children, split gives " +
                          std::to_string(expected.size()));
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (!(node.children[i].box == expected[i]))
      throw ValidationError("child " + std::to_string(i) + " of " + node.box.to_string() +
                            " is not the split cuboid " + expected[i].to_string());
    validate_node(node.children[i], arity);
  }
}

void collect(const Node& node, std::size_t depth, const std::function<void(const LeafView&)>& fn) {
  if (node.is_leaf()) {
    fn(LeafView{node.box, node.leaf, depth});
    return;
  }
  for (const auto& child : node.children) collect(child, depth + 1, fn);
}

std::size_t node_depth(const Node& node) {
  std::size_t d = 0;
  for (const auto& child : node.children) d = std::max(d, 1 + node_depth(child));
  return d;
}

nlohmann::json node_to_json(const Node& node) {
  nlohmann::json j;
  j["box"] = cuboid_to_json(node.box);
  if (!node.is_leaf()) {
    auto& children = j["children"] = nlohmann::json::array();
    for (const auto& child : node.children) children.push_back(node_to_json(child));
    return j;
  }
  j["value"] = node.leaf.value;
  j["samples"] = node.leaf.samples;
  j["lo_seen"] = node.leaf.lo_seen;
  j["hi_seen"] = node.leaf.hi_seen;
  if (node.leaf.saturated) j["saturated"] = true;
  if (node.leaf.degenerate) j["degenerate"] = true;
  return j;
}

bool optional_flag(const nlohmann::json& j, const std::string& path, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) return false;
  if (!it->is_boolean()) throw ParseError(detail::join_path(path, key), "expected a boolean");
  return it->get<bool>();
}

Node node_from_json(const nlohmann::json& j, const std::string& path, std::size_t arity) {
  using namespace detail;
  Node node;
  node.box = cuboid_from_json(member(j, path, "box"), join_path(path, "box"));
  if (auto it = j.find("children"); it != j.end()) {
    const std::string cpath = join_path(path, "children");
    if (!it->is_array()) throw ParseError(cpath, "expected an array");
    if (node.box.cell_count() <= 1) throw ParseError(cpath, "single-cell box cannot have children");
    const auto expected = split(node.box);
    if (it->size() != expected.size())
      throw ParseError(cpath, "expected " + std::to_string(expected.size()) +
                                  " children (split arity), got " + std::to_string(it->size()));
    for (std::size_t i = 0; i < it->size(); ++i) {
      Node child = node_from_json((*it)[i], join_path(cpath, i), arity);
      if (!(child.box == expected[i]))
        throw ParseError(join_path(join_path(cpath, i), "box"),
                         "expected split cuboid " + expected[i].to_string());
      node.children.push_back(std::move(child));
    }
    return node;
  }
  auto& leaf = node.leaf;
  leaf.value = as_numbers(member(j, path, "value"), join_path(path, "value"));
  if (leaf.value.size() != arity)
    throw ParseError(join_path(path, "value"),
                     "expected " + std::to_string(arity) + " components");
  const auto& samples = member(j, path, "samples");
  if (!samples.is_number_unsigned())
    throw ParseError(join_path(path, "samples"), "expected a nonnegative integer");
  leaf.samples = samples.get<std::uint64_t>();
  leaf.lo_seen = as_numbers(member(j, path, "lo_seen"), join_path(path, "lo_seen"));
  leaf.hi_seen = as_numbers(member(j, path, "hi_seen"), join_path(path, "hi_seen"));
  if (leaf.lo_seen.size() != arity || leaf.hi_seen.size() != arity)
    throw ParseError(path, "lo_seen/hi_seen arity mismatch");
  leaf.saturated = optional_flag(j, path, "saturated");
  leaf.degenerate = optional_flag(j, path, "degenerate");
  return node;
}

}  // namespace

Subdivision::Subdivision(GridDomain domain, std::size_t arity, Node root, nlohmann::json metadata)
    : domain_(std::move(domain)),
      arity_(arity),
      root_(std::move(root)),
      metadata_(std::move(metadata)) {
  if (arity_ == 0) throw ValidationError("subdivision: value arity must be >= 1");
  if (!(root_.box == domain_.cuboid()))
    throw ValidationError("subdivision: root box " + root_.box.to_string() +
                          " does not match the domain " + domain_.cuboid().to_string());
  validate_node(root_, arity_);
}

Subdivision Subdivision::constant(const GridDomain& domain, ValueVector value) {
  Node root{domain.cuboid(), {}, LeafData::constant(value)};
  const auto m = value.size();
  return Subdivision(domain, m, std::move(root));
}

Subdivision Subdivision::with_metadata(nlohmann::json metadata) const {
  Subdivision copy = *this;
  copy.metadata_ = std::move(metadata);
  return copy;
}

const LeafData& Subdivision::locate(const GridPoint& p, std::size_t* steps) const {
  if (!domain_.contains(p)) throw ValidationError("out of domain");
  const Node* node = &root_;
  std::size_t n = 0;
  while (!node->is_leaf()) {
    node = &node->children[child_slot(node->box, p)];
    ++n;
  }
  if (steps) *steps = n;
  return node->leaf;
}

std::vector<LeafView> Subdivision::leaves() const {
  std::vector<LeafView> out;
  for_each_leaf([&](const LeafView& v) { out.push_back(v); });
  return out;
}

void Subdivision::for_each_leaf(const std::function<void(const LeafView&)>& fn) const {
  collect(root_, 0, fn);
}

std::size_t Subdivision::leaf_count() const {
  std::size_t n = 0;
  for_each_leaf([&](const LeafView&) { ++n; });
  return n;
}

std::size_t Subdivision::depth() const { return node_depth(root_); }

std::pair<ValueVector, ValueVector> Subdivision::min_max() const {
  ValueVector lo(arity_, std::numeric_limits<double>::infinity());
  ValueVector hi(arity_, -std::numeric_limits<double>::infinity());
  for_each_leaf([&](const LeafView& leaf) {
    for (std::size_t j = 0; j < arity_; ++j) {
      lo[j] = std::min(lo[j], leaf.data.value[j]);
      hi[j] = std::max(hi[j], leaf.data.value[j]);
    }
  });
  return {lo, hi};
}

std::size_t max_depth(const GridCuboid& box) {
  std::size_t depth = 0;
  for (std::size_t a = 0; a < box.dims(); ++a) {
    std::size_t bits = 0;
    while ((Index{1} << bits) < box.extent(a)) ++bits;
    depth = std::max(depth, bits);
  }
  return depth;
}

nlohmann::json to_json(const Subdivision& sub) {
  nlohmann::json doc;
  doc["format"] = kFormat;
  doc["version"] = kVersion;
  doc["domain"] = sub.domain();
  doc["value_arity"] = sub.arity();
  doc["metadata"] = sub.metadata();
  doc["root"] = node_to_json(sub.root());
  return doc;
}

Subdivision subdivision_from_json(const nlohmann::json& doc) {
  using namespace detail;
  if (!doc.is_object()) throw ParseError("/", "expected an object");
  if (auto it = doc.find("format"); it != doc.end() && *it != kFormat)
    throw ParseError("/format", "unknown format");
  const GridDomain domain = domain_from_json(member(doc, "", "domain"), "/domain");
  const auto arity = as_integer(member(doc, "", "value_arity"), "/value_arity");
  if (arity < 1) throw ParseError("/value_arity", "must be >= 1");
  nlohmann::json metadata = nlohmann::json::object();
  if (auto it = doc.find("metadata"); it != doc.end()) metadata = *it;
  Node root = node_from_json(member(doc, "", "root"), "/root", static_cast<std::size_t>(arity));
  if (!(root.box == domain.cuboid()))
    throw ParseError("/root/box", "root box does not cover the domain");
  return Subdivision(domain, static_cast<std::size_t>(arity), std::move(root), std::move(metadata));
}

std::string dump(const Subdivision& sub) { return to_json(sub).dump(1) + "\n"; }

Subdivision load_subdivision(const std::string& path) {
  const std::string text = read_file(path);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("/", std::string("invalid JSON in ") + path + ": " + e.what());
  }
  return subdivision_from_json(doc);
}

void save_subdivision(const Subdivision& sub, const std::string& path) {
  write_file_atomic(path, dump(sub));
}

}  // namespace meshprof
