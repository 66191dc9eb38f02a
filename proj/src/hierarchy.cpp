#include "recon/hierarchy.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <unordered_map>

namespace recon {
namespace {

// Depth of every item from a parent array, one walk per item with memoization.
DepthHeightTable depth_height_from_parents(const std::vector<Index>& parent,
                                           const std::vector<std::string>& labels) {
  const std::size_t n = parent.size();
  DepthHeightTable table;
  table.depth.assign(n, -1);
  std::vector<char> on_path(n, 0);
  std::vector<Index> path;
  for (std::size_t start = 0; start < n; ++start) {
    if (table.depth[start] >= 0) continue;
    path.clear();
    Index cur = static_cast<Index>(start);
    while (cur >= 0 && table.depth[static_cast<std::size_t>(cur)] < 0) {
      if (on_path[static_cast<std::size_t>(cur)]) {
        // The walk follows parent links; report the cycle parent-to-child.
        const auto first = std::find(path.begin(), path.end(), cur);
        std::string cycle = labels[static_cast<std::size_t>(cur)];
        for (auto it = path.end(); --it != first;) {
          cycle += " -> " + labels[static_cast<std::size_t>(*it)];
        }
        cycle += " -> " + labels[static_cast<std::size_t>(cur)];
        throw InvalidInput("hierarchy contains a cycle: " + cycle);
      }
      on_path[static_cast<std::size_t>(cur)] = 1;
      path.push_back(cur);
      cur = parent[static_cast<std::size_t>(cur)];
    }
    int d = cur < 0 ? -1 : table.depth[static_cast<std::size_t>(cur)];
    for (auto it = path.rbegin(); it != path.rend(); ++it) {
      table.depth[static_cast<std::size_t>(*it)] = ++d;
      on_path[static_cast<std::size_t>(*it)] = 0;
    }
  }
  table.max_depth = n ? *std::max_element(table.depth.begin(), table.depth.end()) : 0;
  table.height.resize(n);
  for (std::size_t i = 0; i < n; ++i) table.height[i] = table.max_depth - table.depth[i];
  return table;
}

}  // namespace

Hierarchy::Hierarchy(std::vector<std::string> items, std::vector<HierarchyConstraint> constraints)
    : items_(std::move(items)), constraints_(std::move(constraints)) {
  const Index n = size();
  parent_.assign(static_cast<std::size_t>(n), -1);
  std::vector<int> times_parent(static_cast<std::size_t>(n), 0);
  for (const auto& c : constraints_) {
    if (c.parent < 0 || c.parent >= n) throw InvalidInput("constraint parent index out of range");
    if (c.children.empty()) {
      throw InvalidInput("constraint for '" + items_[static_cast<std::size_t>(c.parent)] +
                         "' has no children");
    }
    ++times_parent[static_cast<std::size_t>(c.parent)];
    for (const Index child : c.children) {
      if (child < 0 || child >= n) throw InvalidInput("constraint child index out of range");
      if (child == c.parent) {
        throw InvalidInput("hierarchy contains a cycle: " +
                           items_[static_cast<std::size_t>(child)] + " -> " +
                           items_[static_cast<std::size_t>(child)]);
      }
      auto& p = parent_[static_cast<std::size_t>(child)];
      if (p >= 0) {
        throw InvalidInput("item '" + items_[static_cast<std::size_t>(child)] +
                           "' has more than one parent");
      }
      p = c.parent;
    }
  }
  strict_ = std::all_of(times_parent.begin(), times_parent.end(), [](int t) { return t <= 1; });

  const auto table = depth_height_from_parents(parent_, items_);
  for (auto& c : constraints_) std::sort(c.children.begin(), c.children.end());
  std::stable_sort(constraints_.begin(), constraints_.end(),
                   [&table](const HierarchyConstraint& a, const HierarchyConstraint& b) {
                     const int ha = table.height[static_cast<std::size_t>(a.parent)];
                     const int hb = table.height[static_cast<std::size_t>(b.parent)];
                     if (ha != hb) return ha > hb;
                     return a.parent < b.parent;
                   });
}

Hierarchy Hierarchy::from_edges(const std::vector<std::pair<std::string, std::string>>& edges) {
  std::vector<std::string> items;
  std::unordered_map<std::string, Index> index;
  auto intern = [&](const std::string& label) {
    auto [it, inserted] = index.emplace(label, static_cast<Index>(items.size()));
    if (inserted) items.push_back(label);
    return it->second;
  };
  std::vector<HierarchyConstraint> constraints;
  std::unordered_map<Index, std::size_t> constraint_of;
  for (const auto& [parent_label, child_label] : edges) {
    const Index p = intern(parent_label);
    const Index c = intern(child_label);
    auto [it, inserted] = constraint_of.emplace(p, constraints.size());
    if (inserted) constraints.push_back({p, {}});
    auto& children = constraints[it->second].children;
    if (std::find(children.begin(), children.end(), c) != children.end()) {
      throw InvalidInput("duplicate edge " + parent_label + " -> " + child_label);
    }
    children.push_back(c);
  }
  return Hierarchy(std::move(items), std::move(constraints));
}

std::optional<Index> Hierarchy::parent_of(Index item) const {
  const Index p = parent_.at(static_cast<std::size_t>(item));
  if (p < 0) return std::nullopt;
  return p;
}

std::optional<Index> Hierarchy::index_of(const std::string& label) const {
  auto it = std::find(items_.begin(), items_.end(), label);
  if (it == items_.end()) return std::nullopt;
  return static_cast<Index>(it - items_.begin());
}

DepthHeightTable compute_depth_height(const Hierarchy& h) {
  std::vector<Index> parent(static_cast<std::size_t>(h.size()), -1);
  for (const auto& c : h.constraints()) {
    for (const Index child : c.children) parent[static_cast<std::size_t>(child)] = c.parent;
  }
  return depth_height_from_parents(parent, h.items());
}

Hierarchy parse_edge_list(std::istream& in, const std::string& source) {
  std::vector<std::pair<std::string, std::string>> edges;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos || tab == 0 ||
        tab + 1 == line.size()) {
      throw ParseError(source + ":" + std::to_string(line_no) +
                       ": expected exactly one 'parent<TAB>child' pair");
    }
    edges.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  try {
    return Hierarchy::from_edges(edges);
  } catch (const InvalidInput& e) {
    throw InvalidInput(source + ": " + e.what());
  }
}

Hierarchy load_edge_list(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open hierarchy file '" + path + "'");
  return parse_edge_list(in, path);
}

}  // namespace recon
