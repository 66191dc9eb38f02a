#pragma once

// Tree-based item hierarchies: canonical aggregation matrices, depth/height,
// top-heavy and bottom-heavy weightings, and the share-based / bottom-up
// reference reconcilers those weightings converge to.

#include <cmath>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "recon/sparse_core.hpp"

namespace recon {

/// One aggregation constraint  y_parent - sum_{c in children} y_c = 0.
struct HierarchyConstraint {
  Index parent = 0;
  std::vector<Index> children;

  bool operator==(const HierarchyConstraint&) const = default;
};

struct DepthHeightTable {
  std::vector<int> depth;
  std::vector<int> height;
  int max_depth = 0;
};

/// Items indexed in construction order; constraints sorted by decreasing
/// parent height (stable by parent index). Every item is a child in at most
/// one constraint and no item is its own ancestor. Forests are allowed.
class Hierarchy {
 public:
  Hierarchy() = default;

  /// Throws InvalidInput on out-of-range indices, repeated parents of an item,
  /// or a cycle (the message lists the items on the cycle).
  Hierarchy(std::vector<std::string> items, std::vector<HierarchyConstraint> constraints);

  /// One constraint per distinct parent, items in order of first appearance.
  static Hierarchy from_edges(const std::vector<std::pair<std::string, std::string>>& edges);

  Index size() const noexcept { return static_cast<Index>(items_.size()); }
  const std::vector<std::string>& items() const noexcept { return items_; }
  const std::vector<HierarchyConstraint>& constraints() const noexcept { return constraints_; }

  /// Each parent aggregates exactly one child set.
  bool strict() const noexcept { return strict_; }

  std::optional<Index> parent_of(Index item) const;
  std::optional<Index> index_of(const std::string& label) const;

 private:
  std::vector<std::string> items_;
  std::vector<HierarchyConstraint> constraints_;
  std::vector<Index> parent_;
  bool strict_ = true;
};

/// D(root) = 0, D(child) = D(parent) + 1, H(n) = D_max - D(n) with D_max global.
DepthHeightTable compute_depth_height(const Hierarchy& h);

/// Reads `parent<TAB>child` lines; blank lines and lines starting with '#' are skipped.
Hierarchy parse_edge_list(std::istream& in, const std::string& source = "<stream>");
Hierarchy load_edge_list(const std::string& path);

/// Row k has +1 at p_k and -1 at each c in C_k.
template <typename Scalar = double>
SparseConstraintMatrix<Scalar> canonical_matrix(const Hierarchy& h) {
  std::vector<typename SparseConstraintMatrix<Scalar>::Triplet> triplets;
  const auto& cons = h.constraints();
  for (std::size_t k = 0; k < cons.size(); ++k) {
    triplets.emplace_back(static_cast<int>(k), static_cast<int>(cons[k].parent), Scalar(1));
    for (const Index c : cons[k].children) {
      triplets.emplace_back(static_cast<int>(k), static_cast<int>(c), Scalar(-1));
    }
  }
  return SparseConstraintMatrix<Scalar>::from_triplets(static_cast<Index>(cons.size()), h.size(),
                                                       triplets);
}

enum class HeavyMode { top, bottom };

/// w_n = M^H(n) / yhat_n (top) or M^D(n) / yhat_n (bottom).
template <typename Scalar>
DiagonalWeights<Scalar> heavy_weights(const Hierarchy& h,
                                      const VectorRef<Scalar>& forecast, Scalar m,
                                      HeavyMode mode) {
  if (forecast.size() != h.size()) throw DimensionError("heavy_weights: forecast length mismatch");
  if (!(m >= Scalar(1))) throw InvalidInput("heavy_weights: M must be >= 1");
  const auto table = compute_depth_height(h);
  Vector<Scalar> w(h.size());
  for (Index n = 0; n < h.size(); ++n) {
    if (!(forecast[n] > Scalar(0))) {
      throw InvalidInput("heavy_weights: forecast " + std::to_string(n) + " must be positive");
    }
    const int exponent = mode == HeavyMode::top ? table.height[static_cast<std::size_t>(n)]
                                                : table.depth[static_cast<std::size_t>(n)];
    const Scalar value = std::pow(m, static_cast<Scalar>(exponent)) / forecast[n];
    if (!std::isfinite(static_cast<double>(value)) || !(value > Scalar(0))) {
      throw InvalidInput("heavy_weights: M^" + std::to_string(exponent) +
                         " overflows the floating-point range; use a smaller M");
    }
    w[n] = value;
  }
  return DiagonalWeights<Scalar>(std::move(w));
}

/// Top-level items keep yhat; each child set splits its parent's value in
/// proportion to the children's forecasts.
template <typename Scalar = double>
ForecastVector<Scalar> share_based_disaggregate(const Hierarchy& h,
                                                const VectorRef<Scalar>& forecast) {
  if (forecast.size() != h.size()) {
    throw DimensionError("share_based_disaggregate: forecast length mismatch");
  }
  if (forecast.size() > 0 && !(forecast.minCoeff() > Scalar(0))) {
    throw InvalidInput("share_based_disaggregate: forecasts must be positive");
  }
  Vector<Scalar> y = forecast;
  // Constraints are height-ordered, so a parent is final before its children are set.
  for (const auto& c : h.constraints()) {
    Scalar total = Scalar(0);
    for (const Index s : c.children) total += forecast[s];
    if (!(total > Scalar(0))) {
      throw InvalidInput("share_based_disaggregate: children of item " +
                         std::to_string(c.parent) + " sum to zero");
    }
    for (const Index s : c.children) y[s] = forecast[s] / total * y[c.parent];
  }
  return ForecastVector<Scalar>(std::move(y));
}

/// Items that are not parents keep yhat; every parent becomes the sum of its children.
template <typename Scalar = double>
ForecastVector<Scalar> bottom_up_aggregate(const Hierarchy& h,
                                           const VectorRef<Scalar>& forecast) {
  if (forecast.size() != h.size()) {
    throw DimensionError("bottom_up_aggregate: forecast length mismatch");
  }
  if (!h.strict()) {
    throw InvalidInput("bottom_up_aggregate: hierarchy is not strict; an item aggregates "
                       "more than one child set");
  }
  Vector<Scalar> y = forecast;
  const auto& cons = h.constraints();
  for (auto it = cons.rbegin(); it != cons.rend(); ++it) {
    Scalar total = Scalar(0);
    for (const Index c : it->children) total += y[c];
    y[it->parent] = total;
  }
  return ForecastVector<Scalar>(std::move(y));
}

}  // namespace recon
