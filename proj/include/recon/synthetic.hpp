#pragma once

// Seeded synthetic problems: cross-classified grid blocks for scale runs,
// random tree hierarchies, and tabular fixtures aggregated from a tree.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "recon/constraint_builder.hpp"
#include "recon/hierarchy.hpp"
#include "recon/sparse_core.hpp"

namespace recon {

struct SyntheticInstance {
  SparseConstraintMatrix<double> a;
  Vector<double> truth;
  Vector<double> forecast;
};

/// `blocks` independent blocks; each is an r x c grid of leaves with row
/// totals, column totals and a block total over the row totals, i.e. two
/// hierarchies sharing their leaves. Leaves are log-normal with spread
/// `log_sigma`; forecasts are truth * (1 + noise * U(-1, 1)).
struct GridParams {
  Index blocks = 1;
  Index rows = 10;
  Index cols = 10;
  double noise = 0.3;
  double log_sigma = 2.0;
  std::uint64_t seed = 0;

  Index items() const { return blocks * (rows * cols + rows + cols + 1); }
  Index constraints() const { return blocks * (rows + cols + 1); }
};

SyntheticInstance make_grid_instance(const GridParams& params);

/// Grid parameters whose item count is close to `target_items`.
GridParams grid_params_for_size(Index target_items, double noise, std::uint64_t seed);

/// Random forest with at most `max_items` items and depth at most
/// `max_depth`. Non-strict hierarchies split some parents' children into
/// two constraints.
Hierarchy random_tree_hierarchy(std::mt19937_64& rng, Index max_items, int max_depth,
                                bool strict);

struct GenParams {
  int levels = 3;
  int branching = 2;
  double noise = 0.0;
  std::uint64_t seed = 0;
};

/// Ground-truth tree aggregated into one dataset per level.
struct GeneratedFixture {
  Hierarchy hierarchy;
  Vector<double> truth;  // per hierarchy item
  /// Level d has dimension columns level0..level<d>, metric `forecast`.
  std::vector<TabularDataset> datasets;
  /// Ground truth of every dataset row, parallel to `datasets[i].rows`.
  std::vector<std::vector<double>> actuals;
};

GeneratedFixture generate_fixture(const GenParams& params);

}  // namespace recon
