#include "recon/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace recon {

SyntheticInstance make_grid_instance(const GridParams& params) {
  if (params.blocks < 1 || params.rows < 1 || params.cols < 1) {
    throw InvalidInput("grid instance needs at least one block, row and column");
  }
  if (!(params.noise >= 0.0) || !(params.noise < 1.0)) {
    throw InvalidInput("grid instance noise must lie in [0, 1)");
  }
  const Index r = params.rows;
  const Index c = params.cols;
  const Index per_block = r * c + r + c + 1;
  const Index n = params.items();
  const Index k = params.constraints();

  std::mt19937_64 rng(params.seed);
  std::lognormal_distribution<double> leaf(std::log(100.0), params.log_sigma);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  SyntheticInstance inst;
  inst.truth = Vector<double>::Zero(n);
  std::vector<SparseConstraintMatrix<double>::Triplet> triplets;
  triplets.reserve(static_cast<std::size_t>(params.blocks * (3 * r * c + 2 * r + c + 2)));

  for (Index b = 0; b < params.blocks; ++b) {
    const Index base = b * per_block;
    const Index leaves = base;
    const Index row_tot = base + r * c;
    const Index col_tot = row_tot + r;
    const Index total = col_tot + c;
    const int row0 = static_cast<int>(b * (r + c + 1));

    for (Index i = 0; i < r; ++i) {
      for (Index j = 0; j < c; ++j) inst.truth[leaves + i * c + j] = leaf(rng);
    }
    for (Index i = 0; i < r; ++i) {
      const int row = row0 + static_cast<int>(i);
      triplets.emplace_back(row, static_cast<int>(row_tot + i), 1.0);
      double sum = 0.0;
      for (Index j = 0; j < c; ++j) {
        triplets.emplace_back(row, static_cast<int>(leaves + i * c + j), -1.0);
        sum += inst.truth[leaves + i * c + j];
      }
      inst.truth[row_tot + i] = sum;
    }
    for (Index j = 0; j < c; ++j) {
      const int row = row0 + static_cast<int>(r + j);
      triplets.emplace_back(row, static_cast<int>(col_tot + j), 1.0);
      double sum = 0.0;
      for (Index i = 0; i < r; ++i) {
        triplets.emplace_back(row, static_cast<int>(leaves + i * c + j), -1.0);
        sum += inst.truth[leaves + i * c + j];
      }
      inst.truth[col_tot + j] = sum;
    }
    const int row = row0 + static_cast<int>(r + c);
    triplets.emplace_back(row, static_cast<int>(total), 1.0);
    double sum = 0.0;
    for (Index i = 0; i < r; ++i) {
      triplets.emplace_back(row, static_cast<int>(row_tot + i), -1.0);
      sum += inst.truth[row_tot + i];
    }
    inst.truth[total] = sum;
  }
  inst.a = SparseConstraintMatrix<double>::from_triplets(k, n, triplets);
  inst.forecast.resize(n);
  for (Index i = 0; i < n; ++i) inst.forecast[i] = inst.truth[i] * (1.0 + params.noise * unit(rng));
  return inst;
}

GridParams grid_params_for_size(Index target_items, double noise, std::uint64_t seed) {
  if (target_items < 4) throw InvalidInput("grid instance size must be at least 4");
  GridParams p;
  const auto side = static_cast<Index>(std::floor(std::sqrt(static_cast<double>(target_items))));
  p.rows = p.cols = std::clamp<Index>(side - 1, 1, 200);
  const Index per_block = p.rows * p.cols + p.rows + p.cols + 1;
  p.blocks = std::max<Index>(1, (target_items + per_block / 2) / per_block);
  p.noise = noise;
  p.seed = seed;
  return p;
}

Hierarchy random_tree_hierarchy(std::mt19937_64& rng, Index max_items, int max_depth,
                                bool strict) {
  if (max_items < 2 || max_depth < 1) {
    throw InvalidInput("random tree needs at least two items and depth one");
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> fanout(1, 3);
  const int roots = (max_items >= 6 && unit(rng) < 0.3) ? 2 : 1;

  std::vector<std::string> items;
  std::vector<HierarchyConstraint> constraints;
  std::deque<std::pair<Index, int>> queue;
  auto add_item = [&](int depth) {
    const auto id = static_cast<Index>(items.size());
    items.push_back("n" + std::to_string(id));
    queue.emplace_back(id, depth);
    return id;
  };
  for (int i = 0; i < roots; ++i) add_item(0);

  while (!queue.empty()) {
    const auto [item, depth] = queue.front();
    queue.pop_front();
    if (depth >= max_depth) continue;
    if (depth > 0 && unit(rng) < 0.35) continue;
    const int sets = (!strict && unit(rng) < 0.4) ? 2 : 1;
    for (int s = 0; s < sets; ++s) {
      const int count = fanout(rng) + (sets == 1 ? 1 : 0);
      if (static_cast<Index>(items.size()) + count > max_items) break;
      HierarchyConstraint con{item, {}};
      for (int j = 0; j < count; ++j) con.children.push_back(add_item(depth + 1));
      constraints.push_back(std::move(con));
    }
  }
  if (constraints.empty()) {
    // The root always expands unless max_items leaves no room; add one child.
    constraints.push_back({0, {add_item(1)}});
  }
  return Hierarchy(std::move(items), std::move(constraints));
}

GeneratedFixture generate_fixture(const GenParams& params) {
  if (params.levels < 2) throw InvalidInput("gen: levels must be at least 2");
  if (params.branching < 1) throw InvalidInput("gen: branching must be at least 1");
  if (!(params.noise >= 0.0) || !std::isfinite(params.noise)) {
    throw InvalidInput("gen: noise must be a finite nonnegative number");
  }
  if (std::pow(static_cast<double>(params.branching), params.levels - 1) > 1e7) {
    throw InvalidInput("gen: levels and branching produce more than 1e7 leaves");
  }

  // Level-order node numbering; node i at level d has path labels cached.
  std::vector<std::vector<Index>> level_nodes(static_cast<std::size_t>(params.levels));
  std::vector<std::vector<std::string>> paths;
  std::vector<std::string> names;
  std::vector<HierarchyConstraint> constraints;
  names.push_back("total");
  paths.push_back({"total"});
  level_nodes[0].push_back(0);
  for (int d = 1; d < params.levels; ++d) {
    for (const Index parent : level_nodes[static_cast<std::size_t>(d - 1)]) {
      HierarchyConstraint con{parent, {}};
      for (int j = 0; j < params.branching; ++j) {
        const auto id = static_cast<Index>(names.size());
        auto path = paths[static_cast<std::size_t>(parent)];
        const std::string label = parent == 0 ? "g" + std::to_string(j)
                                      : names[static_cast<std::size_t>(parent)] + "." +
                                            std::to_string(j);
        path.push_back(label);
        names.push_back(label);
        paths.push_back(std::move(path));
        level_nodes[static_cast<std::size_t>(d)].push_back(id);
        con.children.push_back(id);
      }
      constraints.push_back(std::move(con));
    }
  }

  GeneratedFixture fx;
  const auto n = static_cast<Index>(names.size());
  fx.truth = Vector<double>::Zero(n);
  std::mt19937_64 rng(params.seed);
  std::lognormal_distribution<double> leaf(std::log(100.0), 1.0);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (const Index id : level_nodes.back()) fx.truth[id] = leaf(rng);
  for (auto it = constraints.rbegin(); it != constraints.rend(); ++it) {
    double sum = 0.0;
    for (const Index c : it->children) sum += fx.truth[c];
    fx.truth[it->parent] = sum;
  }

  std::vector<std::string> columns;
  for (int d = 0; d < params.levels; ++d) {
    columns.push_back("level" + std::to_string(d));
    TabularDataset ds;
    ds.name = "level" + std::to_string(d);
    ds.dimension_columns = columns;
    ds.metric_column = "forecast";
    std::vector<double> actual;
    for (const Index id : level_nodes[static_cast<std::size_t>(d)]) {
      TabularDataset::Row row;
      row.dimensions = paths[static_cast<std::size_t>(id)];
      const double t = fx.truth[id];
      row.metric = params.noise == 0.0 ? t : std::max(0.0, t * (1.0 + params.noise * unit(rng)));
      ds.rows.push_back(std::move(row));
      actual.push_back(t);
    }
    fx.datasets.push_back(std::move(ds));
    fx.actuals.push_back(std::move(actual));
  }
  fx.hierarchy = Hierarchy(std::move(names), std::move(constraints));
  return fx;
}

}  // namespace recon
