#include "recon/constraint_builder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <unordered_set>

namespace recon {
namespace {

std::string join_tuple(const std::vector<std::string>& names,
                       const std::vector<std::string>& labels) {
  std::string out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (i) out += '|';
    if (i < names.size()) out += names[i] + '=';
    out += labels[i];
  }
  return out;
}

std::vector<std::size_t> column_positions(const TabularDataset& d,
                                          const std::vector<std::string>& names) {
  std::vector<std::size_t> pos;
  for (const auto& name : names) {
    auto it = std::find(d.dimension_columns.begin(), d.dimension_columns.end(), name);
    pos.push_back(static_cast<std::size_t>(it - d.dimension_columns.begin()));
  }
  return pos;
}

void require_valid(const TabularDataset& d) {
  for (const auto& v : validate_dataset(d)) {
    if (v.severity == Violation::Severity::error) throw InvalidInput(v.message);
  }
}

using SparseRow = std::vector<std::pair<int, int>>;  // (column, +/-1), sorted by column

struct PairRows {
  std::vector<SparseRow> rows;
  std::vector<GroupKey> keys;
  std::vector<std::string> warnings;
};

PairRows pair_rows(const TabularDataset& first, const TabularDataset& second,
                   std::size_t first_index, std::size_t second_index, Index first_offset,
                   Index second_offset, const BuildOptions& options) {
  const auto shared = shared_dimensions(first, second);
  if (shared.empty()) {
    throw InvalidInput("datasets '" + first.name + "' and '" + second.name +
                       "' share no dimension columns");
  }
  const auto pos1 = column_positions(first, shared);
  const auto pos2 = column_positions(second, shared);

  struct Members {
    std::vector<int> first;
    std::vector<int> second;
  };
  std::map<std::vector<std::string>, Members> groups;
  auto key_of = [](const TabularDataset::Row& row, const std::vector<std::size_t>& pos) {
    std::vector<std::string> key;
    key.reserve(pos.size());
    for (const auto p : pos) key.push_back(row.dimensions[p]);
    return key;
  };
  for (std::size_t r = 0; r < first.rows.size(); ++r) {
    groups[key_of(first.rows[r], pos1)].first.push_back(static_cast<int>(first_offset) +
                                                        static_cast<int>(r));
  }
  for (std::size_t r = 0; r < second.rows.size(); ++r) {
    groups[key_of(second.rows[r], pos2)].second.push_back(static_cast<int>(second_offset) +
                                                          static_cast<int>(r));
  }

  PairRows out;
  for (const auto& [key, members] : groups) {
    if (members.first.empty() || members.second.empty()) {
      const auto& present = members.first.empty() ? second.name : first.name;
      const auto& missing = members.first.empty() ? first.name : second.name;
      std::string msg = "group key " + join_tuple(shared, key) + " appears in '" + present +
                        "' but not in '" + missing + "'";
      if (options.strict) throw InvalidInput(msg);
      out.warnings.push_back(msg + "; constraint skipped");
      continue;
    }
    SparseRow row;
    for (const int c : members.first) row.emplace_back(c, 1);
    for (const int c : members.second) row.emplace_back(c, -1);
    std::sort(row.begin(), row.end());
    out.rows.push_back(std::move(row));
    out.keys.push_back({first_index, second_index, shared, key});
  }
  return out;
}

ForecastVector<double> stack_forecasts(const std::vector<const TabularDataset*>& datasets,
                                       std::vector<Index>& offsets) {
  Index n = 0;
  for (const auto* d : datasets) {
    offsets.push_back(n);
    n += static_cast<Index>(d->rows.size());
  }
  Vector<double> values(n);
  std::vector<EntryLabel> labels;
  labels.reserve(static_cast<std::size_t>(n));
  Index i = 0;
  for (const auto* d : datasets) {
    for (const auto& row : d->rows) {
      values[i++] = row.metric;
      labels.push_back({d->name, join_tuple(d->dimension_columns, row.dimensions)});
    }
  }
  return ForecastVector<double>(std::move(values), std::move(labels));
}

SparseConstraintMatrix<double>::Storage to_storage(const std::vector<SparseRow>& rows, Index n) {
  std::vector<SparseConstraintMatrix<double>::Triplet> triplets;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (const auto& [c, v] : rows[k]) {
      triplets.emplace_back(static_cast<int>(k), c, static_cast<double>(v));
    }
  }
  SparseConstraintMatrix<double>::Storage s(static_cast<Index>(rows.size()), n);
  s.setFromTriplets(triplets.begin(), triplets.end());
  s.makeCompressed();
  return s;
}

ConstraintBuildResult finish(std::vector<SparseRow> rows, std::vector<GroupKey> keys,
                             ForecastVector<double> forecast, std::vector<Index> offsets,
                             std::vector<std::string> warnings, std::vector<std::string> notes,
                             const BuildOptions& options) {
  ConstraintBuildResult result;
  const Index n = forecast.size();
  auto storage = to_storage(rows, n);
  if (options.drop_dependent) {
    std::vector<Index> dropped;
    result.a = drop_dependent_rows(storage, &dropped);
    for (const Index k : dropped) {
      notes.push_back("constraint " + keys[static_cast<std::size_t>(k)].to_string() +
                      " is implied by other constraints; dropped");
    }
    for (auto it = dropped.rbegin(); it != dropped.rend(); ++it) {
      keys.erase(keys.begin() + static_cast<std::ptrdiff_t>(*it));
    }
  } else {
    result.a = SparseConstraintMatrix<double>(std::move(storage));
  }
  result.group_keys = std::move(keys);
  result.forecast = std::move(forecast);
  result.offsets = std::move(offsets);
  result.warnings = std::move(warnings);
  result.notes = std::move(notes);
  return result;
}

}  // namespace

TabularDataset dataset_from_csv(const CsvTable& table, std::string name,
                                std::vector<std::string> dimension_columns,
                                std::string metric_column, const std::string& source) {
  const std::string where = source.empty() ? name : source;
  TabularDataset d;
  d.name = std::move(name);
  d.dimension_columns = std::move(dimension_columns);
  d.metric_column = std::move(metric_column);

  std::vector<std::size_t> dim_pos;
  for (const auto& col : d.dimension_columns) {
    const long p = table.column(col);
    if (p < 0) throw ParseError(where + ": dimension column '" + col + "' not found");
    dim_pos.push_back(static_cast<std::size_t>(p));
  }
  const long metric_pos = table.column(d.metric_column);
  if (metric_pos < 0) throw ParseError(where + ": metric column '" + d.metric_column + "' not found");

  d.rows.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& rec = table.rows[r];
    const std::string at =
        where + ":" + std::to_string(r < table.lines.size() ? table.lines[r] : r + 2);
    TabularDataset::Row row;
    for (std::size_t j = 0; j < dim_pos.size(); ++j) {
      const auto& label = rec[dim_pos[j]];
      if (label.empty()) {
        throw ParseError(at + ": empty label in dimension column '" + d.dimension_columns[j] +
                         "'");
      }
      row.dimensions.push_back(label);
    }
    const auto& text = rec[static_cast<std::size_t>(metric_pos)];
    if (!parse_number(text, row.metric)) {
      throw ParseError(at + ": metric '" + text + "' is not numeric");
    }
    if (!(row.metric >= 0.0) || !std::isfinite(row.metric)) {
      throw ParseError(at + ": metric " + text + " must be a finite nonnegative number");
    }
    d.rows.push_back(std::move(row));
  }
  return d;
}

std::vector<Violation> validate_dataset(const TabularDataset& d) {
  std::vector<Violation> out;
  auto error = [&out](std::string msg) {
    out.push_back({Violation::Severity::error, std::move(msg)});
  };
  std::unordered_set<std::string> names;
  for (const auto& c : d.dimension_columns) {
    if (!names.insert(c).second) error("dataset '" + d.name + "': duplicate column '" + c + "'");
  }
  if (names.count(d.metric_column)) {
    error("dataset '" + d.name + "': metric column '" + d.metric_column +
          "' is also a dimension column");
  }
  std::set<std::vector<std::string>> seen;
  for (std::size_t r = 0; r < d.rows.size(); ++r) {
    const auto& row = d.rows[r];
    if (row.dimensions.size() != d.dimension_columns.size()) {
      error("dataset '" + d.name + "': row " + std::to_string(r) + " has " +
            std::to_string(row.dimensions.size()) + " dimension labels, expected " +
            std::to_string(d.dimension_columns.size()));
      continue;
    }
    if (!seen.insert(row.dimensions).second) {
      error("dataset '" + d.name + "': duplicate dimension tuple (" +
            join_tuple(d.dimension_columns, row.dimensions) + ")");
    }
  }
  return out;
}

std::vector<std::string> shared_dimensions(const TabularDataset& first,
                                           const TabularDataset& second) {
  std::vector<std::string> out;
  for (const auto& c : first.dimension_columns) {
    if (std::find(second.dimension_columns.begin(), second.dimension_columns.end(), c) !=
        second.dimension_columns.end()) {
      out.push_back(c);
    }
  }
  return out;
}

std::string GroupKey::to_string() const {
  return "[" + std::to_string(first_dataset) + "~" + std::to_string(second_dataset) + "] " +
         join_tuple(dimensions, labels);
}

ConstraintBuildResult build_constraints(const TabularDataset& first, const TabularDataset& second,
                                        const BuildOptions& options) {
  require_valid(first);
  require_valid(second);
  std::vector<Index> offsets;
  auto forecast = stack_forecasts({&first, &second}, offsets);
  auto pr = pair_rows(first, second, 0, 1, offsets[0], offsets[1], options);
  BuildOptions pairwise = options;
  // Rows of one pair have disjoint supports and are independent already.
  pairwise.drop_dependent = false;
  return finish(std::move(pr.rows), std::move(pr.keys), std::move(forecast), std::move(offsets),
                std::move(pr.warnings), {}, pairwise);
}

ConstraintBuildResult build_constraints_multi(const std::vector<TabularDataset>& datasets,
                                              const BuildOptions& options) {
  if (datasets.size() < 2) throw InvalidInput("build_constraints_multi needs at least two datasets");
  std::vector<const TabularDataset*> ptrs;
  for (const auto& d : datasets) {
    require_valid(d);
    ptrs.push_back(&d);
  }
  std::vector<Index> offsets;
  auto forecast = stack_forecasts(ptrs, offsets);

  std::vector<SparseRow> rows;
  std::vector<GroupKey> keys;
  std::vector<std::string> warnings, notes;
  std::set<SparseRow> seen;
  // Pairs sharing more dimensions go first: their groups are finer, so the
  // coarser constraints a later pair implies are the ones dropped as dependent.
  struct Pair {
    std::size_t shared, i, j;
  };
  std::vector<Pair> pairs;
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    for (std::size_t j = i + 1; j < datasets.size(); ++j) {
      const auto shared = shared_dimensions(datasets[i], datasets[j]).size();
      if (shared) pairs.push_back({shared, i, j});
    }
  }
  if (pairs.empty()) throw InvalidInput("no pair of datasets shares a dimension column");
  std::stable_sort(pairs.begin(), pairs.end(),
                   [](const Pair& a, const Pair& b) { return a.shared > b.shared; });
  for (const auto& [shared, i, j] : pairs) {
    auto pr = pair_rows(datasets[i], datasets[j], i, j, offsets[i], offsets[j], options);
    for (auto& w : pr.warnings) warnings.push_back(std::move(w));
    for (std::size_t r = 0; r < pr.rows.size(); ++r) {
      // Negated rows encode the same constraint; compare in a sign-normalized form.
      SparseRow canonical = pr.rows[r];
      if (!canonical.empty() && canonical.front().second < 0) {
        for (auto& e : canonical) e.second = -e.second;
      }
      if (!seen.insert(canonical).second) {
        notes.push_back("constraint " + pr.keys[r].to_string() + " duplicates an earlier row; dropped");
        continue;
      }
      rows.push_back(std::move(pr.rows[r]));
      keys.push_back(std::move(pr.keys[r]));
    }
  }
  return finish(std::move(rows), std::move(keys), std::move(forecast), std::move(offsets),
                std::move(warnings), std::move(notes), options);
}

}  // namespace recon
