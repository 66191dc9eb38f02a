#pragma once

// Derives aggregation constraints from tabular forecast datasets by
// intersecting their dimension columns and grouping on the shared ones.

#include <string>
#include <vector>

#include "recon/csv.hpp"
#include "recon/sparse_core.hpp"

namespace recon {

struct TabularDataset {
  struct Row {
    std::vector<std::string> dimensions;  // one label per dimension column
    double metric = 0.0;
  };

  std::string name;
  std::vector<std::string> dimension_columns;
  std::string metric_column;
  std::vector<Row> rows;
};

/// Extracts a dataset from a parsed CSV. Missing columns, empty dimension
/// labels and non-numeric or negative metrics raise ParseError with the row's
/// line number.
TabularDataset dataset_from_csv(const CsvTable& table, std::string name,
                                std::vector<std::string> dimension_columns,
                                std::string metric_column, const std::string& source = "");

struct Violation {
  enum class Severity { warning, error };
  Severity severity = Severity::error;
  std::string message;
};

/// Column-name uniqueness, row width and uniqueness of dimension tuples.
std::vector<Violation> validate_dataset(const TabularDataset& d);

/// Dimension columns present in both datasets, in `first`'s order.
std::vector<std::string> shared_dimensions(const TabularDataset& first,
                                           const TabularDataset& second);

/// Shared-dimension labels behind one constraint row.
struct GroupKey {
  std::size_t first_dataset = 0;
  std::size_t second_dataset = 0;
  std::vector<std::string> dimensions;
  std::vector<std::string> labels;

  std::string to_string() const;
};

struct ConstraintBuildResult {
  SparseConstraintMatrix<double> a;
  /// Metrics of all datasets stacked in dataset order, then row order.
  ForecastVector<double> forecast;
  std::vector<GroupKey> group_keys;  // one per row of `a`
  /// Data problems, e.g. group keys present on one side of a pair only.
  std::vector<std::string> warnings;
  /// Rows removed as duplicates of, or implied by, other rows.
  std::vector<std::string> notes;
  /// Offset of each dataset's first row in `forecast`.
  std::vector<Index> offsets;
};

struct BuildOptions {
  /// Treat group keys present in only one dataset of a pair as errors.
  bool strict = false;
  /// Remove rows implied by earlier rows so that A has full row rank.
  bool drop_dependent = true;
};

/// One row per shared group key present in both datasets: +1 on the first
/// dataset's rows, -1 on the second's; rows sorted by key.
ConstraintBuildResult build_constraints(const TabularDataset& first, const TabularDataset& second,
                                        const BuildOptions& options = {});

/// Stacks the pairwise constraints of every dataset pair sharing a dimension
/// over one global indexing, removing duplicate (or negated) rows. Pairs are
/// visited by decreasing number of shared dimensions, then index order; with
/// `drop_dependent`, rows implied by earlier rows are removed as well.
ConstraintBuildResult build_constraints_multi(const std::vector<TabularDataset>& datasets,
                                              const BuildOptions& options = {});

}  // namespace recon
