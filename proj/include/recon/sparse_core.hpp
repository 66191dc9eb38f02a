#pragma once

// Sparse constraint storage, diagonal weights and the shared null-space
// projection kernel  y - W^-1 A^T (A W^-1 A^T)^-1 A y.

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "recon/errors.hpp"

namespace recon {

using Index = Eigen::Index;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Read-only vector argument; Scalar is taken from the other arguments.
template <typename Scalar>
using VectorRef = Eigen::Ref<const Vector<std::type_identity_t<Scalar>>>;

/// K x N aggregation matrix in compressed sparse row form.
///
/// Column indices are strictly increasing within a row and no explicit zeros
/// are stored. Entries are usually +1/-1, but row-equivalent representations
/// (E * A) are accepted; use `require_unit_entries` where canonical form is
/// expected.
template <typename Scalar = double>
class SparseConstraintMatrix {
 public:
  using Storage = Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int>;
  using Triplet = Eigen::Triplet<Scalar, int>;

  SparseConstraintMatrix() = default;

  /// Rows x cols matrix with no stored entries.
  SparseConstraintMatrix(Index rows, Index cols) : storage_(rows, cols) {
    check_shape(rows, cols);
    storage_.makeCompressed();
  }

  explicit SparseConstraintMatrix(Storage storage) : storage_(std::move(storage)) {
    check_shape(storage_.rows(), storage_.cols());
    storage_.prune(Scalar(0), Scalar(0));
    storage_.makeCompressed();
    for (Index k = 0; k < storage_.outerSize(); ++k) {
      for (typename Storage::InnerIterator it(storage_, k); it; ++it) {
        if (!std::isfinite(static_cast<double>(it.value()))) {
          throw InvalidInput("constraint matrix entry (" + std::to_string(k) + ", " +
                             std::to_string(it.col()) + ") is not finite");
        }
      }
    }
  }

  /// Duplicate coordinates are summed; entries that cancel to zero are dropped.
  static SparseConstraintMatrix from_triplets(Index rows, Index cols,
                                              const std::vector<Triplet>& triplets) {
    for (const auto& t : triplets) {
      if (t.row() < 0 || t.row() >= rows || t.col() < 0 || t.col() >= cols) {
        throw DimensionError("triplet (" + std::to_string(t.row()) + ", " +
                             std::to_string(t.col()) + ") outside " + std::to_string(rows) +
                             "x" + std::to_string(cols));
      }
    }
    check_shape(rows, cols);
    Storage s(rows, cols);
    s.setFromTriplets(triplets.begin(), triplets.end());
    return SparseConstraintMatrix(std::move(s));
  }

  /// Builds directly from CSR arrays, validating every structural invariant.
  static SparseConstraintMatrix from_csr(Index rows, Index cols, std::span<const int> row_offsets,
                                         std::span<const int> col_indices,
                                         std::span<const Scalar> values) {
    check_shape(rows, cols);
    if (static_cast<Index>(row_offsets.size()) != rows + 1) {
      throw InvalidInput("row_offsets must have length rows + 1");
    }
    if (col_indices.size() != values.size()) {
      throw InvalidInput("col_indices and values differ in length");
    }
    if (row_offsets.front() != 0 ||
        row_offsets.back() != static_cast<int>(col_indices.size())) {
      throw InvalidInput("row_offsets must start at 0 and end at nnz");
    }
    std::vector<Triplet> triplets;
    triplets.reserve(values.size());
    for (Index k = 0; k < rows; ++k) {
      if (row_offsets[k + 1] < row_offsets[k]) {
        throw InvalidInput("row_offsets decreases at row " + std::to_string(k));
      }
      for (int p = row_offsets[k]; p < row_offsets[k + 1]; ++p) {
        if (col_indices[p] < 0 || col_indices[p] >= cols) {
          throw DimensionError("column index out of range in row " + std::to_string(k));
        }
        if (p > row_offsets[k] && col_indices[p] <= col_indices[p - 1]) {
          throw InvalidInput("column indices not strictly increasing in row " +
                             std::to_string(k));
        }
        if (values[p] == Scalar(0)) {
          throw InvalidInput("explicit zero stored in row " + std::to_string(k));
        }
        triplets.emplace_back(static_cast<int>(k), col_indices[p], values[p]);
      }
    }
    return from_triplets(rows, cols, triplets);
  }

  static SparseConstraintMatrix from_dense(const DenseMatrix<Scalar>& dense) {
    return SparseConstraintMatrix(Storage(dense.sparseView()));
  }

  Index rows() const noexcept { return storage_.rows(); }
  Index cols() const noexcept { return storage_.cols(); }
  Index nonZeros() const noexcept { return storage_.nonZeros(); }

  const Storage& storage() const noexcept { return storage_; }

  std::span<const int> row_offsets() const {
    return {storage_.outerIndexPtr(), static_cast<std::size_t>(rows() + 1)};
  }
  std::span<const int> col_indices() const {
    return {storage_.innerIndexPtr(), static_cast<std::size_t>(nonZeros())};
  }
  std::span<const Scalar> values() const {
    return {storage_.valuePtr(), static_cast<std::size_t>(nonZeros())};
  }

  DenseMatrix<Scalar> to_dense() const { return DenseMatrix<Scalar>(storage_); }

  bool has_unit_entries() const {
    return std::all_of(values().begin(), values().end(),
                       [](Scalar v) { return v == Scalar(1) || v == Scalar(-1); });
  }

  /// Strict-mode validator for canonical aggregation matrices.
  void require_unit_entries() const {
    for (Index k = 0; k < rows(); ++k) {
      for (typename Storage::InnerIterator it(storage_, k); it; ++it) {
        if (it.value() != Scalar(1) && it.value() != Scalar(-1)) {
          throw InvalidInput("entry (" + std::to_string(k) + ", " + std::to_string(it.col()) +
                             ") is not +1 or -1");
        }
      }
    }
  }

  /// Index of the first row without stored entries.
  std::optional<Index> first_empty_row() const {
    for (Index k = 0; k < rows(); ++k) {
      if (storage_.outerIndexPtr()[k] == storage_.outerIndexPtr()[k + 1]) return k;
    }
    return std::nullopt;
  }

  bool operator==(const SparseConstraintMatrix& other) const {
    if (rows() != other.rows() || cols() != other.cols() || nonZeros() != other.nonZeros()) {
      return false;
    }
    return std::equal(row_offsets().begin(), row_offsets().end(), other.row_offsets().begin()) &&
           std::equal(col_indices().begin(), col_indices().end(), other.col_indices().begin()) &&
           std::equal(values().begin(), values().end(), other.values().begin());
  }

 private:
  static void check_shape(Index rows, Index cols) {
    if (rows < 0 || cols < 0) throw DimensionError("negative matrix dimension");
    if (rows > cols) {
      throw DimensionError("constraint matrix has more rows (" + std::to_string(rows) +
                           ") than columns (" + std::to_string(cols) + ")");
    }
  }

  Storage storage_{0, 0};
};

/// Positive diagonal of the weight matrix W.
template <typename Scalar = double>
class DiagonalWeights {
 public:
  DiagonalWeights() = default;

  explicit DiagonalWeights(Vector<Scalar> entries) : entries_(std::move(entries)) {
    for (Index i = 0; i < entries_.size(); ++i) {
      const Scalar w = entries_[i];
      if (!(w > Scalar(0)) || !std::isfinite(static_cast<double>(w))) {
        throw InvalidInput("weight " + std::to_string(i) + " is not positive and finite");
      }
    }
  }

  static DiagonalWeights identity(Index n) { return DiagonalWeights(Vector<Scalar>::Ones(n)); }

  Index size() const noexcept { return entries_.size(); }
  const Vector<Scalar>& entries() const noexcept { return entries_; }
  Scalar operator[](Index i) const { return entries_[i]; }
  Vector<Scalar> inverse() const { return entries_.cwiseInverse(); }

 private:
  Vector<Scalar> entries_;
};

/// Where a stacked forecast entry came from.
struct EntryLabel {
  std::string dataset;
  std::string key;

  bool operator==(const EntryLabel&) const = default;
};

/// Stacked forecasts with optional per-entry provenance.
template <typename Scalar = double>
struct ForecastVector {
  Vector<Scalar> values;
  std::vector<EntryLabel> labels;

  ForecastVector() = default;
  explicit ForecastVector(Vector<Scalar> v, std::vector<EntryLabel> l = {})
      : values(std::move(v)), labels(std::move(l)) {
    if (!labels.empty() && static_cast<Index>(labels.size()) != values.size()) {
      throw DimensionError("forecast labels do not match forecast length");
    }
  }

  Index size() const noexcept { return values.size(); }
};

namespace detail {

inline std::string shape_string(Index r, Index c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace detail

/// Returns A x.
template <typename Scalar>
Vector<Scalar> matvec(const SparseConstraintMatrix<Scalar>& a,
                      const VectorRef<Scalar>& x) {
  if (x.size() != a.cols()) {
    throw DimensionError("matvec: vector of length " + std::to_string(x.size()) +
                         " against matrix " + detail::shape_string(a.rows(), a.cols()));
  }
  Vector<Scalar> out = a.storage() * x;
  return out;
}

/// Returns A^T v.
template <typename Scalar>
Vector<Scalar> rmatvec(const SparseConstraintMatrix<Scalar>& a,
                       const VectorRef<Scalar>& v) {
  if (v.size() != a.rows()) {
    throw DimensionError("rmatvec: vector of length " + std::to_string(v.size()) +
                         " against matrix " + detail::shape_string(a.rows(), a.cols()));
  }
  Vector<Scalar> out = a.storage().transpose() * v;
  return out;
}

/// True iff every column of A has at most one nonzero.
template <typename Scalar>
bool has_disjoint_row_supports(const SparseConstraintMatrix<Scalar>& a) {
  std::vector<char> seen(static_cast<std::size_t>(a.cols()), 0);
  for (const int c : a.col_indices()) {
    if (seen[static_cast<std::size_t>(c)]) return false;
    seen[static_cast<std::size_t>(c)] = 1;
  }
  return true;
}

enum class GramBackend { cholesky, conjugate_gradient };

enum class GramOrdering { amd, natural };

struct GramOptions {
  GramBackend backend = GramBackend::cholesky;
  /// Apply a diagonal shift of 1e-10 * trace / K instead of failing on rank deficiency.
  bool allow_shift = false;
  /// Fill-reducing ordering for the Cholesky backend.
  GramOrdering ordering = GramOrdering::amd;
  double cg_tolerance = 1e-13;
  Index cg_max_iterations = 0;  // 0: 10 * K
};

/// Pivots below this fraction of their own Gram diagonal mark a dependent row.
inline constexpr double kPivotTolerance = 1e-10;

template <typename Scalar = double>
class GramFactorization;

template <typename Scalar>
GramFactorization<Scalar> build_gram(const SparseConstraintMatrix<Scalar>& a,
                                     const DiagonalWeights<Scalar>& w,
                                     const GramOptions& options = {});

/// Factorization of the K x K matrix  A W^-1 A^T (+ shift I).
template <typename Scalar>
class GramFactorization {
 public:
  using SparseMatrix = Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int>;

  GramFactorization() = default;

  Index dimension() const noexcept { return matrix_.rows(); }
  Scalar shift() const noexcept { return shift_; }
  GramBackend backend() const noexcept { return backend_; }
  const SparseMatrix& matrix() const noexcept { return matrix_; }

  /// Solves (A W^-1 A^T + shift I) x = b.
  Vector<Scalar> solve(const VectorRef<Scalar>& b) const {
    if (b.size() != dimension()) {
      throw DimensionError("gram solve: rhs of length " + std::to_string(b.size()) +
                           ", expected " + std::to_string(dimension()));
    }
    if (dimension() == 0) return Vector<Scalar>(0);
    if (amd_) return amd_->solve(b);
    if (natural_) return natural_->solve(b);
    Vector<Scalar> x = cg_->solve(b);
    if (cg_->info() != Eigen::Success) {
      throw SingularError("gram solve: conjugate gradient did not converge", -1);
    }
    return x;
  }

  template <typename S>
  friend GramFactorization<S> build_gram(const SparseConstraintMatrix<S>&,
                                         const DiagonalWeights<S>&, const GramOptions&);

 private:
  using AmdLdlt = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;
  using NaturalLdlt =
      Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>>;
  using Cg = Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper>;

  SparseMatrix matrix_;
  Scalar shift_ = Scalar(0);
  GramBackend backend_ = GramBackend::cholesky;
  std::shared_ptr<const AmdLdlt> amd_;
  std::shared_ptr<const NaturalLdlt> natural_;
  std::shared_ptr<const Cg> cg_;
};

namespace detail {

template <typename Scalar>
Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int> assemble_gram(
    const SparseConstraintMatrix<Scalar>& a, const Vector<Scalar>& inverse_weights) {
  const auto& s = a.storage();
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int> scaled = s * inverse_weights.asDiagonal();
  Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int> gram = scaled * s.transpose();
  gram.makeCompressed();
  return gram;
}

// Position (in original row numbering) of the first pivot that is negligible
// relative to its own diagonal entry, if any.
template <typename Ldlt, typename Scalar>
std::optional<Index> first_negligible_pivot(
    const Ldlt& ldlt, const Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int>& gram) {
  const auto& d = ldlt.vectorD();
  const auto& pinv = ldlt.permutationPinv().indices();
  const Vector<Scalar> diag = gram.diagonal();
  for (Index j = 0; j < d.size(); ++j) {
    const Index row = pinv.size() > 0 ? static_cast<Index>(pinv[j]) : j;
    const Scalar scale = diag[row];
    if (!(d[j] > Scalar(kPivotTolerance) * scale)) return row;
  }
  return std::nullopt;
}

template <typename Ldlt, typename Scalar>
std::optional<Index> factor_and_check(Ldlt& ldlt,
                                      const Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int>& g) {
  ldlt.compute(g);
  if (ldlt.info() != Eigen::Success) {
    // The factorization stops at the first exact zero pivot; earlier pivots are valid.
    auto row = first_negligible_pivot(ldlt, g);
    return row ? row : std::optional<Index>(0);
  }
  return first_negligible_pivot(ldlt, g);
}

}  // namespace detail

/// Factorizes A W^-1 A^T for repeated solves.
///
/// Rank deficiency raises `SingularError` naming a dependent row unless
/// `options.allow_shift` is set, in which case 1e-10 * trace / K is added to
/// the diagonal and recorded in `shift()`.
template <typename Scalar>
GramFactorization<Scalar> build_gram(const SparseConstraintMatrix<Scalar>& a,
                                     const DiagonalWeights<Scalar>& w,
                                     const GramOptions& options) {
  if (w.size() != a.cols()) {
    throw DimensionError("build_gram: " + std::to_string(w.size()) + " weights for " +
                         std::to_string(a.cols()) + " columns");
  }
  if (auto empty = a.first_empty_row()) {
    throw InvalidInput("build_gram: constraint row " + std::to_string(*empty) +
                       " has no entries");
  }
  GramFactorization<Scalar> g;
  g.backend_ = options.backend;
  g.matrix_ = detail::assemble_gram(a, w.inverse());
  const Index k = g.matrix_.rows();
  if (k == 0) return g;

  auto apply_shift = [&g, k]() {
    const Scalar trace = g.matrix_.diagonal().sum();
    g.shift_ = Scalar(1e-10) * trace / static_cast<Scalar>(k);
    Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int> id(k, k);
    id.setIdentity();
    g.matrix_ = g.matrix_ + g.shift_ * id;
    g.matrix_.makeCompressed();
  };

  if (options.backend == GramBackend::conjugate_gradient) {
    if (options.allow_shift) apply_shift();
    auto cg = std::make_shared<typename GramFactorization<Scalar>::Cg>();
    cg->setTolerance(static_cast<typename Eigen::NumTraits<Scalar>::Real>(options.cg_tolerance));
    cg->setMaxIterations(options.cg_max_iterations > 0 ? options.cg_max_iterations : 10 * k);
    cg->compute(g.matrix_);
    g.cg_ = std::move(cg);
    return g;
  }

  auto factor = [&](auto& ldlt) -> std::optional<Index> {
    auto row = detail::factor_and_check(ldlt, g.matrix_);
    if (row && options.allow_shift && g.shift_ == Scalar(0)) {
      apply_shift();
      row = detail::factor_and_check(ldlt, g.matrix_);
    }
    return row;
  };

  std::optional<Index> dependent;
  if (options.ordering == GramOrdering::amd) {
    auto ldlt = std::make_shared<typename GramFactorization<Scalar>::AmdLdlt>();
    dependent = factor(*ldlt);
    g.amd_ = std::move(ldlt);
  } else {
    auto ldlt = std::make_shared<typename GramFactorization<Scalar>::NaturalLdlt>();
    dependent = factor(*ldlt);
    g.natural_ = std::move(ldlt);
  }
  if (dependent) {
    throw SingularError("build_gram: constraint row " + std::to_string(*dependent) +
                            " is linearly dependent on other rows",
                        static_cast<long>(*dependent));
  }
  return g;
}

/// W-metric projection of y onto {z : A z = 0}.
template <typename Scalar>
Vector<Scalar> project_nullspace(const SparseConstraintMatrix<Scalar>& a,
                                 const DiagonalWeights<Scalar>& w,
                                 const GramFactorization<Scalar>& gram,
                                 const VectorRef<Scalar>& y) {
  if (gram.dimension() != a.rows()) {
    throw DimensionError("project_nullspace: factorization does not match matrix");
  }
  const Vector<Scalar> multipliers = gram.solve(matvec(a, y));
  Vector<Scalar> out = y - rmatvec(a, multipliers).cwiseQuotient(w.entries());
  return out;
}

namespace detail {

template <typename Scalar>
Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int> select_rows(
    const Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int>& a, const std::vector<Index>& rows) {
  std::vector<Eigen::Triplet<Scalar, int>> t;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (typename Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int>::InnerIterator it(a, rows[r]);
         it; ++it) {
      t.emplace_back(static_cast<int>(r), static_cast<int>(it.col()), it.value());
    }
  }
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int> out(static_cast<Index>(rows.size()), a.cols());
  out.setFromTriplets(t.begin(), t.end());
  out.makeCompressed();
  return out;
}

}  // namespace detail

/// Indices of rows that are linearly dependent on earlier rows (natural order),
/// including empty rows. Works on raw storage so that K may exceed N.
template <typename Scalar>
std::vector<Index> dependent_rows(const Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int>& a) {
  using Ldlt = Eigen::SimplicialLDLT<Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int>,
                                     Eigen::Lower, Eigen::NaturalOrdering<int>>;
  std::vector<Index> keep;
  std::vector<Index> removed;
  for (Index k = 0; k < a.rows(); ++k) {
    if (a.outerIndexPtr()[k] == a.outerIndexPtr()[k + 1]) {
      removed.push_back(k);
    } else {
      keep.push_back(k);
    }
  }
  while (!keep.empty()) {
    const auto current = detail::select_rows(a, keep);
    Eigen::SparseMatrix<Scalar, Eigen::ColMajor, int> gram = current * current.transpose();
    gram.makeCompressed();
    Ldlt ldlt;
    const auto row = detail::factor_and_check(ldlt, gram);
    if (!row) break;
    removed.push_back(keep[static_cast<std::size_t>(*row)]);
    keep.erase(keep.begin() + static_cast<std::ptrdiff_t>(*row));
  }
  std::sort(removed.begin(), removed.end());
  return removed;
}

/// Copy of `a` without the rows listed by `dependent_rows`.
template <typename Scalar>
SparseConstraintMatrix<Scalar> drop_dependent_rows(
    const Eigen::SparseMatrix<Scalar, Eigen::RowMajor, int>& a,
    std::vector<Index>* dropped = nullptr) {
  const auto removed = dependent_rows(a);
  std::vector<Index> keep;
  for (Index k = 0, r = 0; k < a.rows(); ++k) {
    if (r < static_cast<Index>(removed.size()) && removed[static_cast<std::size_t>(r)] == k) {
      ++r;
    } else {
      keep.push_back(k);
    }
  }
  if (dropped) dropped->insert(dropped->end(), removed.begin(), removed.end());
  return SparseConstraintMatrix<Scalar>(detail::select_rows(a, keep));
}

template <typename Scalar>
SparseConstraintMatrix<Scalar> drop_dependent_rows(const SparseConstraintMatrix<Scalar>& a,
                                                   std::vector<Index>* dropped = nullptr) {
  return drop_dependent_rows(a.storage(), dropped);
}

}  // namespace recon
