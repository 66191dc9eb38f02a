#include <random>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "recon/sparse_core.hpp"

using recon::DiagonalWeights;
using recon::SparseConstraintMatrix;
using Vec = Eigen::VectorXd;
using Dense = Eigen::MatrixXd;

namespace {

SparseConstraintMatrix<double> binary_tree7() {
  Dense a(3, 7);
  a << 1, -1, -1, 0, 0, 0, 0,
       0, 1, 0, -1, -1, 0, 0,
       0, 0, 1, 0, 0, -1, -1;
  return SparseConstraintMatrix<double>::from_dense(a);
}

Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_CASE("matvec on the seven-item binary tree matrix with consistent values is zero") {
  const auto a = binary_tree7();
  const Vec y = recon::matvec(a, vec({7, 3, 4, 1, 2, 1, 3}));
  CHECK(y == Vec::Zero(3));
}

TEST_CASE("matvec of a row without stored entries is zero") {
  const SparseConstraintMatrix<double> a(1, 4);
  CHECK(a.nonZeros() == 0);
  const Vec y = recon::matvec(a, vec({1, 2, 3, 4}));
  REQUIRE(y.size() == 1);
  CHECK(y[0] == 0.0);
}

TEST_CASE("matvec and rmatvec agree with dense products") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    const Dense d = oracle::random_signed_matrix(rng, 5, 12);
    const auto a = SparseConstraintMatrix<double>::from_dense(d);
    Vec x(12), v(5);
    for (auto& e : x) e = g(rng);
    for (auto& e : v) e = g(rng);
    CHECK((recon::matvec(a, x) - d * x).norm() <= 1e-13 * (1 + x.norm()));
    CHECK((recon::rmatvec(a, v) - d.transpose() * v).norm() <= 1e-13 * (1 + v.norm()));
  }
}

TEST_CASE("rmatvec examples") {
  const auto single = SparseConstraintMatrix<double>::from_dense((Dense(1, 2) << 1, -1).finished());
  CHECK(recon::rmatvec(single, vec({1})) == vec({1, -1}));
  CHECK(recon::rmatvec(binary_tree7(), vec({1, 0, 0})) == vec({1, -1, -1, 0, 0, 0, 0}));
}

TEST_CASE("length mismatches are dimension errors") {
  const auto a = binary_tree7();
  CHECK_THROWS_AS(recon::matvec(a, Vec::Zero(6)), recon::DimensionError);
  CHECK_THROWS_AS(recon::rmatvec(a, Vec::Zero(4)), recon::DimensionError);
}

TEST_CASE("storage invariants") {
  SUBCASE("explicit zeros are pruned and columns sorted") {
    std::vector<SparseConstraintMatrix<double>::Triplet> t{{0, 2, -1.0}, {0, 0, 1.0}, {0, 1, 0.0}};
    const auto a = SparseConstraintMatrix<double>::from_triplets(1, 3, t);
    CHECK(a.nonZeros() == 2);
    CHECK(a.col_indices()[0] == 0);
    CHECK(a.col_indices()[1] == 2);
    CHECK(a.row_offsets().size() == 2);
  }
  SUBCASE("more rows than columns is rejected") {
    CHECK_THROWS_AS(SparseConstraintMatrix<double>(3, 2), recon::DimensionError);
  }
  SUBCASE("CSR validation") {
    const std::vector<int> offsets{0, 2};
    const std::vector<int> bad_cols{1, 0};
    const std::vector<double> values{1.0, -1.0};
    CHECK_THROWS_AS(SparseConstraintMatrix<double>::from_csr(1, 2, offsets, bad_cols, values),
                    recon::InvalidInput);
    const std::vector<int> cols{0, 1};
    const std::vector<double> zero{1.0, 0.0};
    CHECK_THROWS_AS(SparseConstraintMatrix<double>::from_csr(1, 2, offsets, cols, zero),
                    recon::InvalidInput);
    const auto ok = SparseConstraintMatrix<double>::from_csr(1, 2, offsets, cols, values);
    CHECK(ok.to_dense() == (Dense(1, 2) << 1, -1).finished());
    const std::vector<int> out_of_range{0, 5};
    CHECK_THROWS_AS(SparseConstraintMatrix<double>::from_csr(1, 2, offsets, out_of_range, values),
                    recon::DimensionError);
  }
  SUBCASE("unit-entry validator") {
    CHECK_NOTHROW(binary_tree7().require_unit_entries());
    const auto scaled = SparseConstraintMatrix<double>::from_dense((Dense(1, 2) << 2, -1).finished());
    CHECK_FALSE(scaled.has_unit_entries());
    CHECK_THROWS_AS(scaled.require_unit_entries(), recon::InvalidInput);
  }
}

TEST_CASE("weights must be positive and finite") {
  CHECK_THROWS_AS(DiagonalWeights<double>(vec({1, 0})), recon::InvalidInput);
  CHECK_THROWS_AS(DiagonalWeights<double>(vec({1, -2})), recon::InvalidInput);
  CHECK_THROWS_AS(DiagonalWeights<double>(vec({1, std::numeric_limits<double>::infinity()})),
                  recon::InvalidInput);
  CHECK_THROWS_AS(DiagonalWeights<double>(vec({std::numeric_limits<double>::quiet_NaN()})),
                  recon::InvalidInput);
  CHECK(DiagonalWeights<double>::identity(3).entries() == Vec::Ones(3));
}

TEST_CASE("has_disjoint_row_supports") {
  CHECK(recon::has_disjoint_row_supports(
      SparseConstraintMatrix<double>::from_dense((Dense(1, 3) << 1, -1, -1).finished())));
  CHECK_FALSE(recon::has_disjoint_row_supports(binary_tree7()));
  CHECK(recon::has_disjoint_row_supports(SparseConstraintMatrix<double>(0, 5)));
}

TEST_CASE("build_gram small cases") {
  SUBCASE("identity pattern") {
    const auto a = SparseConstraintMatrix<double>::from_dense(Dense::Identity(2, 2));
    const auto g = recon::build_gram(a, DiagonalWeights<double>::identity(2));
    CHECK(Dense(g.matrix()) == Dense::Identity(2, 2));
    CHECK(g.solve(vec({3, -5})) == vec({3, -5}));
    CHECK(g.shift() == 0.0);
  }
  SUBCASE("single difference row") {
    const auto a = SparseConstraintMatrix<double>::from_dense((Dense(1, 2) << 1, -1).finished());
    const auto g = recon::build_gram(a, DiagonalWeights<double>::identity(2));
    CHECK(Dense(g.matrix())(0, 0) == 2.0);
    CHECK(g.solve(vec({4}))[0] == doctest::Approx(2.0).epsilon(1e-15));
  }
}

TEST_CASE("build_gram solves match dense solves") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const Dense d = oracle::random_signed_matrix(rng, 8, 30);
    const auto a = SparseConstraintMatrix<double>::from_dense(d);
    const Vec w = oracle::random_positive(rng, 30, 0.1, 10.0);
    const Vec b = oracle::random_positive(rng, 8, -5.0, 5.0);
    const Dense gram = d * w.cwiseInverse().asDiagonal() * d.transpose();
    const Vec expected = gram.fullPivLu().solve(b);
    for (const auto backend : {recon::GramBackend::cholesky, recon::GramBackend::conjugate_gradient}) {
      for (const auto ordering : {recon::GramOrdering::amd, recon::GramOrdering::natural}) {
        recon::GramOptions opt;
        opt.backend = backend;
        opt.ordering = ordering;
        const auto g = recon::build_gram(a, DiagonalWeights<double>(w), opt);
        const Vec x = g.solve(b);
        CHECK((x - expected).norm() <= 1e-8 * (1 + expected.norm()));
        CHECK((gram * x - b).norm() <= 1e-8 * b.norm());
      }
    }
  }
}

TEST_CASE("rank-deficient constraints") {
  Dense d(3, 4);
  d << 1, -1, 0, 0,
       0, 1, -1, 0,
       1, 0, -1, 0;  // row 2 = row 0 + row 1
  const auto a = SparseConstraintMatrix<double>::from_dense(d);
  const auto w = DiagonalWeights<double>::identity(4);
  SUBCASE("default is an error naming a dependent row") {
    for (const auto ordering : {recon::GramOrdering::amd, recon::GramOrdering::natural}) {
      recon::GramOptions opt;
      opt.ordering = ordering;
      try {
        (void)recon::build_gram(a, w, opt);
        FAIL("expected SingularError");
      } catch (const recon::SingularError& e) {
        const long row = e.dependent_row();
        CHECK(row >= 0);
        CHECK(row <= 2);
        // Removing the named row leaves a full-rank matrix.
        std::vector<int> keep;
        for (int r = 0; r < 3; ++r) {
          if (r != row) keep.push_back(r);
        }
        Dense rest(2, 4);
        for (int r = 0; r < 2; ++r) rest.row(r) = d.row(keep[static_cast<std::size_t>(r)]);
        CHECK(Eigen::FullPivLU<Dense>(rest).rank() == 2);
      }
    }
  }
  SUBCASE("optional shift is applied and recorded") {
    recon::GramOptions opt;
    opt.allow_shift = true;
    const auto g = recon::build_gram(a, w, opt);
    const double trace = (d * d.transpose()).trace();
    CHECK(g.shift() == doctest::Approx(1e-10 * trace / 3.0).epsilon(1e-12));
    const Vec b = d * vec({1, 2, 3, 4});  // in the range, so consistent
    const Vec x = g.solve(b);
    const Dense shifted = d * d.transpose() + g.shift() * Dense::Identity(3, 3);
    CHECK((shifted * x - b).norm() <= 1e-8 * b.norm());
  }
  SUBCASE("dependent_rows and drop_dependent_rows") {
    const auto rows = recon::dependent_rows(a.storage());
    REQUIRE(rows.size() == 1);
    CHECK(rows[0] == 2);
    std::vector<recon::Index> dropped;
    const auto reduced = recon::drop_dependent_rows(a, &dropped);
    CHECK(reduced.rows() == 2);
    CHECK(dropped == std::vector<recon::Index>{2});
    CHECK_NOTHROW((void)recon::build_gram(reduced, w));
  }
}

TEST_CASE("empty constraint rows are rejected by build_gram") {
  const SparseConstraintMatrix<double> a(1, 3);
  CHECK_THROWS_AS((void)recon::build_gram(a, DiagonalWeights<double>::identity(3)),
                  recon::InvalidInput);
  const auto b = SparseConstraintMatrix<double>::from_dense((Dense(1, 2) << 1, -1).finished());
  CHECK_THROWS_AS((void)recon::build_gram(b, DiagonalWeights<double>::identity(3)),
                  recon::DimensionError);
}

TEST_CASE("project_nullspace examples") {
  SUBCASE("symmetric averaging") {
    const auto a = SparseConstraintMatrix<double>::from_dense((Dense(1, 2) << 1, -1).finished());
    const auto w = DiagonalWeights<double>::identity(2);
    const auto g = recon::build_gram(a, w);
    const Vec p = recon::project_nullspace(a, w, g, vec({2, 4}));
    CHECK(p[0] == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(3.0).epsilon(1e-15));
  }
  SUBCASE("feasible points are fixed") {
    const auto a = binary_tree7();
    const auto w = DiagonalWeights<double>::identity(7);
    const Vec y = vec({7, 3, 4, 1, 2, 1, 3});
    const Vec p = recon::project_nullspace(a, w, recon::build_gram(a, w), y);
    CHECK((p - y).norm() <= 1e-13);
  }
  SUBCASE("weighted single row") {
    const auto a = SparseConstraintMatrix<double>::from_dense((Dense(1, 3) << -1, 1, 1).finished());
    const Vec wv = vec({1.0 / 10, 1.0 / 3, 1.0 / 4});
    const DiagonalWeights<double> w(wv);
    const Vec y = vec({10, 3, 4});
    const Vec p = recon::project_nullspace(a, w, recon::build_gram(a, w), y);
    const Vec expected = vec({140.0 / 17, 60.0 / 17, 80.0 / 17});
    CHECK(oracle::max_rel_err(p, expected) <= 1e-14);
    // Both independent oracles give the same point.
    const Dense d = a.to_dense();
    CHECK(oracle::max_rel_err(oracle::weighted_lsqr(d, wv, y).y, expected) <= 1e-12);
    CHECK(oracle::max_rel_err(oracle::disjoint_entries(d, wv, y), expected) <= 1e-14);
  }
}

TEST_CASE("project_nullspace properties on random instances") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> size(2, 50);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = size(rng);
    std::uniform_int_distribution<int> rows(1, std::max(1, n / 2));
    const int k = rows(rng);
    const Dense d = oracle::random_signed_matrix(rng, k, n);
    const auto a = SparseConstraintMatrix<double>::from_dense(d);
    const Vec wv = oracle::random_positive(rng, n, 0.01, 10.0);
    const DiagonalWeights<double> w(wv);
    const auto gram = recon::build_gram(a, w);
    Vec y(n);
    for (auto& e : y) e = 10.0 * g(rng);

    const Vec p = recon::project_nullspace(a, w, gram, y);
    const double scale = 1.0 + y.norm();
    CHECK((d * p).norm() <= 1e-8 * scale);
    const Vec pp = recon::project_nullspace(a, w, gram, p);
    CHECK((pp - p).norm() <= 1e-8 * scale);
    CHECK((p - oracle::weighted_lsqr(d, wv, y).y).norm() <= 1e-8 * scale);

    // Minimality: any other feasible point is no closer in the W metric.
    const double best = oracle::objective(p, y, wv);
    const Eigen::FullPivLU<Dense> lu(d);
    const Dense basis = lu.kernel();
    for (int z = 0; z < 100 && basis.cols() > 0; ++z) {
      Vec coeff(basis.cols());
      for (auto& e : coeff) e = 5.0 * g(rng);
      const Vec feasible = p + basis * coeff;
      CHECK(best <= oracle::objective(feasible, y, wv) + 1e-10 * (1.0 + best));
    }
  }
}
