#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "recon/solvers.hpp"
#include "recon/weighting.hpp"

using recon::ScaleMode;
using recon::WeightSpec;
using Vec = Eigen::VectorXd;

TEST_CASE("build_weights examples") {
  SUBCASE("reciprocal") {
    WeightSpec<double> spec;
    spec.scale_mode = ScaleMode::reciprocal;
    spec.epsilon = 0.0;
    const Vec yhat = (Vec(3) << 10, 3, 4).finished();
    const Vec expected = (Vec(3) << 1.0 / 10, 1.0 / 3, 1.0 / 4).finished();
    CHECK(recon::build_weights(spec, yhat).entries() == expected);
  }
  SUBCASE("importance with reciprocal squared") {
    WeightSpec<double> spec;
    spec.importance = Vec::Constant(2, 1000.0);
    spec.scale_mode = ScaleMode::reciprocal_squared;
    spec.epsilon = 1.0;
    const auto w = recon::build_weights(spec, Vec::Constant(2, 9.0));
    CHECK(w[0] == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(w[1] == doctest::Approx(10.0).epsilon(1e-15));
  }
  SUBCASE("no scaling gives ones") {
    std::mt19937_64 rng(1);
    const Vec yhat = oracle::random_positive(rng, 20, -50, 50);
    CHECK(recon::build_weights(WeightSpec<double>{}, yhat).entries() == Vec::Ones(20));
  }
  SUBCASE("zero forecast is fine under the shifted square") {
    WeightSpec<double> spec;
    spec.scale_mode = ScaleMode::reciprocal_squared;
    const auto w = recon::build_weights(spec, Vec::Zero(3));
    CHECK(w.entries() == Vec::Ones(3));
  }
}

TEST_CASE("build_weights errors name the index") {
  const Vec yhat = (Vec(3) << 1, 0, 2).finished();
  WeightSpec<double> spec;
  spec.scale_mode = ScaleMode::reciprocal;
  CHECK_THROWS_WITH_AS(recon::build_weights(spec, yhat), doctest::Contains("forecast 1"),
                       recon::InvalidInput);

  WeightSpec<double> bad_importance;
  bad_importance.importance = (Vec(3) << 1, 1, -1).finished();
  CHECK_THROWS_WITH_AS(recon::build_weights(bad_importance, yhat),
                       doctest::Contains("entry 2"), recon::InvalidInput);

  WeightSpec<double> squared;
  squared.scale_mode = ScaleMode::reciprocal_squared;
  squared.epsilon = 0.0;
  CHECK_THROWS_WITH_AS(recon::build_weights(squared, yhat), doctest::Contains("weight 1"),
                       recon::InvalidInput);

  const Vec nan_yhat = (Vec(2) << 1, std::numeric_limits<double>::quiet_NaN()).finished();
  CHECK_THROWS_WITH_AS(recon::build_weights(WeightSpec<double>{}, nan_yhat),
                       doctest::Contains("forecast 1"), recon::InvalidInput);

  WeightSpec<double> short_importance;
  short_importance.importance = Vec::Ones(2);
  CHECK_THROWS_AS(recon::build_weights(short_importance, yhat), recon::DimensionError);

  WeightSpec<double> negative_eps;
  negative_eps.epsilon = -1.0;
  CHECK_THROWS_AS(recon::build_weights(negative_eps, yhat), recon::InvalidInput);
}

TEST_CASE("percentage objective") {
  std::mt19937_64 rng(5);
  const Vec yhat = oracle::random_positive(rng, 12, 0.0, 50.0);
  const recon::DiagonalWeights<double> ones(Vec::Ones(12));
  CHECK(recon::percentage_objective<double>(yhat, yhat, ones, 1.0) == 0.0);

  const Vec doubled = yhat + (yhat.array() + 1.0).matrix();
  CHECK(recon::percentage_objective<double>(doubled, yhat, ones, 1.0) ==
        doctest::Approx(12.0).epsilon(1e-14));

  const Vec minus_one = -Vec::Ones(3);
  CHECK_THROWS_WITH_AS(
      recon::percentage_objective<double>(Vec::Zero(3), minus_one,
                                          recon::DiagonalWeights<double>(Vec::Ones(3)), 1.0),
      doctest::Contains("forecast 0"), recon::InvalidInput);
  CHECK_THROWS_AS(recon::percentage_objective<double>(Vec::Zero(2), yhat, ones, 1.0),
                  recon::DimensionError);
}

TEST_CASE("percentage objective equals the reciprocal-squared quadratic form") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> eps_dist(0.0, 2.0);
  for (int trial = 0; trial < 500; ++trial) {
    const Eigen::Index n = 1 + trial % 30;
    const Vec yhat = oracle::random_positive(rng, n, 0.0, 1000.0);
    const Vec y = oracle::random_positive(rng, n, 0.0, 1000.0);
    const Vec importance = oracle::random_positive(rng, n, 0.1, 1e4);
    const double eps = eps_dist(rng);
    WeightSpec<double> spec;
    spec.importance = importance;
    spec.scale_mode = ScaleMode::reciprocal_squared;
    spec.epsilon = eps;
    const double lhs = recon::percentage_objective<double>(
        y, yhat, recon::DiagonalWeights<double>(importance), eps);
    const double rhs = recon::quadratic_objective<double>(y, yhat, recon::build_weights(spec, yhat));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(std::abs(lhs), std::abs(rhs)));
  }
}

TEST_CASE("common scaling of the weights leaves LSQR unchanged") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> log_c(-6.0, 6.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 4 + trial % 20;
    const Eigen::Index k = 1 + trial % (n / 2);
    const auto a = recon::SparseConstraintMatrix<double>::from_dense(
        oracle::random_signed_matrix(rng, k, n));
    const Vec yhat = oracle::random_positive(rng, n);
    const Vec w = oracle::random_positive(rng, n, 0.01, 10.0);
    const double c = std::pow(10.0, log_c(rng));
    const auto y1 = recon::lsqr_closed_form(a, recon::DiagonalWeights<double>(w), yhat).y;
    const auto y2 = recon::lsqr_closed_form(a, recon::DiagonalWeights<double>(c * w), yhat).y;
    CHECK(recon::entries_agree<double>(y1, y2, 1e-10));
  }
}
