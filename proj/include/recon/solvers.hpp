#pragma once

// Reconciliation solvers for
//
//   min (y - yhat)^T W (y - yhat)   s.t.  A y = 0,  y >= 0
//
// with diagonal W: the closed-form equality-only solution, alternating
// projection, Dykstra's projection algorithm and scaled-form ADMM, plus
// the exact enumeration oracle used to validate them on small problems.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "recon/sparse_core.hpp"
#include "recon/weighting.hpp"

namespace recon {

enum class SolverKind { lsqr, alternating_projection, dykstra, admm };

inline std::string_view to_string(SolverKind kind) {
  switch (kind) {
    case SolverKind::lsqr:
      return "lsqr";
    case SolverKind::alternating_projection:
      return "ap";
    case SolverKind::dykstra:
      return "dykstra";
    case SolverKind::admm:
      return "admm";
  }
  return "unknown";
}

inline SolverKind parse_solver_kind(std::string_view name) {
  if (name == "lsqr") return SolverKind::lsqr;
  if (name == "ap" || name == "alternating_projection") return SolverKind::alternating_projection;
  if (name == "dykstra") return SolverKind::dykstra;
  if (name == "admm") return SolverKind::admm;
  throw InvalidInput("unknown solver '" + std::string(name) + "'");
}

template <typename Scalar = double>
struct SolveSettings {
  // Alternating projection / Dykstra. Both are absolute norms, so they should
  // be chosen relative to the scale of ||yhat||.
  Scalar eps_iter = Scalar(1e-9);
  Scalar eps_fea = Scalar(1e-9);
  // ADMM.
  Scalar eps_abs = Scalar(1e-7);
  Scalar eps_rel = Scalar(3e-8);
  Scalar rho = Scalar(1);
  Index max_iters = 100000;
  bool record_history = false;
  GramOptions gram;

  void validate() const {
    if (!(eps_iter > 0 && eps_fea > 0 && eps_abs > 0 && eps_rel > 0)) {
      throw InvalidInput("solver tolerances must be positive");
    }
    if (!(rho > 0)) throw InvalidInput("rho must be positive");
    if (max_iters < 1) throw InvalidInput("max_iters must be at least 1");
  }
};

template <typename Scalar = double>
struct SolveReport {
  ForecastVector<Scalar> y;
  Index iterations = 0;
  // r_iter / r_fea for the projection methods, r_primal / r_dual for ADMM.
  Scalar r_iter = Scalar(0);
  Scalar r_fea = Scalar(0);
  Scalar r_primal = Scalar(0);
  Scalar r_dual = Scalar(0);
  Scalar objective = Scalar(0);
  double wall_time = 0.0;
  bool converged = false;
  SolverKind solver = SolverKind::lsqr;
  /// Per-iteration (first, second) residual pairs when history is recorded.
  std::vector<std::pair<Scalar, Scalar>> history;
};

/// Equality-constrained stationary point and its Lagrange multipliers.
template <typename Scalar = double>
struct KktSolution {
  Vector<Scalar> y;
  Vector<Scalar> lambda;
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

template <typename Scalar>
Scalar negative_part_norm(const Vector<Scalar>& y) {
  return y.cwiseMin(Scalar(0)).norm();
}

template <typename Scalar>
void check_problem(const SparseConstraintMatrix<Scalar>& a, const DiagonalWeights<Scalar>& w,
                   const VectorRef<Scalar>& forecast) {
  if (w.size() != a.cols() || forecast.size() != a.cols()) {
    throw DimensionError("problem dimensions disagree: A is " +
                         shape_string(a.rows(), a.cols()) + ", W has " +
                         std::to_string(w.size()) + " entries, yhat has " +
                         std::to_string(forecast.size()));
  }
}

}  // namespace detail

/// Closed-form minimizer without the nonnegativity constraint:
///   lambda = (A W^-1 A^T)^-1 A yhat,   y = yhat - W^-1 A^T lambda.
template <typename Scalar>
KktSolution<Scalar> lsqr_closed_form(const SparseConstraintMatrix<Scalar>& a,
                                     const DiagonalWeights<Scalar>& w,
                                     const VectorRef<Scalar>& forecast,
                                     const GramOptions& options = {}) {
  detail::check_problem(a, w, forecast);
  const auto gram = build_gram(a, w, options);
  KktSolution<Scalar> out;
  out.lambda = gram.solve(matvec(a, forecast));
  out.y = forecast - rmatvec(a, out.lambda).cwiseQuotient(w.entries());
  return out;
}

/// Equality-constrained QP  min 1/2 y^T H y + c^T y  s.t.  A y = 0  for diagonal H,
/// solved through the Schur complement A H^-1 A^T. The factorization is kept
/// so that repeated right-hand sides reuse it.
template <typename Scalar = double>
class KktSystem {
 public:
  KktSystem(SparseConstraintMatrix<Scalar> a, DiagonalWeights<Scalar> h,
            const GramOptions& options = {})
      : a_(std::move(a)), h_(std::move(h)), schur_(build_gram(a_, h_, options)) {}

  /// [y; lambda] = [[H, A^T], [A, 0]]^-1 [-c; 0].
  KktSolution<Scalar> solve(const VectorRef<Scalar>& c) const {
    if (c.size() != a_.cols()) throw DimensionError("kkt solve: c has wrong length");
    const Vector<Scalar> hinv_c = c.cwiseQuotient(h_.entries());
    KktSolution<Scalar> out;
    out.lambda = schur_.solve(-matvec(a_, hinv_c));
    out.y = -(c + rmatvec(a_, out.lambda)).cwiseQuotient(h_.entries());
    return out;
  }

  const SparseConstraintMatrix<Scalar>& matrix() const noexcept { return a_; }
  const DiagonalWeights<Scalar>& hessian() const noexcept { return h_; }

 private:
  SparseConstraintMatrix<Scalar> a_;
  DiagonalWeights<Scalar> h_;
  GramFactorization<Scalar> schur_;
};

template <typename Scalar>
KktSolution<Scalar> kkt_solve(const DiagonalWeights<Scalar>& h,
                              const SparseConstraintMatrix<Scalar>& a,
                              const VectorRef<Scalar>& c,
                              const GramOptions& options = {}) {
  if (h.size() != a.cols()) throw DimensionError("kkt_solve: H has wrong size");
  return KktSystem<Scalar>(a, h, options).solve(c);
}

/// Closed-form solution wrapped in a report, for side-by-side comparison with
/// the iterative solvers.
template <typename Scalar>
SolveReport<Scalar> solve_lsqr(const SparseConstraintMatrix<Scalar>& a,
                               const DiagonalWeights<Scalar>& w,
                               const VectorRef<Scalar>& forecast,
                               const SolveSettings<Scalar>& settings = {}) {
  detail::Stopwatch clock;
  auto kkt = lsqr_closed_form(a, w, forecast, settings.gram);
  SolveReport<Scalar> report;
  report.solver = SolverKind::lsqr;
  report.iterations = 1;
  report.r_fea = detail::negative_part_norm(kkt.y);
  report.objective = quadratic_objective<Scalar>(kkt.y, forecast, w);
  report.y = ForecastVector<Scalar>(std::move(kkt.y));
  report.converged = true;
  report.wall_time = clock.seconds();
  return report;
}

/// Alternating projection: clamp to the nonnegative orthant, then project onto
/// the null space of A. Every iterate is feasible for A y = 0; the limit is a
/// point of the intersection, not necessarily the optimum.
template <typename Scalar>
SolveReport<Scalar> alternating_projection(const SparseConstraintMatrix<Scalar>& a,
                                           const DiagonalWeights<Scalar>& w,
                                           const VectorRef<Scalar>& forecast,
                                           const SolveSettings<Scalar>& settings = {}) {
  detail::check_problem(a, w, forecast);
  settings.validate();
  detail::Stopwatch clock;
  const auto gram = build_gram(a, w, settings.gram);

  SolveReport<Scalar> report;
  report.solver = SolverKind::alternating_projection;
  Vector<Scalar> y = forecast;
  Vector<Scalar> next(y.size());
  for (Index t = 1; t <= settings.max_iters; ++t) {
    next = y.cwiseMax(Scalar(0));
    next = project_nullspace(a, w, gram, next);
    report.r_iter = (next - y).norm();
    report.r_fea = detail::negative_part_norm(next);
    y.swap(next);
    report.iterations = t;
    if (settings.record_history) report.history.emplace_back(report.r_iter, report.r_fea);
    if (report.r_iter <= settings.eps_iter && report.r_fea <= settings.eps_fea) {
      report.converged = true;
      break;
    }
  }
  report.objective = quadratic_objective<Scalar>(y, forecast, w);
  report.y = ForecastVector<Scalar>(std::move(y));
  report.wall_time = clock.seconds();
  return report;
}

/// Dykstra's algorithm with correction vectors p (orthant) and q (null space).
///
/// Both projections are taken in the W metric. For diagonal W the metric
/// projection onto the orthant is the plain clamp (u)_+, so that step is the
/// unweighted one. The null-space step is affine, so after the first pass q
/// only carries components along range(W^-1 A^T) that the next projection
/// removes again; it is kept to follow the algorithm step for step.
template <typename Scalar>
SolveReport<Scalar> dykstra(const SparseConstraintMatrix<Scalar>& a,
                            const DiagonalWeights<Scalar>& w,
                            const VectorRef<Scalar>& forecast,
                            const SolveSettings<Scalar>& settings = {}) {
  detail::check_problem(a, w, forecast);
  settings.validate();
  detail::Stopwatch clock;
  const auto gram = build_gram(a, w, settings.gram);

  SolveReport<Scalar> report;
  report.solver = SolverKind::dykstra;
  const Index n = forecast.size();
  Vector<Scalar> y = forecast;
  Vector<Scalar> p = Vector<Scalar>::Zero(n);
  Vector<Scalar> q = Vector<Scalar>::Zero(n);
  Vector<Scalar> u(n), v(n), next(n);
  for (Index t = 1; t <= settings.max_iters; ++t) {
    u = y + p;
    next = u.cwiseMax(Scalar(0));
    p = u - next;
    v = next + q;
    next = project_nullspace(a, w, gram, v);
    q = v - next;
    report.r_iter = (next - y).norm();
    report.r_fea = detail::negative_part_norm(next);
    y.swap(next);
    report.iterations = t;
    if (settings.record_history) report.history.emplace_back(report.r_iter, report.r_fea);
    if (report.r_iter <= settings.eps_iter && report.r_fea <= settings.eps_fea) {
      report.converged = true;
      break;
    }
  }
  report.objective = quadratic_objective<Scalar>(y, forecast, w);
  report.y = ForecastVector<Scalar>(std::move(y));
  report.wall_time = clock.seconds();
  return report;
}

/// Scaled-form ADMM on the splitting  y = z,  A y = 0,  z >= 0.
///
/// The y-update is the KKT solve with H = 2W + rho I and
/// c = -2 W yhat + rho (u - z); the Schur complement is factorized once.
template <typename Scalar>
SolveReport<Scalar> admm(const SparseConstraintMatrix<Scalar>& a,
                         const DiagonalWeights<Scalar>& w,
                         const VectorRef<Scalar>& forecast,
                         const SolveSettings<Scalar>& settings = {}) {
  detail::check_problem(a, w, forecast);
  settings.validate();
  detail::Stopwatch clock;
  const Index n = forecast.size();
  const Scalar rho = settings.rho;
  const KktSystem<Scalar> kkt(
      a, DiagonalWeights<Scalar>(Scalar(2) * w.entries().array() + rho), settings.gram);
  const Vector<Scalar> c0 = Scalar(-2) * w.entries().cwiseProduct(forecast);
  const Scalar sqrt_n = std::sqrt(static_cast<Scalar>(n));

  SolveReport<Scalar> report;
  report.solver = SolverKind::admm;
  Vector<Scalar> z = forecast;
  Vector<Scalar> u = Vector<Scalar>::Zero(n);
  Vector<Scalar> y = forecast;
  Vector<Scalar> z_prev(n);
  for (Index t = 1; t <= settings.max_iters; ++t) {
    y = kkt.solve(c0 + rho * (u - z)).y;
    z_prev.swap(z);
    z = (y + u).cwiseMax(Scalar(0));
    u += y - z;
    report.r_primal = (y - z).norm();
    report.r_dual = (rho * (z - z_prev)).norm();
    const Scalar eps_primal = sqrt_n * settings.eps_abs + settings.eps_rel * std::max(y.norm(), z.norm());
    const Scalar eps_dual = sqrt_n * settings.eps_abs + settings.eps_rel * (rho * u).norm();
    report.iterations = t;
    if (settings.record_history) report.history.emplace_back(report.r_primal, report.r_dual);
    if (report.r_primal <= eps_primal && report.r_dual <= eps_dual) {
      report.converged = true;
      break;
    }
  }
  report.r_fea = detail::negative_part_norm(y);
  report.objective = quadratic_objective<Scalar>(y, forecast, w);
  report.y = ForecastVector<Scalar>(std::move(y));
  report.wall_time = clock.seconds();
  return report;
}

/// Runs the solver selected by `kind`.
template <typename Scalar>
SolveReport<Scalar> reconcile(SolverKind kind, const SparseConstraintMatrix<Scalar>& a,
                              const DiagonalWeights<Scalar>& w,
                              const VectorRef<Scalar>& forecast,
                              const SolveSettings<Scalar>& settings = {}) {
  switch (kind) {
    case SolverKind::lsqr:
      return solve_lsqr(a, w, forecast, settings);
    case SolverKind::alternating_projection:
      return alternating_projection(a, w, forecast, settings);
    case SolverKind::dykstra:
      return dykstra(a, w, forecast, settings);
    case SolverKind::admm:
      return admm(a, w, forecast, settings);
  }
  throw InvalidInput("unknown solver");
}

inline constexpr Index kOracleMaxDimension = 24;

namespace detail {

// Exact search over zero sets S: for each S the problem with y_S = 0 added is
// an equality-constrained least-squares problem. Adding indices to S can only
// raise the optimal value, so a subtree is skipped once its root is feasible
// (nothing below can beat it) or already no better than the incumbent.
template <typename Scalar>
class ActiveSetEnumerator {
 public:
  ActiveSetEnumerator(DenseMatrix<Scalar> a, Vector<Scalar> w, Vector<Scalar> forecast)
      : a_(std::move(a)), w_(std::move(w)), forecast_(std::move(forecast)) {
    const Index n = forecast_.size();
    feasibility_tol_ = Scalar(1e-10) * (Scalar(1) + forecast_.cwiseAbs().maxCoeff());
    // y = 0 is always feasible.
    best_y_ = Vector<Scalar>::Zero(n);
    best_objective_ = (forecast_.array().square() * w_.array()).sum();
  }

  Vector<Scalar> run() {
    std::vector<bool> zero(static_cast<std::size_t>(forecast_.size()), false);
    visit(0, zero);
    return best_y_;
  }

 private:
  std::pair<Scalar, Vector<Scalar>> candidate(const std::vector<bool>& zero) const {
    const Index n = forecast_.size();
    std::vector<Index> free;
    for (Index i = 0; i < n; ++i) {
      if (!zero[static_cast<std::size_t>(i)]) free.push_back(i);
    }
    Vector<Scalar> y = Vector<Scalar>::Zero(n);
    Scalar objective = Scalar(0);
    for (Index i = 0; i < n; ++i) {
      if (zero[static_cast<std::size_t>(i)]) objective += w_[i] * forecast_[i] * forecast_[i];
    }
    const Index m = static_cast<Index>(free.size());
    if (m == 0) return {objective, y};
    // In scaled coordinates s = W^1/2 y the subproblem is an orthogonal
    // projection of W^1/2 yhat onto null(A_F W_F^-1/2).
    DenseMatrix<Scalar> bt(m, a_.rows());
    Vector<Scalar> target(m);
    for (Index j = 0; j < m; ++j) {
      const Index i = free[static_cast<std::size_t>(j)];
      const Scalar root = std::sqrt(w_[i]);
      bt.row(j) = a_.col(i).transpose() / root;
      target[j] = root * forecast_[i];
    }
    Vector<Scalar> residual = target;
    if (a_.rows() > 0) {
      Eigen::CompleteOrthogonalDecomposition<DenseMatrix<Scalar>> cod(bt);
      residual -= bt * cod.solve(target);
    }
    for (Index j = 0; j < m; ++j) {
      const Index i = free[static_cast<std::size_t>(j)];
      y[i] = residual[j] / std::sqrt(w_[i]);
    }
    objective += (residual - target).squaredNorm();
    return {objective, y};
  }

  void visit(Index start, std::vector<bool>& zero) {
    auto [objective, y] = candidate(zero);
    const Scalar slack = Scalar(1e-12) * (Scalar(1) + best_objective_);
    if (objective > best_objective_ + slack) return;
    if (y.minCoeff() >= -feasibility_tol_) {
      if (objective < best_objective_) {
        best_objective_ = objective;
        best_y_ = y.cwiseMax(Scalar(0));
      }
      return;
    }
    for (Index i = start; i < forecast_.size(); ++i) {
      zero[static_cast<std::size_t>(i)] = true;
      visit(i + 1, zero);
      zero[static_cast<std::size_t>(i)] = false;
    }
  }

  DenseMatrix<Scalar> a_;
  Vector<Scalar> w_;
  Vector<Scalar> forecast_;
  Scalar feasibility_tol_;
  Vector<Scalar> best_y_;
  Scalar best_objective_;
};

}  // namespace detail

/// Global minimizer of the full problem by exhaustive active-set search.
/// Only for N <= 24.
template <typename Scalar>
Vector<Scalar> brute_force_oracle(const SparseConstraintMatrix<Scalar>& a,
                                  const DiagonalWeights<Scalar>& w,
                                  const VectorRef<Scalar>& forecast) {
  detail::check_problem(a, w, forecast);
  if (a.cols() > kOracleMaxDimension) {
    throw InvalidInput("brute_force_oracle: N = " + std::to_string(a.cols()) +
                       " exceeds the limit of " + std::to_string(kOracleMaxDimension));
  }
  detail::ActiveSetEnumerator<Scalar> search(a.to_dense(), w.entries(), forecast);
  return search.run();
}

/// |a_i - b_i| <= tol * max(1, |a_i|, |b_i|) for every entry.
template <typename Scalar>
bool entries_agree(const VectorRef<Scalar>& x,
                   const VectorRef<Scalar>& y, Scalar tol) {
  if (x.size() != y.size()) return false;
  for (Index i = 0; i < x.size(); ++i) {
    const Scalar scale = std::max({Scalar(1), std::abs(x[i]), std::abs(y[i])});
    if (!(std::abs(x[i] - y[i]) <= tol * scale)) return false;
  }
  return true;
}

/// Checks that the closed-form solution is unchanged when A is replaced by E A.
template <typename Scalar>
bool representation_invariance_check(const SparseConstraintMatrix<Scalar>& a,
                                     const DenseMatrix<Scalar>& e,
                                     const DiagonalWeights<Scalar>& w,
                                     const VectorRef<Scalar>& forecast,
                                     Scalar tol = Scalar(1e-8)) {
  if (e.rows() != a.rows() || e.cols() != a.rows()) {
    throw DimensionError("representation check: E must be K x K");
  }
  Eigen::FullPivLU<DenseMatrix<Scalar>> lu(e);
  if (!lu.isInvertible()) throw SingularError("representation check: E is singular", -1);
  const DenseMatrix<Scalar> ea = e * a.storage();
  const auto b = SparseConstraintMatrix<Scalar>::from_dense(ea);
  const auto ya = lsqr_closed_form(a, w, forecast).y;
  const auto yb = lsqr_closed_form(b, w, forecast).y;
  return entries_agree<Scalar>(ya, yb, tol);
}

/// A problem whose closed-form solution has a negative entry although
/// yhat > 0 and W_nn = 1 / yhat_n.
template <typename Scalar = double>
struct NonnegCounterexample {
  SparseConstraintMatrix<Scalar> a;
  Vector<Scalar> forecast;
  Vector<Scalar> lsqr;
  std::uint64_t trial = 0;
};

struct CounterexampleSearchOptions {
  Index min_items = 3;
  Index max_items = 8;
  Index max_constraints = 4;
  /// Restrict to matrices with disjoint row supports (no counterexample can exist).
  bool disjoint_only = false;
  /// log-uniform spread of the forecasts: yhat = exp(U(-skew, skew)).
  double skew = 3.0;
};

/// Seeded random search for a counterexample to nonnegativity of the
/// closed-form solution under reciprocal weighting.
template <typename Scalar = double>
std::optional<NonnegCounterexample<Scalar>> nonneg_counterexample_search(
    std::uint64_t seed, std::uint64_t trials, const CounterexampleSearchOptions& options = {}) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> log_spread(-options.skew, options.skew);
  std::bernoulli_distribution coin(0.5);
  for (std::uint64_t trial = 0; trial < trials; ++trial) {
    const Index n =
        std::uniform_int_distribution<Index>(options.min_items, options.max_items)(rng);
    const Index k_max =
        std::min<Index>(options.max_constraints, options.disjoint_only ? n / 2 : n - 1);
    const Index k = std::uniform_int_distribution<Index>(1, std::max<Index>(1, k_max))(rng);

    std::vector<Index> columns(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) columns[static_cast<std::size_t>(i)] = i;
    std::vector<typename SparseConstraintMatrix<Scalar>::Triplet> triplets;
    if (options.disjoint_only) {
      // Partition a random prefix of the shuffled columns among the rows.
      std::shuffle(columns.begin(), columns.end(), rng);
      Index pos = 0;
      for (Index r = 0; r < k; ++r) {
        const Index remaining_rows = k - r - 1;
        const Index max_len = n - pos - 2 * remaining_rows;
        const Index len = std::uniform_int_distribution<Index>(2, max_len)(rng);
        for (Index j = 0; j < len; ++j) {
          triplets.emplace_back(static_cast<int>(r),
                                static_cast<int>(columns[static_cast<std::size_t>(pos + j)]),
                                coin(rng) ? Scalar(1) : Scalar(-1));
        }
        pos += len;
      }
    } else {
      for (Index r = 0; r < k; ++r) {
        std::shuffle(columns.begin(), columns.end(), rng);
        const Index len = std::uniform_int_distribution<Index>(2, n)(rng);
        for (Index j = 0; j < len; ++j) {
          triplets.emplace_back(static_cast<int>(r),
                                static_cast<int>(columns[static_cast<std::size_t>(j)]),
                                coin(rng) ? Scalar(1) : Scalar(-1));
        }
      }
    }
    Vector<Scalar> forecast(n);
    for (Index i = 0; i < n; ++i) forecast[i] = static_cast<Scalar>(std::exp(log_spread(rng)));
    auto a = SparseConstraintMatrix<Scalar>::from_triplets(k, n, triplets);
    const DiagonalWeights<Scalar> w(forecast.cwiseInverse());
    Vector<Scalar> y;
    try {
      y = lsqr_closed_form(a, w, forecast).y;
    } catch (const SingularError&) {
      continue;
    }
    if (y.minCoeff() < Scalar(-1e-9) * forecast.maxCoeff()) {
      return NonnegCounterexample<Scalar>{std::move(a), std::move(forecast), std::move(y), trial};
    }
  }
  return std::nullopt;
}

}  // namespace recon
