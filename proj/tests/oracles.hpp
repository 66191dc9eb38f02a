#pragma once

// Dense reference computations, written independently of the sparse code
// paths they check.

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "recon/sparse_core.hpp"

namespace oracle {

using Dense = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

struct KktPair {
  Vec y;
  Vec lambda;
};

/// [[H, A^T], [A, 0]] [y; lambda] = [rhs_top; 0], assembled in full.
inline KktPair block_solve(const Dense& a, const Vec& h_diag, const Vec& rhs_top) {
  const Eigen::Index k = a.rows(), n = a.cols();
  Dense m = Dense::Zero(n + k, n + k);
  m.topLeftCorner(n, n) = h_diag.asDiagonal();
  m.topRightCorner(n, k) = a.transpose();
  m.bottomLeftCorner(k, n) = a;
  Vec rhs = Vec::Zero(n + k);
  rhs.head(n) = rhs_top;
  const Vec sol = m.fullPivLu().solve(rhs);
  return {sol.head(n), sol.tail(k)};
}

/// Equality-only weighted least squares: W y + A^T lambda = W yhat, A y = 0.
inline KktPair weighted_lsqr(const Dense& a, const Vec& w, const Vec& yhat) {
  return block_solve(a, w, w.cwiseProduct(yhat));
}

/// Per-entry formula for disjoint row supports: entry n in the support of
/// row l moves by a_ln / w_n * (a_l . yhat) / sum_m a_lm^2 / w_m; other
/// entries keep yhat.
inline Vec disjoint_entries(const Dense& a, const Vec& w, const Vec& yhat) {
  Vec y = yhat;
  for (Eigen::Index l = 0; l < a.rows(); ++l) {
    double num = 0.0, den = 0.0;
    for (Eigen::Index m = 0; m < a.cols(); ++m) {
      num += a(l, m) * yhat[m];
      den += a(l, m) * a(l, m) / w[m];
    }
    for (Eigen::Index n = 0; n < a.cols(); ++n) {
      if (a(l, n) != 0.0) y[n] = yhat[n] - a(l, n) / w[n] * num / den;
    }
  }
  return y;
}

inline double objective(const Vec& y, const Vec& yhat, const Vec& w) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) s += w[i] * (y[i] - yhat[i]) * (y[i] - yhat[i]);
  return s;
}

/// Plain 2^N enumeration: for each zero set S, minimize over {A y = 0, y_S = 0}
/// with a least-squares KKT solve, keep feasible candidates, return the best.
/// Meant for N <= 12.
inline Vec enumerate_qp(const Dense& a, const Vec& w, const Vec& yhat) {
  const Eigen::Index n = a.cols();
  Vec best = Vec::Zero(n);
  double best_obj = objective(best, yhat, w);
  const double tol = 1e-9 * (1.0 + yhat.cwiseAbs().maxCoeff());
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    std::vector<Eigen::Index> zeros;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (mask & (1u << i)) zeros.push_back(i);
    }
    const Eigen::Index k = a.rows() + static_cast<Eigen::Index>(zeros.size());
    Dense b = Dense::Zero(k, n);
    b.topRows(a.rows()) = a;
    for (std::size_t z = 0; z < zeros.size(); ++z) b(a.rows() + static_cast<Eigen::Index>(z), zeros[z]) = 1.0;
    // Substitute y = D^-1/2 x: min ||x - D^1/2 yhat||^2 subject to B D^-1/2 x = 0.
    const Vec s = w.cwiseSqrt();
    const Dense bs = b * s.cwiseInverse().asDiagonal();
    const Vec target = s.cwiseProduct(yhat);
    const Eigen::CompleteOrthogonalDecomposition<Dense> cod(bs.transpose());
    const Vec x = target - bs.transpose() * cod.solve(target);
    const Vec y = x.cwiseQuotient(s);
    if (y.minCoeff() < -tol) continue;
    if ((a * y).norm() > tol) continue;
    const double obj = objective(y, yhat, w);
    if (obj < best_obj) {
      best_obj = obj;
      best = y.cwiseMax(0.0);
    }
  }
  return best;
}

struct Multipliers {
  Vec lambda;
  Vec mu;             // nonnegative, zero off the active set of y*
  double residual;    // ||2W(y* - yhat) + A^T lambda - mu||
};

/// Lawson-Hanson: min ||C x - d|| subject to x >= 0.
inline Vec nnls(const Dense& c, const Vec& d) {
  const Eigen::Index m = c.cols();
  Vec x = Vec::Zero(m);
  if (m == 0) return x;
  std::vector<bool> passive(static_cast<std::size_t>(m), false);
  const double tol = 1e-12 * (1.0 + c.cwiseAbs().maxCoeff() * (1.0 + d.cwiseAbs().maxCoeff()));
  auto solve_passive = [&]() {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (passive[static_cast<std::size_t>(i)]) idx.push_back(i);
    }
    Dense cp(c.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) cp.col(static_cast<Eigen::Index>(j)) = c.col(idx[j]);
    const Vec sp = cp.completeOrthogonalDecomposition().solve(d);
    Vec s = Vec::Zero(m);
    for (std::size_t j = 0; j < idx.size(); ++j) s[idx[j]] = sp[static_cast<Eigen::Index>(j)];
    return s;
  };
  for (int outer = 0; outer < 10 * m + 10; ++outer) {
    const Vec grad = c.transpose() * (d - c * x);
    Eigen::Index best = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (!passive[static_cast<std::size_t>(i)] && grad[i] > tol && (best < 0 || grad[i] > grad[best])) best = i;
    }
    if (best < 0) break;
    passive[static_cast<std::size_t>(best)] = true;
    for (;;) {
      const Vec s = solve_passive();
      double alpha = 1.0;
      bool clipped = false;
      for (Eigen::Index i = 0; i < m; ++i) {
        if (passive[static_cast<std::size_t>(i)] && s[i] <= 0.0) {
          clipped = true;
          alpha = std::min(alpha, x[i] / (x[i] - s[i]));
        }
      }
      if (!clipped) {
        x = s;
        break;
      }
      x += alpha * (s - x);
      for (Eigen::Index i = 0; i < m; ++i) {
        if (passive[static_cast<std::size_t>(i)] && x[i] <= tol) {
          passive[static_cast<std::size_t>(i)] = false;
          x[i] = 0.0;
        }
      }
    }
  }
  return x;
}

/// KKT multipliers of a claimed optimum y*: 2W(y* - yhat) + A^T lambda - mu = 0
/// with mu >= 0 supported on {y*_i ~ 0}. lambda is eliminated by projecting onto
/// null(A), leaving a nonnegative least-squares problem for mu.
inline Multipliers kkt_multipliers(const Dense& a, const Vec& w, const Vec& yhat, const Vec& ystar) {
  const Eigen::Index n = a.cols();
  std::vector<Eigen::Index> active;
  const double zero_tol = 1e-9 * (1.0 + yhat.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(ystar[i]) <= zero_tol) active.push_back(i);
  }
  const Eigen::Index m = static_cast<Eigen::Index>(active.size());
  const Vec grad = 2.0 * w.cwiseProduct(ystar - yhat);
  const Dense p = Dense::Identity(n, n) - a.transpose() * (a * a.transpose()).ldlt().solve(a);
  Dense es = Dense::Zero(n, m);
  for (Eigen::Index j = 0; j < m; ++j) es(active[static_cast<std::size_t>(j)], j) = 1.0;
  const Vec mu_s = nnls(p * es, p * grad);
  Vec mu = Vec::Zero(n);
  for (Eigen::Index j = 0; j < m; ++j) mu[active[static_cast<std::size_t>(j)]] = mu_s[j];
  const Vec lambda = (a * a.transpose()).ldlt().solve(a * (mu - grad));
  return {lambda, mu, (grad + a.transpose() * lambda - mu).norm()};
}

/// Convexity gives f(y) >= f(y*) - ||mu|| ||(y)_-|| - ||lambda|| ||A y|| for any y,
/// so an approximately feasible point may undercut the optimum by at most this much.
inline double infeasibility_slack(const Multipliers& m, const Dense& a, const Vec& y) {
  return m.mu.norm() * y.cwiseMin(0.0).norm() + m.lambda.norm() * (a * y).norm();
}

/// Random K x N matrix with entries in {-1, 0, +1}, no empty rows, full row rank.
inline Dense random_signed_matrix(std::mt19937_64& rng, Eigen::Index k, Eigen::Index n,
                                  double density = 0.4) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (;;) {
    Dense a = Dense::Zero(k, n);
    for (Eigen::Index r = 0; r < k; ++r) {
      for (Eigen::Index c = 0; c < n; ++c) {
        if (u(rng) < density) a(r, c) = u(rng) < 0.5 ? -1.0 : 1.0;
      }
      if (a.row(r).cwiseAbs().sum() == 0.0) a(r, static_cast<Eigen::Index>(u(rng) * n) % n) = 1.0;
    }
    Eigen::FullPivLU<Dense> lu(a);
    if (lu.rank() == k) return a;
  }
}

inline Vec random_positive(std::mt19937_64& rng, Eigen::Index n, double lo = 0.5, double hi = 100.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

inline double max_rel_err(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) m = std::max(m, rel_err(a[i], b[i]));
  return m;
}

}  // namespace oracle
