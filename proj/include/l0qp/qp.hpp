// Copyright (c) l0qp contributors. Licensed under the Apache License 2.0.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "l0qp/problem.hpp"

namespace l0qp {

/// Outcome of a strictly convex QP solve.
struct QpResult {
  Vec x;
  Vec dual;  // one multiplier per constraint row, >= 0
  double residual = std::numeric_limits<double>::infinity();
  int iters = 0;
  bool optimal = false;
  bool infeasible = false;
};

/// Dual active-set method (Goldfarb-Idnani) for
///
///   min 1/2 x'Qx + c'x   s.t.   G x >= h,
///
/// with Q symmetric positive definite. Starts from the unconstrained
/// minimizer, so no feasible initial point is needed, and detects infeasible
/// constraint systems. Factorizations are recomputed per step; fine at desk
/// scale.
inline QpResult solve_qp(const Mat& Q, const Vec& c, const Mat& G, const Vec& h,
                         int max_iter = 0, double tol = 1e-10) {
  const int d = static_cast<int>(Q.rows());
  const int rows = static_cast<int>(G.rows());
  if (Q.cols() != d || c.size() != d || (rows > 0 && G.cols() != d) ||
      h.size() != rows)
    throw std::invalid_argument("solve_qp: inconsistent shapes");
  if (d == 0) {
    QpResult empty;
    empty.x.resize(0);
    empty.dual = Vec::Zero(rows);
    empty.infeasible = rows > 0 && h.maxCoeff() > 0.0;
    empty.optimal = !empty.infeasible;
    empty.residual = 0.0;
    return empty;
  }
  if (max_iter <= 0) max_iter = 10 * (d + rows) + 50;

  Eigen::LLT<Mat> llt(Q);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("solve_qp: Q is not positive definite");

  QpResult result;
  result.x = llt.solve(-c);
  result.dual = Vec::Zero(rows);
  if (rows == 0) {
    result.optimal = true;
    result.residual = 0.0;
    return result;
  }

  const double hscale = 1.0 + h.cwiseAbs().maxCoeff();
  const double feas_eps = 1e-11 * hscale;

  std::vector<int> active;
  Vec u(0);  // duals aligned with `active`

  auto in_active = [&](int i) {
    return std::find(active.begin(), active.end(), i) != active.end();
  };

  int iter = 0;
  while (iter < max_iter) {
    // Most violated inactive constraint.
    int p = -1;
    double worst = -feas_eps;
    for (int i = 0; i < rows; ++i) {
      if (in_active(i)) continue;
      const double slack = G.row(i).dot(result.x) - h[i];
      if (slack < worst) {
        worst = slack;
        p = i;
      }
    }
    if (p < 0) {
      result.optimal = true;
      break;
    }

    const Vec np = G.row(p).transpose();
    double up = 0.0;  // dual of the incoming constraint

    while (iter < max_iter) {
      ++iter;
      const int k = static_cast<int>(active.size());
      const Vec qinv_np = llt.solve(np);
      Vec z;
      Vec r(k);
      if (k == 0) {
        z = qinv_np;
      } else {
        Mat Nw(k, d);
        for (int j = 0; j < k; ++j) Nw.row(j) = G.row(active[j]);
        const Mat B = llt.solve(Nw.transpose());  // d x k
        const Mat S = Nw * B;                     // k x k
        r = Eigen::LDLT<Mat>(S).solve(Nw * qinv_np);
        z = qinv_np - B * r;
      }

      double t1 = std::numeric_limits<double>::infinity();
      int blocking = -1;
      for (int j = 0; j < k; ++j) {
        if (r[j] > 1e-14) {
          const double step = u[j] / r[j];
          if (step < t1) {
            t1 = step;
            blocking = j;
          }
        }
      }
      const double along = np.dot(z);
      const double slack_p = G.row(p).dot(result.x) - h[p];
      double t2 = std::numeric_limits<double>::infinity();
      if (along > 1e-13 * (1.0 + np.squaredNorm())) t2 = -slack_p / along;
      const double t = std::min(t1, t2);

      if (!std::isfinite(t)) {
        result.infeasible = true;
        result.iters = iter;
        return result;
      }

      if (std::isfinite(t2)) result.x += t * z;
      for (int j = 0; j < k; ++j) u[j] -= t * r[j];
      up += t;

      if (t == t2 && std::isfinite(t2)) {
        active.push_back(p);
        Vec u2(k + 1);
        u2.head(k) = u;
        u2[k] = up;
        u = u2;
        break;
      }
      // Dual step hit zero first: drop the blocking constraint and retry.
      active.erase(active.begin() + blocking);
      Vec u2(k - 1);
      for (int j = 0, t2i = 0; j < k; ++j)
        if (j != blocking) u2[t2i++] = u[j];
      u = u2;
    }
  }

  for (size_t j = 0; j < active.size(); ++j) result.dual[active[j]] = u[j];
  result.iters = iter;

  // KKT-based residual certificate.
  const Vec stat = Q * result.x + c - G.transpose() * result.dual;
  double comp = 0.0;
  double infeas = 0.0;
  for (int i = 0; i < rows; ++i) {
    const double slack = G.row(i).dot(result.x) - h[i];
    comp = std::max(comp, std::abs(result.dual[i] * slack));
    infeas = std::max(infeas, -slack);
  }
  result.residual = std::max({stat.lpNorm<Eigen::Infinity>(), comp, infeas});
  if (!result.optimal && result.residual <= tol) result.optimal = true;
  return result;
}

/// Lawson-Hanson nonnegative least squares: min ||Ax - b|| s.t. x >= 0.
inline Vec nnls(const Mat& A, const Vec& b, int max_iter = 0, double tol = 0.0) {
  const int d = static_cast<int>(A.cols());
  if (max_iter <= 0) max_iter = 3 * d + 30;
  if (tol <= 0.0) tol = 1e-12 * (1.0 + b.cwiseAbs().sum());

  Vec x = Vec::Zero(d);
  std::vector<bool> passive(d, false);
  int iter = 0;
  while (iter++ < max_iter) {
    const Vec grad = A.transpose() * (b - A * x);
    int j = -1;
    double best = tol;
    for (int i = 0; i < d; ++i) {
      if (!passive[i] && grad[i] > best) {
        best = grad[i];
        j = i;
      }
    }
    if (j < 0) break;
    passive[j] = true;

    for (;;) {
      std::vector<int> idx;
      for (int i = 0; i < d; ++i)
        if (passive[i]) idx.push_back(i);
      Mat Ap(A.rows(), idx.size());
      for (size_t t = 0; t < idx.size(); ++t) Ap.col(t) = A.col(idx[t]);
      const Vec z = Ap.colPivHouseholderQr().solve(b);
      bool all_pos = true;
      for (int t = 0; t < z.size(); ++t)
        if (z[t] <= 0.0) all_pos = false;
      if (all_pos) {
        x.setZero();
        for (size_t t = 0; t < idx.size(); ++t) x[idx[t]] = z[t];
        break;
      }
      double alpha = 1.0;
      for (size_t t = 0; t < idx.size(); ++t) {
        if (z[t] <= 0.0) {
          const double xi = x[idx[t]];
          if (xi - z[t] > 0.0) alpha = std::min(alpha, xi / (xi - z[t]));
        }
      }
      for (size_t t = 0; t < idx.size(); ++t) {
        x[idx[t]] += alpha * (z[t] - x[idx[t]]);
        if (x[idx[t]] <= 1e-14) {
          x[idx[t]] = 0.0;
          passive[idx[t]] = false;
        }
      }
    }
  }
  return x;
}

}  // namespace l0qp
