// Copyright (c) l0qp contributors. Licensed under the Apache License 2.0.

#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "l0qp/problem.hpp"
#include "l0qp/qp.hpp"

namespace l0qp {

struct InnerSolverOptions {
  double tol = 1e-10;
  int max_iter = 0;  // 0: 10 * (3n + m)
};

struct InnerSolveInfo {
  double residual = 0.0;
  int iters = 0;
};

/// Update-2 in the unconstrained g == 0 case: componentwise projection of
/// w + lambda/rho onto the Cartesian set Z2.
inline SplitPoint solve_y_box(const SplitPoint& w, const Vec& lambda, double rho) {
  if (!(rho > 0)) throw std::invalid_argument("solve_y_box: rho must be > 0");
  const int n = w.n();
  if (lambda.size() != 3 * n)
    throw std::invalid_argument("solve_y_box: dimension mismatch");
  SplitPoint y = SplitPoint::zero(n);
  for (int i = 0; i < n; ++i) {
    y.x_plus[i] = std::max(w.x_plus[i] + lambda[i] / rho, 0.0);
    y.x_minus[i] = std::max(w.x_minus[i] + lambda[n + i] / rho, 0.0);
    y.xi[i] = std::clamp(w.xi[i] + lambda[2 * n + i] / rho, 0.0, 1.0);
  }
  return y;
}

namespace detail {

/// Assembles min_{y in Z2} g(y1 - y2) + (rho/2) ||w - y + lambda/rho||^2 as a
/// strictly convex QP over the stacked 3n-vector y.
inline void build_y_qp(const Problem& p, const SplitPoint& w, const Vec& lambda,
                       double rho, Mat& Q, Vec& c, Mat& G, Vec& h) {
  const int n = p.n;
  const int m = p.m();
  Q = rho * Mat::Identity(3 * n, 3 * n);
  c = -rho * w.stack() - lambda;
  if (p.g_quad) {
    Q.block(0, 0, n, n) += p.g_quad->P;
    Q.block(0, n, n, n) -= p.g_quad->P;
    Q.block(n, 0, n, n) -= p.g_quad->P;
    Q.block(n, n, n, n) += p.g_quad->P;
    c.head(n) += p.g_quad->c;
    c.segment(n, n) -= p.g_quad->c;
  }
  G = Mat::Zero(4 * n + m, 3 * n);
  h = Vec::Zero(4 * n + m);
  for (int i = 0; i < n; ++i) {
    G(i, i) = 1.0;                       // y1 >= 0
    G(n + i, n + i) = 1.0;               // y2 >= 0
    G(2 * n + i, 2 * n + i) = 1.0;       // zeta >= 0
    G(3 * n + i, 2 * n + i) = -1.0;      // zeta <= 1
    h[3 * n + i] = -1.0;
  }
  if (m > 0) {
    G.block(4 * n, 0, m, n) = *p.A;
    G.block(4 * n, n, m, n) = -(*p.A);
    h.tail(m) = *p.b;
  }
}

}  // namespace detail

/// Update-2 in the general case: the convex y-subproblem over Z2, strongly
/// convex with modulus rho, solved to the prescribed KKT residual. Falls back
/// to the closed-form projection when the problem is a plain box.
inline SplitPoint solve_y_general(const Problem& p, const SplitPoint& w,
                                  const Vec& lambda, double rho,
                                  const InnerSolverOptions& opts = {},
                                  InnerSolveInfo* info = nullptr) {
  if (!(rho > 0)) throw std::invalid_argument("solve_y_general: rho must be > 0");
  if (!(opts.tol > 0)) throw std::invalid_argument("solve_y_general: tol must be > 0");
  if (!p.has_constraints() && !p.g_quad) {
    if (info) *info = InnerSolveInfo{0.0, 0};
    return solve_y_box(w, lambda, rho);
  }
  Mat Q, G;
  Vec c, h;
  detail::build_y_qp(p, w, lambda, rho, Q, c, G, h);
  const int max_iter = opts.max_iter > 0 ? opts.max_iter : 10 * (3 * p.n + p.m());
  const QpResult sol = solve_qp(Q, c, G, h, max_iter, opts.tol);
  if (sol.infeasible)
    throw std::runtime_error("solve_y_general: Z2 is empty (Ax >= b infeasible)");
  if (info) *info = InnerSolveInfo{sol.residual, sol.iters};
  if (!sol.optimal || sol.residual > opts.tol) {
    std::ostringstream msg;
    msg << "solve_y_general: inner solver stopped at residual " << sol.residual
        << " after " << sol.iters << " iterations (target " << opts.tol << ")";
    throw std::runtime_error(msg.str());
  }
  return SplitPoint::from_stacked(sol.x);
}

/// Update-2 of the perturbed scheme. Minimizing
/// p(y) + (1 - rho alpha) lambda'(w - y - alpha lambda) + (rho/2)||w - y||^2
/// over Z2 equals the plain y-update with the damped dual (1 - rho alpha)
/// lambda, so it is implemented by that reduction.
inline SplitPoint solve_y_perturbed(const Problem& p, const SplitPoint& w,
                                    const Vec& lambda, double rho, double alpha,
                                    const InnerSolverOptions& opts = {},
                                    InnerSolveInfo* info = nullptr) {
  const double ra = rho * alpha;
  if (!(ra >= 0.0) || ra >= 1.0)
    throw std::invalid_argument("solve_y_perturbed: rho*alpha must lie in [0, 1)");
  return solve_y_general(p, w, (1.0 - ra) * lambda, rho, opts, info);
}

}  // namespace l0qp
