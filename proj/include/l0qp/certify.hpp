// Copyright (c) l0qp contributors. Licensed under the Apache License 2.0.

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "l0qp/admm.hpp"
#include "l0qp/problem.hpp"
#include "l0qp/qp.hpp"

namespace l0qp {

/// Active-set detection tolerance for multiplier recovery. Separate from
/// kZeroTol because dual recovery is more sensitive than l0 counting.
inline constexpr double kActTol = 1e-6;

/// Multipliers of the stationarity system: mu for the bilinear equality,
/// beta1..beta4 for the four bound families, pi for the polyhedral rows.
struct Multipliers {
  double mu = 0.0;
  Vec beta1, beta2, beta3, beta4;
  Vec pi;
};

struct KktReport {
  double stationarity_res = 0.0;
  double complementarity_res = 0.0;
  double feasibility_res = 0.0;
  bool nondegenerate = false;
  // Present only when a second-order check ran; +inf marks a vacuously
  // passing (empty) tangent subspace.
  double second_order_min_eig = std::numeric_limits<double>::quiet_NaN();
  // Perturbed certificates only: ||w - y - alpha lambda||.
  double feasibility_gap = std::numeric_limits<double>::quiet_NaN();
};

/// Residual read off a finished trace, matching the run's variant: the
/// adaptive scheme uses max(||w_K - y_K||, rho_{K-1}||y_K - y_{K-1}||) at the
/// final iteration; the perturbed scheme evaluates at its best-objective
/// iterate with the proximal term included in the dual part.
inline double kkt_residual_admm(const SolveTrace& trace) {
  if (trace.iters.size() < 2)
    throw std::invalid_argument("kkt_residual_admm: trace needs at least 2 iterations");
  if (trace.variant == Variant::admm_cf) {
    const IterRecord& last = trace.iters.back();
    return std::max(last.primal_res, last.dual_res);
  }
  const long k = std::max<long>(trace.best_k, 1);
  const IterRecord& rec = trace.iters[static_cast<std::size_t>(k - 1)];
  return std::max(rec.primal_res, rec.pert_dual);
}

namespace detail {

inline Vec gz_of(const SplitPoint& w) {
  Vec g(3 * w.n());
  g.head(w.n()) = w.xi;
  g.segment(w.n(), w.n()) = w.xi;
  g.tail(w.n()) = w.x_plus + w.x_minus;
  return g;
}

inline Vec grad_h_quad(const Problem& p, const SplitPoint& w) {
  const Vec gq = 2.0 * (p.M * w.x()) + p.lin;
  Vec g(3 * p.n);
  g.head(p.n) = gq;
  g.segment(p.n, p.n) = -gq;
  g.tail(p.n).setConstant(-p.gamma);
  return g;
}

inline Vec grad_g_stack(const Problem& p, const SplitPoint& y) {
  Vec g = Vec::Zero(3 * p.n);
  if (p.g_quad) {
    const Vec gg = p.g_quad->P * y.x() + p.g_quad->c;
    g.head(p.n) = gg;
    g.segment(p.n, p.n) = -gg;
  }
  return g;
}

}  // namespace detail

/// Recovers multipliers at a near-feasible ADMM limit (w ~ y): mu by
/// projecting the w-stationarity residual onto the bilinear-constraint
/// gradient (mu = 0 when that gradient vanishes, where the condition holds
/// for every mu), beta/pi from the y-subproblem's active constraints via
/// nonnegative least squares on the polyhedral rows.
inline Multipliers recover_multipliers(const Problem& p, const SplitPoint& w,
                                       const SplitPoint& y, const Vec& lambda,
                                       double /*rho*/, double act_tol = kActTol) {
  const int n = p.n;
  const int m = p.m();
  Multipliers mult;
  mult.beta1 = Vec::Zero(n);
  mult.beta2 = Vec::Zero(n);
  mult.beta3 = Vec::Zero(n);
  mult.beta4 = Vec::Zero(n);
  mult.pi = Vec::Zero(m);

  const Vec gz = detail::gz_of(w);
  const double gz_norm2 = gz.squaredNorm();
  if (gz_norm2 > 1e-24 * (1.0 + w.stack().squaredNorm())) {
    const Vec stat_w = detail::grad_h_quad(p, w) + lambda;
    mult.mu = -gz.dot(stat_w) / gz_norm2;
  }

  // t carries what the bound/polyhedral multipliers must reproduce:
  // t1 = beta1 + A'pi, t2 = beta2 - A'pi, t3 = beta3 - beta4.
  const Vec t = detail::grad_g_stack(p, y) - lambda;

  Vec At_pi = Vec::Zero(n);
  if (m > 0) {
    const Vec slack = (*p.A) * y.x() - *p.b;
    std::vector<int> act_rows;
    for (int j = 0; j < m; ++j)
      if (std::abs(slack[j]) <= act_tol * (1.0 + std::abs((*p.b)[j])))
        act_rows.push_back(j);
    if (!act_rows.empty()) {
      // Fit pi >= 0 on rows where the bound multiplier is forced to zero.
      std::vector<int> free_rows;
      for (int i = 0; i < n; ++i) {
        if (y.x_plus[i] > act_tol) free_rows.push_back(i);
        if (y.x_minus[i] > act_tol) free_rows.push_back(n + i);
      }
      Mat Als(free_rows.size(), act_rows.size());
      Vec bls(free_rows.size());
      for (std::size_t r = 0; r < free_rows.size(); ++r) {
        const int pos = free_rows[r];
        const int i = pos % n;
        const double sign = pos < n ? 1.0 : -1.0;
        for (std::size_t c = 0; c < act_rows.size(); ++c)
          Als(r, c) = sign * (*p.A)(act_rows[c], i);
        bls[r] = pos < n ? t[i] : -t[n + i];
      }
      const Vec pi_act = nnls(Als, bls);
      for (std::size_t c = 0; c < act_rows.size(); ++c) mult.pi[act_rows[c]] = pi_act[c];
      At_pi = p.A->transpose() * mult.pi;
    }
  }

  for (int i = 0; i < n; ++i) {
    if (y.x_plus[i] <= act_tol) mult.beta1[i] = std::max(t[i] - At_pi[i], 0.0);
    if (y.x_minus[i] <= act_tol) mult.beta2[i] = std::max(t[n + i] + At_pi[i], 0.0);
    if (y.xi[i] <= act_tol) mult.beta3[i] = std::max(t[2 * n + i], 0.0);
    if (y.xi[i] >= 1.0 - act_tol) mult.beta4[i] = std::max(-t[2 * n + i], 0.0);
  }
  return mult;
}

/// Multiplier fit from a single point, with no dual information: minimizes
/// the stationarity residual over mu free and beta/pi >= 0 on the point's
/// active sets. Used to certify points coming from non-ADMM methods.
inline Multipliers recover_multipliers_direct(const Problem& p, const SplitPoint& w,
                                              double act_tol = kActTol) {
  const int n = p.n;
  const int m = p.m();
  const Vec base = [&] {
    const Vec gf = p.grad_f(w.x());
    Vec v(3 * n);
    v.head(n) = gf;
    v.segment(n, n) = -gf;
    v.tail(n).setConstant(-p.gamma);
    return v;
  }();
  const Vec gz = detail::gz_of(w);

  std::vector<Vec> cols;
  enum class Kind { mu_pos, mu_neg, b1, b2, b3, b4, pi };
  std::vector<std::pair<Kind, int>> labels;
  cols.push_back(gz);
  labels.emplace_back(Kind::mu_pos, -1);
  cols.push_back(-gz);
  labels.emplace_back(Kind::mu_neg, -1);
  auto unit_col = [&](int pos, double value) {
    Vec c = Vec::Zero(3 * n);
    c[pos] = value;
    return c;
  };
  for (int i = 0; i < n; ++i) {
    if (w.x_plus[i] <= act_tol) {
      cols.push_back(unit_col(i, -1.0));
      labels.emplace_back(Kind::b1, i);
    }
    if (w.x_minus[i] <= act_tol) {
      cols.push_back(unit_col(n + i, -1.0));
      labels.emplace_back(Kind::b2, i);
    }
    if (w.xi[i] <= act_tol) {
      cols.push_back(unit_col(2 * n + i, -1.0));
      labels.emplace_back(Kind::b3, i);
    }
    if (w.xi[i] >= 1.0 - act_tol) {
      cols.push_back(unit_col(2 * n + i, 1.0));
      labels.emplace_back(Kind::b4, i);
    }
  }
  if (m > 0) {
    const Vec slack = (*p.A) * w.x() - *p.b;
    for (int j = 0; j < m; ++j) {
      if (std::abs(slack[j]) <= act_tol * (1.0 + std::abs((*p.b)[j]))) {
        Vec c(3 * n);
        c.head(n) = -p.A->row(j).transpose();
        c.segment(n, n) = p.A->row(j).transpose();
        c.tail(n).setZero();
        cols.push_back(c);
        labels.emplace_back(Kind::pi, j);
      }
    }
  }

  Mat Als(3 * n, cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) Als.col(c) = cols[c];
  const Vec coeff = nnls(Als, -base);

  Multipliers mult;
  mult.beta1 = Vec::Zero(n);
  mult.beta2 = Vec::Zero(n);
  mult.beta3 = Vec::Zero(n);
  mult.beta4 = Vec::Zero(n);
  mult.pi = Vec::Zero(m);
  for (std::size_t c = 0; c < labels.size(); ++c) {
    const auto [kind, idx] = labels[c];
    switch (kind) {
      case Kind::mu_pos: mult.mu += coeff[c]; break;
      case Kind::mu_neg: mult.mu -= coeff[c]; break;
      case Kind::b1: mult.beta1[idx] = coeff[c]; break;
      case Kind::b2: mult.beta2[idx] = coeff[c]; break;
      case Kind::b3: mult.beta3[idx] = coeff[c]; break;
      case Kind::b4: mult.beta4[idx] = coeff[c]; break;
      case Kind::pi: mult.pi[idx] = coeff[c]; break;
    }
  }
  return mult;
}

/// Residuals of the first-order stationarity system evaluated at w with the
/// given multipliers: infinity norm of the 3n stationarity rows, worst
/// complementarity product, and the Z1/Z2 feasibility violation of w.
inline KktReport first_order_kkt_residual(const Problem& p, const SplitPoint& w,
                                          const Multipliers& mult) {
  const int n = p.n;
  if (w.n() != n) throw std::invalid_argument("first_order_kkt_residual: dimensions");
  const Vec gf = p.grad_f(w.x());
  Vec stat(3 * n);
  stat.head(n) = gf - mult.beta1;
  stat.segment(n, n) = -gf - mult.beta2;
  stat.tail(n) = Vec::Constant(n, -p.gamma) + mult.beta4 - mult.beta3;
  stat += mult.mu * detail::gz_of(w);
  if (p.has_constraints()) {
    const Vec at_pi = p.A->transpose() * mult.pi;
    stat.head(n) -= at_pi;
    stat.segment(n, n) += at_pi;
  }

  KktReport report;
  report.stationarity_res = stat.lpNorm<Eigen::Infinity>();
  double comp = 0.0;
  for (int i = 0; i < n; ++i) {
    comp = std::max(comp, std::abs(mult.beta1[i] * w.x_plus[i]));
    comp = std::max(comp, std::abs(mult.beta2[i] * w.x_minus[i]));
    comp = std::max(comp, std::abs(mult.beta3[i] * w.xi[i]));
    comp = std::max(comp, std::abs(mult.beta4[i] * (1.0 - w.xi[i])));
  }
  if (p.has_constraints()) {
    const Vec slack = (*p.A) * w.x() - *p.b;
    for (int j = 0; j < p.m(); ++j)
      comp = std::max(comp, std::abs(mult.pi[j] * slack[j]));
  }
  report.complementarity_res = comp;
  report.feasibility_res = std::max(check_feasibility_Z1(w, 0.0).max_violation,
                                    check_feasibility_Z2(w, p, 0.0).max_violation);
  report.nondegenerate = is_nondegenerate(w, kActTol);
  return report;
}

/// Semantic alias for certification reports.
inline bool is_kkt_nondegenerate(const SplitPoint& w, double tol) {
  return is_nondegenerate(w, tol);
}

/// Minimum eigenvalue of the Lagrangian Hessian restricted to the tangent
/// subspace of the active constraints. A value >= -tol certifies the
/// second-order condition; with convex f this certifies local minimality.
/// Returns +inf when every direction is active (vacuous pass).
///
/// Active constraints are detected at max(kActTol, tol) so that a point
/// certified at residual tol has its near-binary selector rows included.
inline double second_order_check(const Problem& p, const SplitPoint& w,
                                 const Multipliers& mult, double tol) {
  const KktReport first = first_order_kkt_residual(p, w, mult);
  if (first.stationarity_res > tol)
    throw std::invalid_argument("second_order_check: first-order residual exceeds tol");
  const double act = std::max(kActTol, tol);
  if (!is_nondegenerate(w, act))
    throw std::invalid_argument("second_order_check: point is degenerate");

  const int n = p.n;
  std::vector<Vec> rows;
  rows.push_back(detail::gz_of(w));
  auto unit_row = [&](int pos) {
    Vec r = Vec::Zero(3 * n);
    r[pos] = 1.0;
    return r;
  };
  for (int i = 0; i < n; ++i) {
    if (w.x_plus[i] <= act) rows.push_back(unit_row(i));
    if (w.x_minus[i] <= act) rows.push_back(unit_row(n + i));
    if (w.xi[i] <= act || w.xi[i] >= 1.0 - act) rows.push_back(unit_row(2 * n + i));
  }
  if (p.has_constraints()) {
    const Vec slack = (*p.A) * w.x() - *p.b;
    for (int j = 0; j < p.m(); ++j) {
      if (std::abs(slack[j]) <= act * (1.0 + std::abs((*p.b)[j]))) {
        Vec r(3 * n);
        r.head(n) = p.A->row(j).transpose();
        r.segment(n, n) = -p.A->row(j).transpose();
        r.tail(n).setZero();
        rows.push_back(r);
      }
    }
  }

  Mat R(rows.size(), 3 * n);
  for (std::size_t r = 0; r < rows.size(); ++r) R.row(r) = rows[r];
  Eigen::JacobiSVD<Mat> svd(R, Eigen::ComputeFullV);
  const double sigma_max = svd.singularValues().size() ? svd.singularValues()[0] : 0.0;
  int rank = 0;
  for (int i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > 1e-10 * sigma_max) ++rank;
  const int null_dim = 3 * n - rank;
  if (null_dim == 0) return std::numeric_limits<double>::infinity();
  const Mat B = svd.matrixV().rightCols(null_dim);

  const Mat Hf = p.hess_f();
  Mat H = Mat::Zero(3 * n, 3 * n);
  H.block(0, 0, n, n) = Hf;
  H.block(0, n, n, n) = -Hf;
  H.block(n, 0, n, n) = -Hf;
  H.block(n, n, n, n) = Hf;
  const Mat muI = mult.mu * Mat::Identity(n, n);
  H.block(0, 2 * n, n, n) += muI;
  H.block(n, 2 * n, n, n) += muI;
  H.block(2 * n, 0, n, n) += muI;
  H.block(2 * n, n, n, n) += muI;

  Eigen::SelfAdjointEigenSolver<Mat> es(B.transpose() * H * B);
  return es.eigenvalues().minCoeff();
}

/// Residuals of the perturbed stationarity system at a limit of the
/// perturbed scheme: stationarity mixes the quadratic gradient at w with the
/// smooth-convex gradient at y, complementarity holds on y, and the
/// feasibility gap ||w - y - alpha lambda|| is reported separately.
inline KktReport perturbed_kkt_residual(const Problem& p, const SplitPoint& w,
                                        const SplitPoint& y, const Vec& lambda,
                                        double alpha) {
  const int n = p.n;
  const Multipliers mult = recover_multipliers(p, w, y, lambda, 0.0);

  const Vec gq = 2.0 * (p.M * w.x()) + p.lin;
  Vec gmix(n);
  if (p.g_quad)
    gmix = gq + p.g_quad->P * y.x() + p.g_quad->c;
  else
    gmix = gq;
  Vec stat(3 * n);
  stat.head(n) = gmix - mult.beta1;
  stat.segment(n, n) = -gmix - mult.beta2;
  stat.tail(n) = Vec::Constant(n, -p.gamma) + mult.beta4 - mult.beta3;
  stat += mult.mu * detail::gz_of(w);
  if (p.has_constraints()) {
    const Vec at_pi = p.A->transpose() * mult.pi;
    stat.head(n) -= at_pi;
    stat.segment(n, n) += at_pi;
  }

  KktReport report;
  report.stationarity_res = stat.lpNorm<Eigen::Infinity>();
  double comp = 0.0;
  for (int i = 0; i < n; ++i) {
    comp = std::max(comp, std::abs(mult.beta1[i] * y.x_plus[i]));
    comp = std::max(comp, std::abs(mult.beta2[i] * y.x_minus[i]));
    comp = std::max(comp, std::abs(mult.beta3[i] * y.xi[i]));
    comp = std::max(comp, std::abs(mult.beta4[i] * (1.0 - y.xi[i])));
  }
  if (p.has_constraints()) {
    const Vec slack = (*p.A) * y.x() - *p.b;
    for (int j = 0; j < p.m(); ++j)
      comp = std::max(comp, std::abs(mult.pi[j] * slack[j]));
  }
  report.complementarity_res = comp;
  report.feasibility_res = std::max(check_feasibility_Z1(w, 0.0).max_violation,
                                    check_feasibility_Z2(y, p, 0.0).max_violation);
  report.feasibility_gap = (w.stack() - y.stack() - alpha * lambda).norm();
  report.nondegenerate = is_nondegenerate(w, kActTol);
  return report;
}

}  // namespace l0qp
