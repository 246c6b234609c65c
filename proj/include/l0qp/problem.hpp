// Copyright (c) l0qp contributors. Licensed under the Apache License 2.0.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace l0qp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Numerical zero used when counting nonzeros of a vector. Chosen far below
/// the data scale of the bundled instance generator and above accumulated
/// rounding of desk-scale solves.
inline constexpr double kZeroTol = 1e-9;

/// Smooth convex-quadratic term g(x) = 0.5 x'Px + c'x.
struct QuadTerm {
  Mat P;
  Vec c;
};

/// The penalized program
///
///   min  x'Mx + lin'x + g(x) + gamma * ||x||_0   s.t.  Ax >= b,
///
/// with M symmetric (possibly indefinite) and g convex quadratic when
/// present. Note the quadratic carries no 1/2 factor; a least-squares fit
/// ||Cx - obs||^2 maps to M = C'C, lin = -2 C'obs with the constant obs'obs
/// kept in `offset` for reporting only.
struct Problem {
  int n = 0;
  Mat M;
  Vec lin;
  double gamma = 0.0;
  std::optional<QuadTerm> g_quad;
  std::optional<Mat> A;
  std::optional<Vec> b;
  double offset = 0.0;  // report-only constant, never enters the solves

  bool has_constraints() const { return A.has_value(); }
  int m() const { return A ? static_cast<int>(A->rows()) : 0; }

  /// Smooth part f(x) = x'Mx + lin'x + g(x), without offset or penalty.
  double f_smooth(const Vec& x) const {
    double v = x.dot(M * x) + lin.dot(x);
    if (g_quad) v += 0.5 * x.dot(g_quad->P * x) + g_quad->c.dot(x);
    return v;
  }

  Vec grad_f(const Vec& x) const {
    Vec g = 2.0 * (M * x) + lin;
    if (g_quad) g += g_quad->P * x + g_quad->c;
    return g;
  }

  /// Hessian of the smooth part, 2M (+ P).
  Mat hess_f() const {
    Mat h = 2.0 * M;
    if (g_quad) h += g_quad->P;
    return h;
  }

  void validate() const {
    if (n <= 0) throw std::invalid_argument("problem: n must be positive");
    if (M.rows() != n || M.cols() != n)
      throw std::invalid_argument("problem: M must be n x n");
    if (lin.size() != n) throw std::invalid_argument("problem: lin must have length n");
    const double asym = (M - M.transpose()).norm();
    if (asym > 1e-12 * (1.0 + M.norm()))
      throw std::invalid_argument("problem: M is not symmetric");
    if (!(gamma >= 0.0))
      throw std::invalid_argument("problem: gamma must be nonnegative");
    if (g_quad) {
      if (g_quad->P.rows() != n || g_quad->P.cols() != n || g_quad->c.size() != n)
        throw std::invalid_argument("problem: g_quad shapes inconsistent");
      const double psym = (g_quad->P - g_quad->P.transpose()).norm();
      if (psym > 1e-12 * (1.0 + g_quad->P.norm()))
        throw std::invalid_argument("problem: g_quad.P is not symmetric");
      Eigen::SelfAdjointEigenSolver<Mat> es(g_quad->P);
      if (es.eigenvalues().minCoeff() < -1e-10 * (1.0 + g_quad->P.norm()))
        throw std::invalid_argument("problem: g_quad.P is not positive semidefinite");
    }
    if (A.has_value() != b.has_value())
      throw std::invalid_argument("problem: A and b must be given together");
    if (A) {
      if (A->cols() != n) throw std::invalid_argument("problem: A must have n columns");
      if (b->size() != A->rows())
        throw std::invalid_argument("problem: b length must match rows of A");
    }
  }
};

/// Primal triple (x+, x-, xi) of the complementarity reformulation. No set
/// membership is intrinsic: the ADMM iterates satisfy Z1 and Z2 one at a
/// time by construction.
struct SplitPoint {
  Vec x_plus;
  Vec x_minus;
  Vec xi;

  int n() const { return static_cast<int>(x_plus.size()); }

  Vec stack() const {
    Vec v(3 * n());
    v << x_plus, x_minus, xi;
    return v;
  }

  static SplitPoint from_stacked(const Vec& v) {
    const int n = static_cast<int>(v.size()) / 3;
    if (3 * n != v.size())
      throw std::invalid_argument("split point: stacked length must be 3n");
    return SplitPoint{v.head(n), v.segment(n, n), v.tail(n)};
  }

  static SplitPoint zero(int n) {
    return SplitPoint{Vec::Zero(n), Vec::Zero(n), Vec::Zero(n)};
  }

  Vec x() const { return x_plus - x_minus; }
};

struct FeasibilityReport {
  double max_violation = 0.0;
  std::vector<std::pair<std::string, double>> violated;  // only entries > tol
};

inline int count_l0(const Vec& x, double zero_tol = kZeroTol) {
  int count = 0;
  for (int i = 0; i < x.size(); ++i)
    if (std::abs(x[i]) > zero_tol) ++count;
  return count;
}

/// f(x) + gamma * ||x||_0 with the documented numerical-zero rule. The
/// report-only offset is not included.
inline double eval_objective(const Problem& p, const Vec& x) {
  if (x.size() != p.n) throw std::invalid_argument("eval_objective: dimension mismatch");
  return p.f_smooth(x) + p.gamma * count_l0(x);
}

/// Relaxed objective f(x+ - x-) + gamma * sum_i (1 - xi_i).
inline double eval_relaxed_objective(const Problem& p, const SplitPoint& w) {
  if (w.n() != p.n)
    throw std::invalid_argument("eval_relaxed_objective: dimension mismatch");
  return p.f_smooth(w.x()) + p.gamma * (static_cast<double>(p.n) - w.xi.sum());
}

/// Sign split x = x+ - x- with complementary parts, completed by the
/// selector xi_i = 1 exactly when x_i == 0. The exact-zero test keeps
/// (x+ + x-)'xi = 0 bitwise; kZeroTol applies only to l0 counting.
inline SplitPoint split(const Vec& x) {
  const int n = static_cast<int>(x.size());
  SplitPoint w = SplitPoint::zero(n);
  for (int i = 0; i < n; ++i) {
    if (x[i] > 0.0)
      w.x_plus[i] = x[i];
    else if (x[i] < 0.0)
      w.x_minus[i] = -x[i];
    else
      w.xi[i] = 1.0;
  }
  return w;
}

inline FeasibilityReport check_feasibility_Z1(const SplitPoint& w, double tol) {
  if (tol < 0) throw std::invalid_argument("check_feasibility_Z1: tol must be >= 0");
  FeasibilityReport report;
  const double violation = std::abs((w.x_plus + w.x_minus).dot(w.xi));
  if (violation > tol) {
    report.violated.emplace_back("Z1", violation);
    report.max_violation = violation;
  }
  return report;
}

inline FeasibilityReport check_feasibility_Z2(const SplitPoint& y, const Problem& p,
                                              double tol) {
  if (tol < 0) throw std::invalid_argument("check_feasibility_Z2: tol must be >= 0");
  FeasibilityReport report;
  auto flag = [&](const std::string& id, double magnitude) {
    if (magnitude > tol) {
      report.violated.emplace_back(id, magnitude);
      report.max_violation = std::max(report.max_violation, magnitude);
    }
  };
  for (int i = 0; i < y.n(); ++i) {
    flag("xplus[" + std::to_string(i) + "]", -y.x_plus[i]);
    flag("xminus[" + std::to_string(i) + "]", -y.x_minus[i]);
    flag("zeta[" + std::to_string(i) + "]-lb", -y.xi[i]);
    flag("zeta[" + std::to_string(i) + "]-ub", y.xi[i] - 1.0);
  }
  if (p.has_constraints()) {
    const Vec slack = (*p.A) * y.x() - *p.b;
    for (int j = 0; j < slack.size(); ++j)
      flag("row[" + std::to_string(j) + "]", -slack[j]);
  }
  return report;
}

/// Tightening map: keeps x+ - x- and xi while restoring (x+)'x- = 0.
/// The relaxed objective is unchanged and Z1/Z2 membership is preserved.
inline SplitPoint recover_tight(const SplitPoint& w, double tol = 1e-8) {
  const double scale = 1.0 + w.stack().squaredNorm();
  if (std::abs((w.x_plus + w.x_minus).dot(w.xi)) > tol * scale)
    throw std::invalid_argument("recover_tight: input violates Z1 beyond tolerance");
  for (int i = 0; i < w.n(); ++i) {
    if (w.x_plus[i] < -tol || w.x_minus[i] < -tol || w.xi[i] < -tol ||
        w.xi[i] > 1.0 + tol)
      throw std::invalid_argument("recover_tight: input violates bounds beyond tolerance");
  }
  SplitPoint out = SplitPoint::zero(w.n());
  out.xi = w.xi;
  for (int i = 0; i < w.n(); ++i) {
    if (w.x_plus[i] >= w.x_minus[i])
      out.x_plus[i] = w.x_plus[i] - w.x_minus[i];
    else
      out.x_minus[i] = w.x_minus[i] - w.x_plus[i];
  }
  return out;
}

/// Nondegeneracy: every vanished pair x+_i = x-_i = 0 must carry xi_i = 1.
inline bool is_nondegenerate(const SplitPoint& w, double tol) {
  for (int i = 0; i < w.n(); ++i)
    if (w.x_plus[i] + w.x_minus[i] <= tol && w.xi[i] < 1.0 - tol) return false;
  return true;
}

}  // namespace l0qp
