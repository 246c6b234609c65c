// Copyright (c) l0qp contributors. Licensed under the Apache License 2.0.

#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "l0qp/problem.hpp"
#include "l0qp/rng.hpp"
#include "l0qp/spectral.hpp"

namespace l0qp {

/// Direction selection for the degenerate branches of the closed form, where
/// a vanished q-block leaves the solution direction free on a sphere.
struct TieBreakPolicy {
  enum class Mode { canonical_e1, copy_partner, seeded_random };

  Mode mode = Mode::canonical_e1;
  std::uint64_t seed = 0;
  // Call counter for seeded_random; gives a reproducible sequence per solve.
  // A driver owns its own copy, so solves stay independent.
  mutable std::uint64_t draws = 0;

  static TieBreakPolicy canonical() { return TieBreakPolicy{}; }
  static TieBreakPolicy partner() { return TieBreakPolicy{Mode::copy_partner}; }
  static TieBreakPolicy random(std::uint64_t seed) {
    return TieBreakPolicy{Mode::seeded_random, seed};
  }

  /// Unit direction for a vanished block; `partner_dir` is the direction the
  /// opposite block took (unit norm), or zero when it also vanished.
  Vec direction(int n, const Vec& partner_dir) const {
    switch (mode) {
      case Mode::copy_partner:
        if (partner_dir.norm() > 0.5) return partner_dir;
        [[fallthrough]];  // both blocks vanished; fall back to e1
      case Mode::canonical_e1: {
        Vec u = Vec::Zero(n);
        u[0] = 1.0;
        return u;
      }
      case Mode::seeded_random: {
        Rng rng(seed ^ (0x9e3779b97f4a7c15ULL * ++draws), "tie-break");
        Vec u(n);
        double norm = 0.0;
        while (norm < 1e-12) {
          for (int i = 0; i < n; ++i) u[i] = rng.normal();
          norm = u.norm();
        }
        return u / norm;
      }
    }
    throw std::logic_error("tie break: unknown mode");
  }
};

/// Linear term of the w-subproblem, h = (lin; -lin; -gamma e) + lambda - rho y.
inline Vec build_h(const Problem& p, const SplitPoint& y, const Vec& lambda,
                   double rho) {
  if (!(rho > 0)) throw std::invalid_argument("build_h: rho must be > 0");
  if (y.n() != p.n || lambda.size() != 3 * p.n)
    throw std::invalid_argument("build_h: dimension mismatch");
  Vec h(3 * p.n);
  h.head(p.n) = p.lin;
  h.segment(p.n, p.n) = -p.lin;
  h.tail(p.n).setConstant(-p.gamma);
  h += lambda - rho * y.stack();
  return h;
}

namespace detail {

/// Closed-form global minimizer of
///   min_w  w'Hw + h'w   s.t.  (x+ + x-)' xi = 0,
/// computed in z = G'w coordinates:
///   z1 = -(||q1|| + ||q3||) q1 / (2 rho ||q1||)   (free direction if q1 = 0)
///   z3 =  symmetric in q3 / q1
///   z2_i = -q2_i / (rho + 4 s_i)
/// with q = G'h. Requires rho + 4 s_i > 0 so the objective is bounded below.
inline SplitPoint solve_w_core(const SpectralFactorization& f, const Vec& h,
                               double rho, const TieBreakPolicy& tb) {
  const int n = f.n;
  for (int i = 0; i < n; ++i)
    if (!(rho + 4.0 * f.s[i] > 0.0))
      throw std::invalid_argument(
          "w-subproblem: rho too small, objective unbounded below");

  const Vec q = f.apply_Gt(h);
  const auto q1 = q.head(n);
  const auto q2 = q.segment(n, n);
  const auto q3 = q.tail(n);
  const double nq1 = q1.norm();
  const double nq3 = q3.norm();
  const double zero_cut = 1e-14 * (1.0 + q.norm());
  const bool q1_zero = nq1 <= zero_cut;
  const bool q3_zero = nq3 <= zero_cut;

  Vec z(3 * n);
  if (!q1_zero && !q3_zero) {
    z.head(n) = -(nq1 + nq3) / (2.0 * rho * nq1) * q1;
    z.tail(n) = -(nq1 + nq3) / (2.0 * rho * nq3) * q3;
  } else if (q1_zero && q3_zero) {
    z.head(n).setZero();
    z.tail(n).setZero();
  } else if (q1_zero) {
    const Vec d3 = -q3 / nq3;
    z.tail(n) = (nq3 / (2.0 * rho)) * d3;
    z.head(n) = (nq3 / (2.0 * rho)) * tb.direction(n, d3);
  } else {
    const Vec d1 = -q1 / nq1;
    z.head(n) = (nq1 / (2.0 * rho)) * d1;
    z.tail(n) = (nq1 / (2.0 * rho)) * tb.direction(n, d1);
  }
  for (int i = 0; i < n; ++i) z[n + i] = -q2[i] / (rho + 4.0 * f.s[i]);

  return SplitPoint::from_stacked(f.apply_G(z));
}

}  // namespace detail

/// Update-1: global minimizer of the augmented Lagrangian over Z1 at (y,
/// lambda) with penalty rho. The nonconvex subproblem is solved exactly
/// through its hidden convexity.
inline SplitPoint solve_w_subproblem(const SpectralFactorization& f, const Problem& p,
                                     const SplitPoint& y, const Vec& lambda,
                                     double rho,
                                     const TieBreakPolicy& tb = TieBreakPolicy{}) {
  if (!(rho > min_valid_rho(f)))
    throw std::invalid_argument("solve_w_subproblem: rho must exceed min_valid_rho");
  return detail::solve_w_core(f, build_h(p, y, lambda, rho), rho, tb);
}

}  // namespace l0qp
