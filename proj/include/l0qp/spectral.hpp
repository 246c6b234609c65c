// Copyright (c) l0qp contributors. Licensed under the Apache License 2.0.

#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <utility>

#include "l0qp/problem.hpp"

namespace l0qp {

namespace detail {
inline constexpr double kHalfSqrt2 = 0.70710678118654752440;  // sqrt(2)/2
}

/// Eigen-pair of M together with the 3n x 3n orthogonal congruence
///
///   G = [ I/2      (sqrt2/2) I   I/2        ]
///       [ I/2     -(sqrt2/2) I   I/2        ] . blockdiag(I, V, I),
///       [-(sqrt2/2) I    0       (sqrt2/2) I]
///
/// which simultaneously diagonalizes the w-subproblem's quadratic H and the
/// bilinear constraint matrix. G is applied in structured form; `matrix()`
/// materializes it for verification at small sizes.
struct SpectralFactorization {
  int n = 0;
  Mat V;  // orthogonal, columns are eigenvectors of M
  Vec s;  // eigenvalues, ascending

  /// q = G'h for a stacked 3n-vector h.
  Vec apply_Gt(const Vec& h) const {
    if (h.size() != 3 * n)
      throw std::invalid_argument("apply_Gt: expected a 3n-vector");
    const auto h1 = h.head(n);
    const auto h2 = h.segment(n, n);
    const auto h3 = h.tail(n);
    Vec q(3 * n);
    q.head(n) = 0.5 * h1 + 0.5 * h2 - detail::kHalfSqrt2 * h3;
    q.segment(n, n) = V.transpose() * (detail::kHalfSqrt2 * (h1 - h2));
    q.tail(n) = 0.5 * h1 + 0.5 * h2 + detail::kHalfSqrt2 * h3;
    return q;
  }

  /// w = G z for a stacked 3n-vector z.
  Vec apply_G(const Vec& z) const {
    if (z.size() != 3 * n)
      throw std::invalid_argument("apply_G: expected a 3n-vector");
    const auto z1 = z.head(n);
    const Vec vz2 = V * z.segment(n, n);
    const auto z3 = z.tail(n);
    Vec w(3 * n);
    w.head(n) = 0.5 * z1 + detail::kHalfSqrt2 * vz2 + 0.5 * z3;
    w.segment(n, n) = 0.5 * z1 - detail::kHalfSqrt2 * vz2 + 0.5 * z3;
    w.tail(n) = -detail::kHalfSqrt2 * z1 + detail::kHalfSqrt2 * z3;
    return w;
  }

  /// Materialized G, for verification and tests.
  Mat matrix() const {
    Mat G = Mat::Zero(3 * n, 3 * n);
    const Mat I = Mat::Identity(n, n);
    G.block(0, 0, n, n) = 0.5 * I;
    G.block(0, n, n, n) = detail::kHalfSqrt2 * V;
    G.block(0, 2 * n, n, n) = 0.5 * I;
    G.block(n, 0, n, n) = 0.5 * I;
    G.block(n, n, n, n) = -detail::kHalfSqrt2 * V;
    G.block(n, 2 * n, n, n) = 0.5 * I;
    G.block(2 * n, 0, n, n) = -detail::kHalfSqrt2 * I;
    G.block(2 * n, 2 * n, n, n) = detail::kHalfSqrt2 * I;
    return G;
  }
};

/// Symmetric eigendecomposition of M. Eigenvalues come out ascending; each
/// eigenvector's sign is fixed by making its largest-magnitude entry positive
/// so repeated factorizations are identical.
inline SpectralFactorization factorize(const Mat& M) {
  if (M.rows() != M.cols()) throw std::invalid_argument("factorize: M must be square");
  Eigen::SelfAdjointEigenSolver<Mat> es(M);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("factorize: symmetric eigensolver failed to converge");
  SpectralFactorization f;
  f.n = static_cast<int>(M.rows());
  f.s = es.eigenvalues();
  f.V = es.eigenvectors();
  for (int j = 0; j < f.n; ++j) {
    int arg = 0;
    double best = 0.0;
    for (int i = 0; i < f.n; ++i) {
      const double a = std::abs(f.V(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (f.V(arg, j) < 0.0) f.V.col(j) = -f.V.col(j);
  }
  return f;
}

/// Frobenius residuals (r_H, r_Q) of the two diagonalization identities
/// G'HG = blockdiag(rho/2 I, 2S + rho/2 I, rho/2 I) and
/// G'QG = blockdiag(-sqrt2 I, 0, sqrt2 I).
inline std::pair<double, double> verify_diagonalization(const SpectralFactorization& f,
                                                        double rho) {
  if (!(rho > 0)) throw std::invalid_argument("verify_diagonalization: rho must be > 0");
  const int n = f.n;
  const Mat I = Mat::Identity(n, n);
  const Mat M = f.V * f.s.asDiagonal() * f.V.transpose();
  Mat H = Mat::Zero(3 * n, 3 * n);
  H.block(0, 0, n, n) = M + 0.5 * rho * I;
  H.block(0, n, n, n) = -M;
  H.block(n, 0, n, n) = -M;
  H.block(n, n, n, n) = M + 0.5 * rho * I;
  H.block(2 * n, 2 * n, n, n) = 0.5 * rho * I;
  Mat Q = Mat::Zero(3 * n, 3 * n);
  Q.block(0, 2 * n, n, n) = I;
  Q.block(n, 2 * n, n, n) = I;
  Q.block(2 * n, 0, n, n) = I;
  Q.block(2 * n, n, n, n) = I;

  const Mat G = f.matrix();
  Mat target_h = Mat::Zero(3 * n, 3 * n);
  target_h.block(0, 0, n, n) = 0.5 * rho * I;
  target_h.block(n, n, n, n) = 2.0 * f.s.asDiagonal().toDenseMatrix() + 0.5 * rho * I;
  target_h.block(2 * n, 2 * n, n, n) = 0.5 * rho * I;
  Mat target_q = Mat::Zero(3 * n, 3 * n);
  const double sqrt2 = 2.0 * detail::kHalfSqrt2;
  target_q.block(0, 0, n, n) = -sqrt2 * I;
  target_q.block(2 * n, 2 * n, n, n) = sqrt2 * I;

  const double r_h = (G.transpose() * H * G - target_h).norm();
  const double r_q = (G.transpose() * Q * G - target_q).norm();
  return {r_h, r_q};
}

/// Smallest penalty above which the w-subproblem is bounded below:
/// rho/2 + 2 s_i > 0 for all i, i.e. rho > 4 max_i max(-s_i, 0).
inline double min_valid_rho(const SpectralFactorization& f) {
  return 4.0 * std::max(0.0, -f.s.minCoeff());
}

inline Vec transform_q(const SpectralFactorization& f, const Vec& h) {
  return f.apply_Gt(h);
}

}  // namespace l0qp
