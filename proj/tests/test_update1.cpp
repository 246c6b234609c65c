// Copyright (c) l0qp contributors. Licensed under the Apache License 2.0.

#include <catch2/catch_amalgamated.hpp>

#include "l0qp/update1.hpp"
#include "test_support.hpp"

using namespace l0qp;
using namespace l0qp::testing;

TEST_CASE("build_h assembles the stacked linear term") {
  Problem p = make_problem(Mat::Identity(2, 2), Vec::Zero(2), 0.0);
  SplitPoint y = SplitPoint::zero(2);
  y.x_plus << 1.0, 2.0;
  Vec lambda = 3.0 * y.stack();
  CHECK(build_h(p, y, lambda, 3.0).norm() == 0.0);

  Problem q = make_problem(Mat::Identity(1, 1), Vec::Ones(1), 1.0);
  const Vec h = build_h(q, SplitPoint::zero(1), Vec::Zero(3), 1.0);
  CHECK(h[0] == 1.0);
  CHECK(h[1] == -1.0);
  CHECK(h[2] == -1.0);

  Rng rng(31, "build-h");
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 3;
    Problem r = make_problem(random_symmetric(n, rng), random_vec(n, rng), 0.4);
    SplitPoint y2{random_vec(n, rng), random_vec(n, rng), random_vec(n, rng)};
    const Vec lam = random_vec(3 * n, rng);
    const double rho = 2.5;
    const Vec got = build_h(r, y2, lam, rho);
    for (int i = 0; i < n; ++i) {
      CHECK(got[i] == Catch::Approx(r.lin[i] + lam[i] - rho * y2.x_plus[i]).margin(1e-14));
      CHECK(got[n + i] ==
            Catch::Approx(-r.lin[i] + lam[n + i] - rho * y2.x_minus[i]).margin(1e-14));
      CHECK(got[2 * n + i] ==
            Catch::Approx(-0.4 + lam[2 * n + i] - rho * y2.xi[i]).margin(1e-14));
    }
  }
}

TEST_CASE("solve_w_subproblem solves the 1-D instance in closed form") {
  Problem p = make_problem(2.0 * Mat::Identity(1, 1), Vec::Ones(1), 1.0);
  const auto f = factorize(p.M);
  const SplitPoint w =
      solve_w_subproblem(f, p, SplitPoint::zero(1), Vec::Zero(3), 1.0);
  CHECK(w.x_plus[0] == Catch::Approx(-1.0 / 9.0).margin(1e-14));
  CHECK(w.x_minus[0] == Catch::Approx(1.0 / 9.0).margin(1e-14));
  CHECK(w.xi[0] == Catch::Approx(1.0).margin(1e-14));
  CHECK(std::abs((w.x_plus + w.x_minus).dot(w.xi)) <= 1e-14);
}

TEST_CASE("h = 0 gives w = 0") {
  Problem p = make_problem(Mat::Identity(2, 2), Vec::Zero(2), 0.0);
  const auto f = factorize(p.M);
  SplitPoint y = SplitPoint::zero(2);
  const SplitPoint w = solve_w_subproblem(f, p, y, Vec::Zero(6), 1.0);
  CHECK(w.stack().norm() == 0.0);
}

TEST_CASE("closed form beats the grid oracle on random small instances") {
  Rng rng(32, "grid-oracle");
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(2));
    const Mat M = random_symmetric(n, rng);
    const Vec lin = random_vec(n, rng);
    Problem p = make_problem(M, lin, 0.1 + rng.uniform01());
    const auto f = factorize(M);
    const double rho = min_valid_rho(f) + 0.5 + 2.0 * rng.uniform01();
    SplitPoint y{random_vec(n, rng), random_vec(n, rng), random_vec(n, rng)};
    const Vec lambda = random_vec(3 * n, rng);

    const Vec h = build_h(p, y, lambda, rho);
    const Vec q = transform_q(f, h);
    const SplitPoint w = solve_w_subproblem(f, p, y, lambda, rho, TieBreakPolicy{});
    const Vec z = transform_q(f, w.stack());

    const double closed = z_space_objective(z, q, f.s, rho);
    const double grid = grid_oracle_w_objective(q, f.s, rho);
    CHECK(closed <= grid + 1e-6);
  }
}

TEST_CASE("magnitude symmetry and Z1 membership of the output") {
  Rng rng(33, "w-props");
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(4));
    const Mat M = random_symmetric(n, rng);
    Problem p = make_problem(M, random_vec(n, rng), 0.5);
    const auto f = factorize(M);
    const double rho = min_valid_rho(f) + 1.0;
    SplitPoint y{random_vec(n, rng), random_vec(n, rng), random_vec(n, rng)};
    const Vec lambda = random_vec(3 * n, rng);
    const SplitPoint w = solve_w_subproblem(f, p, y, lambda, rho);

    const Vec z = transform_q(f, w.stack());
    const double n1 = z.head(n).norm();
    const double n3 = z.tail(n).norm();
    CHECK(std::abs(n1 - n3) <= 1e-12 * (1.0 + n1));
    const double comp = std::abs((w.x_plus + w.x_minus).dot(w.xi));
    CHECK(comp <= 1e-8 * (1.0 + w.stack().squaredNorm()));
  }
}

TEST_CASE("h depends on lambda - rho y only (bitwise on exact data)") {
  // Integer-valued data and a power-of-two rho keep every operation exact.
  Problem p = make_problem(Mat::Identity(2, 2), Vec::Ones(2), 1.0);
  const auto f = factorize(p.M);
  const double rho = 2.0;
  SplitPoint y = SplitPoint::zero(2);
  y.x_plus << 1.0, 2.0;
  y.x_minus << 3.0, 4.0;
  y.xi << 0.0, 1.0;
  Vec lambda(6);
  lambda << 1.0, -2.0, 3.0, -4.0, 5.0, -6.0;

  Vec shift(6);
  shift << 2.0, 4.0, -2.0, 8.0, 16.0, -8.0;
  SplitPoint y_shifted = SplitPoint::from_stacked(y.stack() + shift);
  const Vec lambda_shifted = lambda + rho * shift;

  const SplitPoint w1 = solve_w_subproblem(f, p, y, lambda, rho);
  const SplitPoint w2 = solve_w_subproblem(f, p, y_shifted, lambda_shifted, rho);
  CHECK((w1.stack() - w2.stack()).norm() == 0.0);
}

TEST_CASE("degenerate q-blocks use the tie-break policy") {
  const int n = 2;
  Problem p = make_problem(Mat::Zero(n, n), Vec::Zero(n), 0.0);
  const auto f = factorize(p.M);
  const double rho = 1.0;

  // Construct h with q1 = 0 and q3 != 0 by mapping q back through G.
  Vec q(3 * n);
  q << 0.0, 0.0, 0.3, -0.1, 2.0, 1.0;
  const Vec h = f.apply_G(q);

  const SplitPoint w = detail::solve_w_core(f, h, rho, TieBreakPolicy::canonical());
  const Vec z = transform_q(f, w.stack());
  const double nq3 = q.tail(n).norm();
  CHECK(z.head(n).norm() == Catch::Approx(nq3 / (2.0 * rho)).margin(1e-12));
  // canonical_e1 puts the free block on the first basis vector
  CHECK(z[0] == Catch::Approx(nq3 / (2.0 * rho)).margin(1e-12));
  CHECK(std::abs(z[1]) <= 1e-12);

  const SplitPoint wp = detail::solve_w_core(f, h, rho, TieBreakPolicy::partner());
  const Vec zp = transform_q(f, wp.stack());
  const Vec d3 = -q.tail(n) / nq3;
  CHECK((zp.head(n) - (nq3 / (2.0 * rho)) * d3).norm() <= 1e-12);

  const SplitPoint wr = detail::solve_w_core(f, h, rho, TieBreakPolicy::random(7));
  const Vec zr = transform_q(f, wr.stack());
  CHECK(zr.head(n).norm() == Catch::Approx(nq3 / (2.0 * rho)).margin(1e-10));
}

TEST_CASE("rho at or below the validity bound is rejected") {
  Mat M(1, 1);
  M << -1.0;
  Problem p = make_problem(M, Vec::Zero(1), 1.0);
  const auto f = factorize(M);
  CHECK(min_valid_rho(f) == Catch::Approx(4.0));
  CHECK_THROWS_AS(solve_w_subproblem(f, p, SplitPoint::zero(1), Vec::Zero(3), 4.0),
                  std::invalid_argument);
  CHECK_NOTHROW(solve_w_subproblem(f, p, SplitPoint::zero(1), Vec::Zero(3), 4.01));
}
