// Copyright (c) l0qp contributors. Licensed under the Apache License 2.0.

#include <algorithm>

#include <catch2/catch_amalgamated.hpp>

#include "l0qp/spectral.hpp"
#include "test_support.hpp"

using namespace l0qp;
using namespace l0qp::testing;

TEST_CASE("factorize identity and diagonal inputs") {
  const auto f = factorize(Mat::Identity(2, 2));
  CHECK(f.s[0] == Catch::Approx(1.0));
  CHECK(f.s[1] == Catch::Approx(1.0));
  const Mat G = f.matrix();
  CHECK((G.transpose() * G - Mat::Identity(6, 6)).norm() <= 1e-10 * 2);

  Mat D = Mat::Zero(2, 2);
  D(0, 0) = -1.0;
  D(1, 1) = 3.0;
  const auto fd = factorize(D);
  CHECK(fd.s[0] == Catch::Approx(-1.0));
  CHECK(fd.s[1] == Catch::Approx(3.0));
}

TEST_CASE("factorize diagonalizes random symmetric matrices") {
  Rng rng(21, "factorize");
  for (int trial = 0; trial < 10; ++trial) {
    const Mat M = random_symmetric(4, rng);
    const auto f = factorize(M);
    CHECK((f.V.transpose() * M * f.V - Mat(f.s.asDiagonal())).norm() <=
          1e-9 * (1.0 + M.norm()));
    CHECK((f.V.transpose() * f.V - Mat::Identity(4, 4)).norm() <= 1e-10 * 4);
    CHECK(std::is_sorted(f.s.data(), f.s.data() + f.s.size()));
  }
}

TEST_CASE("verify_diagonalization residuals") {
  const auto f0 = factorize(Mat::Zero(2, 2));
  const auto [rh0, rq0] = verify_diagonalization(f0, 2.0);
  CHECK(rh0 <= 1e-10);
  CHECK(rq0 <= 1e-10);

  Rng rng(22, "verify");
  const Mat M = random_symmetric(3, rng);
  const auto f = factorize(M);
  const auto [rh, rq] = verify_diagonalization(f, 5.0);
  CHECK(rh <= 1e-9 * (1.0 + M.norm()));
  CHECK(rq <= 1e-9 * (1.0 + M.norm()));
}

TEST_CASE("min_valid_rho") {
  SpectralFactorization f;
  f.n = 2;
  f.V = Mat::Identity(2, 2);
  f.s = Vec(2);
  f.s << 1.0, 2.0;
  CHECK(min_valid_rho(f) == 0.0);
  f.s << -3.0, 1.0;
  CHECK(min_valid_rho(f) == Catch::Approx(12.0));

  Rng rng(23, "rho-bound");
  for (int trial = 0; trial < 10; ++trial) {
    const auto fm = factorize(random_symmetric(4, rng));
    const double rho = min_valid_rho(fm) + 1e-6;
    for (int i = 0; i < 4; ++i) CHECK(rho + 4.0 * fm.s[i] > 0.0);
  }
}

TEST_CASE("transform_q is orthogonal") {
  Rng rng(24, "transform");
  const auto f = factorize(random_symmetric(3, rng));
  CHECK(transform_q(f, Vec::Zero(9)).norm() == 0.0);

  const Mat G = f.matrix();
  for (int j = 0; j < 9; j += 4) {
    const Vec q = transform_q(f, G.col(j));
    Vec ej = Vec::Zero(9);
    ej[j] = 1.0;
    CHECK((q - ej).norm() <= 1e-12);
  }

  for (int trial = 0; trial < 20; ++trial) {
    const Vec h = random_vec(9, rng, 2.0);
    const Vec q = transform_q(f, h);
    CHECK(q.norm() == Catch::Approx(h.norm()).epsilon(1e-10));
    CHECK((f.apply_G(q) - h).norm() <= 1e-12 * (1.0 + h.norm()));
  }
}

TEST_CASE("eigenvalues are invariant under basis permutation") {
  Rng rng(25, "permute");
  const int n = 5;
  const Mat M = random_symmetric(n, rng);
  Mat P = Mat::Zero(n, n);
  // A fixed cyclic permutation.
  for (int i = 0; i < n; ++i) P(i, (i + 2) % n) = 1.0;
  const auto f1 = factorize(M);
  const auto f2 = factorize(P.transpose() * M * P);
  CHECK((f1.s - f2.s).lpNorm<Eigen::Infinity>() <= 1e-9 * (1.0 + M.norm()));
}
