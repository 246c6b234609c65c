// Copyright (c) l0qp contributors. Licensed under the Apache License 2.0.

#include <catch2/catch_amalgamated.hpp>

#include "l0qp/experiments.hpp"
#include "test_support.hpp"

using namespace l0qp;
using namespace l0qp::testing;

TEST_CASE("generator reproducibility and shape") {
  const auto a = generate_lsr_instance(20, 6, 3, 60.0, NoiseSpec::ratio10(), 42);
  const auto b = generate_lsr_instance(20, 6, 3, 60.0, NoiseSpec::ratio10(), 42);
  CHECK((a.C - b.C).norm() == 0.0);
  CHECK((a.obs - b.obs).norm() == 0.0);
  CHECK((a.x_true - b.x_true).norm() == 0.0);

  const auto c = generate_lsr_instance(20, 6, 3, 60.0, NoiseSpec::ratio10(), 43);
  CHECK((a.C - c.C).norm() != 0.0);

  // k = n: the cutoff equals K, so nothing is zeroed (a.s. for the draw).
  const auto dense = generate_lsr_instance(10, 5, 5, 60.0, NoiseSpec::ratio10(), 7);
  CHECK(count_l0(dense.x_true) == 5);

  CHECK_THROWS_AS(generate_lsr_instance(10, 5, 6, 60.0, NoiseSpec::ratio10(), 1),
                  std::invalid_argument);
}

TEST_CASE("generator hits the expected cardinality") {
  // The zeroing rule keeps entries below kK/n, so ||x||_0 ~ Binomial(n, k/n).
  const int n = 10, k = 4;
  long total = 0;
  const int trials = 1000;
  for (int seed = 0; seed < trials; ++seed) {
    const auto inst =
        generate_lsr_instance(5, n, k, 60.0, NoiseSpec::ratio10(), 1000 + seed);
    total += count_l0(inst.x_true);
  }
  const double mean = static_cast<double>(total) / trials;
  const double sigma = std::sqrt(n * (k / double(n)) * (1.0 - k / double(n)) / trials);
  CHECK(std::abs(mean - k) <= 3.0 * sigma);
}

TEST_CASE("snr noise variant scales the noise") {
  const auto inst = generate_lsr_instance(50, 8, 3, 10.0, NoiseSpec::with_snr(5.0), 3);
  CHECK(inst.sigma2 == Catch::Approx(inst.x_true.squaredNorm() / 5.0));
}

TEST_CASE("to_problem forms the normal-equation data") {
  const auto inst = generate_lsr_instance(12, 4, 2, 5.0, NoiseSpec::ratio10(), 11);
  const Problem p = to_problem(inst, 2.0);
  CHECK((p.M - inst.C.transpose() * inst.C).norm() <= 1e-12 * (1.0 + p.M.norm()));
  CHECK((p.lin + 2.0 * inst.C.transpose() * inst.obs).norm() <= 1e-12);
  CHECK(p.offset == Catch::Approx(inst.obs.squaredNorm()));

  // Reported objective identity: f_smooth + offset = ||Cx - obs||^2.
  Rng rng(71, "lsr-identity");
  for (int trial = 0; trial < 5; ++trial) {
    const Vec x = random_vec(4, rng);
    CHECK(p.f_smooth(x) + p.offset ==
          Catch::Approx((inst.C * x - inst.obs).squaredNorm()).margin(1e-8));
  }
}

TEST_CASE("brute force oracle on hand instances") {
  // Huge penalty: the empty support wins.
  Problem p = make_problem(Mat::Identity(2, 2), Vec::Ones(2), 100.0);
  const auto res = brute_force_global(p);
  CHECK(res.x.norm() == 0.0);
  CHECK(res.objective == Catch::Approx(0.0));

  // gamma = 0: the unconstrained minimizer.
  Problem q = make_problem(Mat::Identity(2, 2), Vec::Ones(2), 0.0);
  const auto res0 = brute_force_global(q);
  CHECK((res0.x + 0.5 * Vec::Ones(2)).norm() <= 1e-10);

  // Three-coordinate instance solved by hand: support {0} is optimal.
  Mat M = Mat::Identity(3, 3);
  Vec lin(3);
  lin << -2.0, -0.2, 0.0;
  Problem r = make_problem(M, lin, 0.5);
  const auto res3 = brute_force_global(r);
  CHECK(res3.objective == Catch::Approx(-0.5));
  CHECK(count_l0(res3.x) == 1);
  CHECK(res3.x[0] == Catch::Approx(1.0));

  CHECK_THROWS_AS(brute_force_global(make_problem(Mat::Identity(20, 20),
                                                  Vec::Zero(20), 1.0),
                                     16),
                  std::invalid_argument);
}

TEST_CASE("oracle agrees with the recursive dual implementation") {
  Rng rng(72, "oracle-dual");
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(5));
    const Mat M = random_psd(n, rng) + 1e-3 * Mat::Identity(n, n);
    const Vec lin = random_vec(n, rng, 2.0);
    Problem p = make_problem(M, lin, 0.05 + rng.uniform01());
    const auto fast = brute_force_global(p);
    const double slow = recursive_support_oracle(p);
    CHECK(fast.objective <= slow + 1e-9);
    CHECK(fast.objective >= slow - 1e-9);
  }
}

TEST_CASE("constrained oracle respects the polyhedron") {
  Problem p = make_problem(Mat::Identity(2, 2), Vec::Zero(2), 0.01);
  Mat A(1, 2);
  A << 1.0, 1.0;
  Vec b(1);
  b << 1.0;  // x1 + x2 >= 1
  p.A = A;
  p.b = b;
  p.validate();
  const auto res = brute_force_global(p);
  // Cheapest way to satisfy the constraint with one nonzero: x = e_i, value
  // 1 + gamma; with two nonzeros x = (1/2,1/2), value 1/2 + 2 gamma.
  CHECK(res.objective == Catch::Approx(0.5 + 0.02).margin(1e-9));
  CHECK((*p.A * res.x - *p.b).minCoeff() >= -1e-9);
}

TEST_CASE("iht reduces to gradient descent when gamma = 0") {
  Rng rng(73, "iht-gd");
  const Mat M = random_psd(3, rng) + 0.5 * Mat::Identity(3, 3);
  const Vec lin = random_vec(3, rng);
  Problem p = make_problem(M, lin, 0.0);
  const auto run = iht(p, Vec::Zero(3), iht_default_step(p), 100000, 1e-12);
  const Vec x_star = M.llt().solve(-0.5 * lin);
  CHECK((run.x - x_star).norm() <= 1e-8 * (1.0 + x_star.norm()));
}

TEST_CASE("1-D iht fixed points follow the threshold") {
  // f = (x - a)^2 maps to M = 1, lin = -2a. With step t and threshold
  // sqrt(2 gamma t): starting at the solution, x = a is a fixed point iff
  // |a| exceeds the threshold; otherwise the iteration collapses to 0.
  const double a = 2.0;
  LsrInstance inst;
  inst.C = Mat::Ones(1, 1);
  inst.obs = a * Vec::Ones(1);

  {
    const Problem p = to_problem(inst, 0.1);  // threshold well below |a|
    const auto run = iht(p, Vec::Zero(1), iht_default_step(p), 10000, 1e-12);
    CHECK(run.x[0] == Catch::Approx(a).margin(1e-6));
  }
  {
    const Problem p = to_problem(inst, 50.0);  // threshold above |a|
    const auto run = iht(p, Vec::Zero(1), iht_default_step(p), 10000, 1e-12);
    CHECK(run.x[0] == 0.0);
  }
}

TEST_CASE("iht objective is monotone and large steps are diagnosed") {
  Rng rng(74, "iht-mono");
  const auto inst = generate_lsr_instance(20, 6, 3, 5.0, NoiseSpec::ratio10(), 21);
  const Problem p = to_problem(inst, 1.0);
  const double step = iht_default_step(p);

  Vec x = random_vec(6, rng);
  double obj = eval_objective(p, x);
  const double threshold = std::sqrt(2.0 * p.gamma * step);
  for (int k = 0; k < 200; ++k) {
    const Vec v = x - step * p.grad_f(x);
    Vec next(6);
    for (int i = 0; i < 6; ++i) next[i] = std::abs(v[i]) <= threshold ? 0.0 : v[i];
    const double obj_next = eval_objective(p, next);
    CHECK(obj_next <= obj + 1e-10);
    x = next;
    obj = obj_next;
  }

  CHECK_THROWS_AS(iht(p, Vec::Zero(6), 100.0 / 1.0, 100, 1e-9), std::runtime_error);
}

TEST_CASE("warm start recovers an orthogonal-design support and respects gamma") {
  // Orthogonal design: OMP picks exactly the true support, noise-free.
  LsrInstance inst;
  inst.C = Mat::Identity(4, 4);
  Vec x_true(4);
  x_true << 3.0, 0.0, -2.0, 0.0;
  inst.obs = inst.C * x_true;
  const Problem p = to_problem(inst, 0.01);
  const auto run = iht_warm_start(p, 10000, 1e-10);
  CHECK((run.x - x_true).norm() <= 1e-6);

  // Enormous penalty: the warm start never selects anything.
  const Problem p_inf = to_problem(inst, 1e9);
  const auto zero = iht_warm_start(p_inf, 1000, 1e-10);
  CHECK(zero.x.norm() == 0.0);
}

TEST_CASE("compute_metrics") {
  MethodResult res;
  res.objective = 10.0;
  CHECK(compute_metrics(res, 10.0).rdf == Catch::Approx(0.0));
  res.objective = 11.0;
  CHECK(compute_metrics(res, 10.0).rdf == Catch::Approx(10.0));
  res.objective = 1.0;
  const Metrics flagged = compute_metrics(res, 0.0);
  CHECK(flagged.rdf_is_absolute);
  CHECK(flagged.rdf == Catch::Approx(1.0));
}

TEST_CASE("benchmark smoke run is deterministic across job counts") {
  BenchConfig config;
  config.cells = {BenchCell{15, 5, 2, 1.0, 1}, BenchCell{15, 5, 2, 10.0, 2}};
  config.methods = {"admm-cf", "oracle"};
  config.max_time = 5.0;
  config.iht_starts = 5;
  config.jobs = 1;
  const auto rows1 = run_benchmark(config);
  REQUIRE(rows1.size() == 4);
  config.jobs = 4;
  const auto rows4 = run_benchmark(config);
  REQUIRE(rows4.size() == 4);
  for (std::size_t i = 0; i < rows1.size(); ++i) {
    CHECK(rows1[i].method == rows4[i].method);
    CHECK(rows1[i].metrics.objective == rows4[i].metrics.objective);
    CHECK(rows1[i].metrics.rdf == rows4[i].metrics.rdf);
    CHECK(rows1[i].metrics.card == rows4[i].metrics.card);
  }
  CHECK_THROWS_AS(run_benchmark(BenchConfig{}), std::invalid_argument);
}
