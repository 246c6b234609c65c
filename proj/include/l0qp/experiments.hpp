// Copyright (c) l0qp contributors. Licensed under the Apache License 2.0.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "l0qp/admm.hpp"
#include "l0qp/certify.hpp"
#include "l0qp/problem.hpp"
#include "l0qp/qp.hpp"
#include "l0qp/rng.hpp"

namespace l0qp {

/// Noise model of the synthetic regression generator: the default scales the
/// noise variance as ||x_true||^2 / 10; the alternative uses a prescribed
/// signal-to-noise ratio sigma^2 = ||x_true||^2 / snr.
struct NoiseSpec {
  enum class Kind { variance_ratio10, snr };
  Kind kind = Kind::variance_ratio10;
  double snr = 10.0;

  static NoiseSpec ratio10() { return NoiseSpec{}; }
  static NoiseSpec with_snr(double value) { return NoiseSpec{Kind::snr, value}; }
};

/// Synthetic least-squares regression instance: obs = C x_true + noise with
/// C rows i.i.d. standard normal, x_true drawn from U(-K, K) and entries of
/// magnitude >= kK/n zeroed, which leaves expected cardinality k.
struct LsrInstance {
  Mat C;
  Vec obs;
  Vec x_true;
  double sigma2 = 0.0;
  std::uint64_t seed = 0;
};

inline LsrInstance generate_lsr_instance(int p_rows, int n, int k, double K,
                                         const NoiseSpec& noise, std::uint64_t seed) {
  if (p_rows <= 0 || n <= 0 || k <= 0 || k > n || !(K > 0))
    throw std::invalid_argument("generate_lsr_instance: invalid shape parameters");
  LsrInstance inst;
  inst.seed = seed;

  Rng rng_c(seed, "lsr-dictionary");
  inst.C.resize(p_rows, n);
  for (int i = 0; i < p_rows; ++i)
    for (int j = 0; j < n; ++j) inst.C(i, j) = rng_c.normal();

  Rng rng_x(seed, "lsr-truth");
  inst.x_true.resize(n);
  const double cutoff = static_cast<double>(k) * K / n;
  for (int j = 0; j < n; ++j) {
    const double v = rng_x.uniform(-K, K);
    inst.x_true[j] = std::abs(v) >= cutoff ? 0.0 : v;
  }

  const double energy = inst.x_true.squaredNorm();
  inst.sigma2 = noise.kind == NoiseSpec::Kind::variance_ratio10 ? energy / 10.0
                                                                : energy / noise.snr;
  Rng rng_e(seed, "lsr-noise");
  Vec eps(p_rows);
  const double sigma = std::sqrt(inst.sigma2);
  for (int i = 0; i < p_rows; ++i) eps[i] = sigma * rng_e.normal();
  inst.obs = inst.C * inst.x_true + eps;
  return inst;
}

/// Converts a regression instance to the quadratic form, keeping obs'obs as
/// the report-only offset so reported objectives read as ||Cx - obs||^2 + ...
inline Problem to_problem(const LsrInstance& inst, double gamma) {
  Problem p;
  p.n = static_cast<int>(inst.C.cols());
  p.M = inst.C.transpose() * inst.C;
  p.M = 0.5 * (p.M + p.M.transpose().eval());
  p.lin = -2.0 * inst.C.transpose() * inst.obs;
  p.gamma = gamma;
  p.offset = inst.obs.squaredNorm();
  p.validate();
  return p;
}

struct BruteForceResult {
  Vec x;
  double objective = std::numeric_limits<double>::infinity();  // without offset
};

namespace detail {

/// Minimizes x'Qx + q'x over the given coordinates (others fixed to zero),
/// with least-norm handling of singular on-support systems. Returns false
/// when the restricted problem is unbounded below.
inline bool solve_on_support(const Mat& Qss, const Vec& qs, Vec& xs) {
  const int s = static_cast<int>(Qss.rows());
  if (s == 0) {
    xs.resize(0);
    return true;
  }
  Eigen::LLT<Mat> llt(Qss);
  if (llt.info() == Eigen::Success) {
    xs = llt.solve(-0.5 * qs);
    return true;
  }
  Eigen::SelfAdjointEigenSolver<Mat> es(Qss);
  const Vec& ev = es.eigenvalues();
  const double scale = std::max(std::abs(ev.minCoeff()), std::abs(ev.maxCoeff()));
  const double cut = 1e-12 * (1.0 + scale);
  if (ev.minCoeff() < -cut) return false;
  Vec inv(s);
  for (int i = 0; i < s; ++i) inv[i] = ev[i] > cut ? 1.0 / ev[i] : 0.0;
  xs = es.eigenvectors() * (inv.asDiagonal() * (es.eigenvectors().transpose() *
                                                (-0.5 * qs)));
  const double res = (Qss * xs + 0.5 * qs).norm();
  return res <= 1e-8 * (1.0 + qs.norm());
}

}  // namespace detail

/// Exhaustive global solve by support enumeration: for each of the 2^n
/// supports the restricted convex quadratic is solved (through an inequality
/// QP when Ax >= b is present; infeasible supports are skipped). Global by
/// exhaustion; intended for reference values at desk scale.
inline BruteForceResult brute_force_global(const Problem& p, int max_n = 16) {
  p.validate();
  if (p.n > max_n)
    throw std::invalid_argument("brute_force_global: n exceeds max_n");
  if (p.n >= 31) throw std::invalid_argument("brute_force_global: n too large");

  const Mat Q = p.g_quad ? Mat(p.M + 0.5 * p.g_quad->P) : p.M;
  const Vec q0 = p.g_quad ? Vec(p.lin + p.g_quad->c) : p.lin;

  BruteForceResult best;
  double best_bound = std::numeric_limits<double>::infinity();
  bool any_feasible = false;
  std::vector<int> support;
  support.reserve(p.n);

  const std::uint32_t total = 1u << p.n;
  for (std::uint32_t mask = 0; mask < total; ++mask) {
    support.clear();
    for (int i = 0; i < p.n; ++i)
      if (mask & (1u << i)) support.push_back(i);
    const int s = static_cast<int>(support.size());

    Mat Qss(s, s);
    Vec qs(s);
    for (int a = 0; a < s; ++a) {
      qs[a] = q0[support[a]];
      for (int b = 0; b < s; ++b) Qss(a, b) = Q(support[a], support[b]);
    }

    Vec xs;
    if (!p.has_constraints()) {
      if (!detail::solve_on_support(Qss, qs, xs))
        throw std::runtime_error("brute_force_global: objective unbounded below");
    } else if (s == 0) {
      if (p.b->maxCoeff() > 0.0) continue;  // x = 0 violates Ax >= b
      xs.resize(0);
    } else {
      Mat Gs(p.m(), s);
      for (int a = 0; a < s; ++a) Gs.col(a) = p.A->col(support[a]);
      Mat H = 2.0 * Qss;
      const double reg = 1e-10 * (1.0 + H.diagonal().cwiseAbs().maxCoeff());
      H.diagonal().array() += reg;
      QpResult qp = solve_qp(H, qs, Gs, *p.b);
      if (qp.infeasible) continue;
      if (!qp.optimal) continue;
      xs = qp.x;
    }

    double value = 0.0;
    if (s > 0) value = xs.dot(Qss * xs) + qs.dot(xs);
    const double bound = value + p.gamma * s;
    any_feasible = true;
    if (bound < best_bound) {
      best_bound = bound;
      best.x = Vec::Zero(p.n);
      for (int a = 0; a < s; ++a) best.x[support[a]] = xs[a];
    }
  }
  if (!any_feasible)
    throw std::runtime_error("brute_force_global: no feasible support");
  best.objective = eval_objective(p, best.x);
  return best;
}

struct IhtResult {
  Vec x;
  long iters = 0;
  bool converged = false;
};

/// Largest safe gradient step 0.99 / L with L = 2 lambda_max(M) (+ ||P||).
inline double iht_default_step(const Problem& p) {
  Eigen::SelfAdjointEigenSolver<Mat> es(p.M);
  double L = 2.0 * std::max(0.0, es.eigenvalues().maxCoeff());
  if (p.g_quad) {
    Eigen::SelfAdjointEigenSolver<Mat> esp(p.g_quad->P);
    L += std::max(0.0, esp.eigenvalues().maxCoeff());
  }
  if (L <= 0.0) L = 1.0;
  return 0.99 / L;
}

/// Iterative hard thresholding: proximal gradient with the exact l0
/// proximal map, which zeroes entries of magnitude <= sqrt(2 gamma step).
/// The objective sequence is nonincreasing for any step <= 1/L; an increase
/// is diagnosed as a too-large step.
inline IhtResult iht(const Problem& p, const Vec& x0, double step, long max_iter,
                     double tol) {
  if (p.has_constraints())
    throw std::invalid_argument("iht: polyhedral constraints are not supported");
  if (!(step > 0)) throw std::invalid_argument("iht: step must be > 0");
  const double threshold = std::sqrt(2.0 * p.gamma * step);
  IhtResult result;
  result.x = x0;
  double obj = eval_objective(p, result.x);
  for (long k = 0; k < max_iter; ++k) {
    const Vec v = result.x - step * p.grad_f(result.x);
    Vec next(p.n);
    for (int i = 0; i < p.n; ++i) next[i] = std::abs(v[i]) <= threshold ? 0.0 : v[i];
    const double obj_next = eval_objective(p, next);
    if (obj_next > obj + 1e-10 * (1.0 + std::abs(obj)))
      throw std::runtime_error(
          "iht: objective increased; step exceeds 1/L for this problem");
    const double move = (next - result.x).norm();
    result.x = next;
    obj = obj_next;
    ++result.iters;
    if (move < tol) {
      result.converged = true;
      break;
    }
  }
  return result;
}

/// Best-of-multistart IHT: origin plus standard normal draws.
inline IhtResult iht_multistart(const Problem& p, int starts, std::uint64_t seed,
                                long max_iter, double tol) {
  const double step = iht_default_step(p);
  Rng rng(seed, "iht-starts");
  IhtResult best;
  double best_obj = std::numeric_limits<double>::infinity();
  for (int s = 0; s < starts; ++s) {
    Vec x0 = Vec::Zero(p.n);
    if (s > 0)
      for (int i = 0; i < p.n; ++i) x0[i] = rng.normal();
    IhtResult run = iht(p, x0, step, max_iter, tol);
    const double obj = eval_objective(p, run.x);
    if (obj < best_obj) {
      best_obj = obj;
      best = run;
    }
  }
  return best;
}

/// Warm-started IHT: an orthogonal-matching-pursuit pass (greedy selection
/// by residual correlation, on-support least squares) run until the best
/// correlation falls below the hard-threshold level, then IHT from there.
inline IhtResult iht_warm_start(const Problem& p, long max_iter, double tol) {
  if (p.has_constraints())
    throw std::invalid_argument("iht_warm_start: constraints are not supported");
  const double step = iht_default_step(p);
  const double threshold = std::sqrt(2.0 * p.gamma * step);

  Vec x = Vec::Zero(p.n);
  std::vector<bool> in_support(p.n, false);
  std::vector<int> support;
  for (int round = 0; round < p.n; ++round) {
    // Residual correlation: -grad/2 equals C'(obs - Cx) in regression form.
    const Vec corr = -0.5 * p.grad_f(x);
    int pick = -1;
    double best = threshold;
    for (int i = 0; i < p.n; ++i) {
      if (!in_support[i] && std::abs(corr[i]) > best) {
        best = std::abs(corr[i]);
        pick = i;
      }
    }
    if (pick < 0) break;
    in_support[pick] = true;
    support.push_back(pick);

    const int s = static_cast<int>(support.size());
    const Mat Q = p.g_quad ? Mat(p.M + 0.5 * p.g_quad->P) : p.M;
    const Vec q0 = p.g_quad ? Vec(p.lin + p.g_quad->c) : p.lin;
    Mat Qss(s, s);
    Vec qs(s);
    for (int a = 0; a < s; ++a) {
      qs[a] = q0[support[a]];
      for (int b = 0; b < s; ++b) Qss(a, b) = Q(support[a], support[b]);
    }
    Vec xs;
    if (!detail::solve_on_support(Qss, qs, xs)) break;
    x.setZero();
    for (int a = 0; a < s; ++a) x[support[a]] = xs[a];
  }
  return iht(p, x, step, max_iter, tol);
}

struct Metrics {
  double objective = 0.0;  // includes the report-only offset
  double rdf = 0.0;        // percent, relative to the reference value
  bool rdf_is_absolute = false;  // reference was 0; rdf holds the raw gap
  int card = 0;
  double kkt_res = std::numeric_limits<double>::quiet_NaN();
  double time_s = 0.0;
  long iters = 0;
};

struct MethodResult {
  double objective = 0.0;  // includes offset
  int card = 0;
  double kkt_res = std::numeric_limits<double>::quiet_NaN();
  double time_s = 0.0;
  long iters = 0;
  std::string termination = "converged";
  bool failed = false;
  std::string error;
};

inline Metrics compute_metrics(const MethodResult& result, double reference_fstar) {
  Metrics metrics;
  metrics.objective = result.objective;
  if (reference_fstar == 0.0) {
    metrics.rdf = result.objective - reference_fstar;
    metrics.rdf_is_absolute = true;
  } else {
    metrics.rdf =
        (result.objective - reference_fstar) / std::abs(reference_fstar) * 100.0;
  }
  metrics.card = result.card;
  metrics.kkt_res = result.kkt_res;
  metrics.time_s = result.time_s;
  metrics.iters = result.iters;
  return metrics;
}

struct BenchCell {
  int p = 50;
  int n = 10;
  int card = 4;
  double gamma = 1.0;
  std::uint64_t seed = 1;
};

struct BenchConfig {
  std::vector<BenchCell> cells;
  std::vector<std::string> methods;  // admm-cf, perturbed, iht, ihtws, oracle
  double eps = 1e-4;
  long max_iter = 1000000;
  double max_time = 10.0;  // per solver run, seconds
  double K = 60.0;
  NoiseSpec noise;
  std::string reference = "oracle";  // or "first-method"
  int oracle_max_n = 16;
  int jobs = 1;
  double iht_tol = 1e-6;
  int iht_starts = 50;
  std::string perturbed_preset = "fig1";  // or "eps:<value>"
};

struct BenchRow {
  BenchCell cell;
  std::string method;
  Metrics metrics;
  std::string termination = "converged";
  bool failed = false;
  std::string error;
};

namespace detail {

inline MethodResult run_method(const Problem& p, const std::string& method,
                               const BenchCell& cell, const BenchConfig& config) {
  MethodResult out;
  const auto t0 = std::chrono::steady_clock::now();
  auto stamp = [&] {
    out.time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  try {
    if (method == "admm-cf") {
      AdmmOptions opts;
      const SpectralFactorization fact = factorize(p.M);
      opts.rho0 = std::max(p.gamma, 1.05 * min_valid_rho(fact) + 1e-8);
      opts.delta = 0.5 * opts.rho0;
      opts.rho_max = std::max(2000.0, 2.0 * opts.rho0);
      opts.eps = config.eps;
      opts.max_iter = config.max_iter;
      opts.max_time = config.max_time;
      const SolveTrace trace = run_admm_cf(p, opts);
      const ReportedObjective obj = reported_objective(p, trace);
      out.objective = obj.value;
      out.card = obj.cardinality;
      out.iters = trace.iterations;
      out.termination = to_string(trace.termination);
      if (trace.iters.size() >= 2) out.kkt_res = kkt_residual_admm(trace);
    } else if (method == "perturbed") {
      PerturbedOptions opts;
      if (config.perturbed_preset.rfind("eps:", 0) == 0) {
        const double eps_sched = std::stod(config.perturbed_preset.substr(4));
        const SplitPoint init = detail::default_init(p.n);
        opts = epsilon_schedule(eps_sched, init, init, Vec::Zero(3 * p.n));
      } else {
        opts.fig1_schedule = true;
      }
      opts.eps = config.eps;
      opts.max_iter = config.max_iter;
      opts.max_time = config.max_time;
      const SolveTrace trace = run_perturbed_admm(p, opts);
      const ReportedObjective obj = reported_objective(p, trace);
      out.objective = obj.value;
      out.card = obj.cardinality;
      out.iters = trace.iterations;
      out.termination = to_string(trace.termination);
      if (trace.iters.size() >= 2) out.kkt_res = kkt_residual_admm(trace);
    } else if (method == "iht" || method == "ihtws") {
      const IhtResult run =
          method == "iht" ? iht_multistart(p, config.iht_starts, cell.seed,
                                           config.max_iter, config.iht_tol)
                          : iht_warm_start(p, config.max_iter, config.iht_tol);
      out.objective = eval_objective(p, run.x) + p.offset;
      out.card = count_l0(run.x);
      out.iters = run.iters;
      out.termination = run.converged ? "converged" : "max_iter";
      const SplitPoint w = split(run.x);
      out.kkt_res =
          first_order_kkt_residual(p, w, recover_multipliers_direct(p, w))
              .stationarity_res;
    } else if (method == "oracle") {
      const BruteForceResult res = brute_force_global(p, config.oracle_max_n);
      out.objective = res.objective + p.offset;
      out.card = count_l0(res.x);
      out.iters = 1L << p.n;
      const SplitPoint w = split(res.x);
      out.kkt_res =
          first_order_kkt_residual(p, w, recover_multipliers_direct(p, w))
              .stationarity_res;
    } else {
      throw std::invalid_argument("unknown method: " + method);
    }
  } catch (const std::exception& err) {
    out.failed = true;
    out.error = err.what();
  }
  stamp();
  return out;
}

}  // namespace detail

/// Runs every cell x method job. Cells execute on a bounded worker pool;
/// each job owns its seed-derived streams and results merge in config order,
/// so output is independent of the job count.
inline std::vector<BenchRow> run_benchmark(const BenchConfig& config) {
  if (config.methods.empty())
    throw std::invalid_argument("run_benchmark: no methods given");
  std::vector<BenchRow> rows(config.cells.size() * config.methods.size());

  std::atomic<std::size_t> next_cell{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t ci = next_cell.fetch_add(1);
      if (ci >= config.cells.size()) return;
      const BenchCell& cell = config.cells[ci];
      Problem problem;
      std::string cell_error;
      try {
        const LsrInstance inst = generate_lsr_instance(cell.p, cell.n, cell.card,
                                                       config.K, config.noise,
                                                       cell.seed);
        problem = to_problem(inst, cell.gamma);
      } catch (const std::exception& err) {
        cell_error = err.what();
      }

      std::vector<MethodResult> results(config.methods.size());
      if (cell_error.empty()) {
        for (std::size_t mi = 0; mi < config.methods.size(); ++mi)
          results[mi] = detail::run_method(problem, config.methods[mi], cell, config);
      }

      double f_ref = std::numeric_limits<double>::quiet_NaN();
      if (cell_error.empty()) {
        if (config.reference == "oracle") {
          for (std::size_t mi = 0; mi < config.methods.size(); ++mi)
            if (config.methods[mi] == "oracle" && !results[mi].failed)
              f_ref = results[mi].objective;
          if (std::isnan(f_ref) && cell.n <= config.oracle_max_n) {
            try {
              f_ref = brute_force_global(problem, config.oracle_max_n).objective +
                      problem.offset;
            } catch (const std::exception&) {
            }
          }
        } else if (!results.empty() && !results.front().failed) {
          f_ref = results.front().objective;
        }
      }

      for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
        BenchRow& row = rows[ci * config.methods.size() + mi];
        row.cell = cell;
        row.method = config.methods[mi];
        if (!cell_error.empty()) {
          row.failed = true;
          row.error = cell_error;
          continue;
        }
        const MethodResult& res = results[mi];
        row.failed = res.failed;
        row.error = res.error;
        row.termination = res.termination;
        if (!res.failed)
          row.metrics =
              compute_metrics(res, std::isnan(f_ref) ? res.objective : f_ref);
      }
    }
  };

  const int jobs = std::max(1, config.jobs);
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return rows;
}

}  // namespace l0qp
