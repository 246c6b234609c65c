// Copyright (c) l0qp contributors. Licensed under the Apache License 2.0.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "l0qp/problem.hpp"
#include "l0qp/spectral.hpp"
#include "l0qp/update1.hpp"
#include "l0qp/update2.hpp"

namespace l0qp {

enum class Termination { converged, max_iter, max_time };

enum class Variant { admm_cf, perturbed };

inline const char* to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::max_iter: return "max_iter";
    case Termination::max_time: return "max_time";
  }
  return "unknown";
}

inline const char* to_string(Variant v) {
  return v == Variant::admm_cf ? "admm-cf" : "perturbed";
}

/// Options of the adaptive-penalty scheme. Defaults follow the reference
/// experiment settings: rho0 = gamma clipped to validity, delta = rho0/2,
/// delta_rho = 1.01, rho_max = 2000, eps = 1e-4.
struct AdmmOptions {
  double rho0 = 1.0;
  double delta = 0.5;
  double delta_rho = 1.01;
  double rho_max = 2000.0;
  double eps = 1e-4;
  long max_iter = 1000000;
  double max_time = 0.0;  // seconds; 0 disables the budget
  TieBreakPolicy tie_break;
  bool monitor_descent = true;
  bool record_iterates = false;
  InnerSolverOptions inner;
  std::optional<SplitPoint> w0;
  std::optional<SplitPoint> y0;
  std::optional<Vec> lambda0;
};

/// Options of the constant-parameter perturbed scheme.
struct PerturbedOptions {
  double alpha = 0.0;
  double rho = 1.0;
  double prox_weight = 0.0;  // proximal weight on the w block
  double eps = 1e-4;
  long max_iter = 1000000;
  double max_time = 0.0;
  double monitor_tau = 2.0;  // tau in the Lyapunov monitor
  TieBreakPolicy tie_break;
  bool record_iterates = false;
  InnerSolverOptions inner;
  // Drifting-parameter preset replicating the reference figure:
  // (alpha, rho, mu) = (1, 1/2, 3) scaled by (1/1.001, 1.001, 1.001) each
  // step until alpha <= 1e-3. Heuristic; outside the constant-parameter
  // convergence theory.
  bool fig1_schedule = false;
  std::optional<SplitPoint> w0;
  std::optional<SplitPoint> y0;
  std::optional<Vec> lambda0;
};

struct AdmmState {
  SplitPoint w;
  SplitPoint y;
  Vec lambda;
  double rho = 0.0;
  long k = 0;
};

struct IterRecord {
  long k = 0;
  double rho_used = 0.0;   // penalty used by the updates of this iteration
  double rho_next = 0.0;   // penalty after the adaptation step
  double primal_res = 0.0;
  double dy = 0.0;
  double dw = 0.0;
  double dlambda = 0.0;
  double dual_res = 0.0;   // rho_used * dy
  double pert_dual = 0.0;  // ||rho dy + mu dw|| (perturbed runs)
  double L = 0.0;          // augmented Lagrangian at (w, y, lambda, rho_next)
  double P_tau = 0.0;      // perturbed Lyapunov value
  double obj_y = 0.0;      // f(y1 - y2) + offset + gamma ||y1 - y2||_0
  bool trigger = false;    // penalty-growth condition (rho - delta)dy < sqrt2 dlambda
  double t_wall = 0.0;
};

struct SolveTrace {
  Variant variant = Variant::admm_cf;
  Termination termination = Termination::max_iter;
  long iterations = 0;
  std::vector<IterRecord> iters;
  SplitPoint w;
  SplitPoint y;
  Vec lambda;
  double rho_final = 0.0;
  double L0 = 0.0;  // Lagrangian at the initial point

  // Perturbed bookkeeping.
  double alpha = 0.0;
  double prox_weight = 0.0;
  long best_k = -1;
  double best_obj = std::numeric_limits<double>::infinity();
  SplitPoint best_w;
  SplitPoint best_y;
  Vec best_lambda;

  // Runtime-observable assumption monitors.
  bool rho_hit_max = false;
  double min_lambda_norm = std::numeric_limits<double>::infinity();

  double wall_time_s = 0.0;
  std::vector<AdmmState> snapshots;  // filled when record_iterates
};

namespace detail {

inline double f_quad_only(const Problem& p, const Vec& x) {
  return x.dot(p.M * x) + p.lin.dot(x);
}

inline double g_only(const Problem& p, const Vec& v) {
  if (!p.g_quad) return 0.0;
  return 0.5 * v.dot(p.g_quad->P * v) + p.g_quad->c.dot(v);
}

inline SplitPoint default_init(int n) {
  SplitPoint w = SplitPoint::zero(n);
  w.x_plus.setOnes();
  return w;
}

}  // namespace detail

/// Augmented Lagrangian
/// L(w,y,lambda,rho) = f_Q(x+-x-) + gamma sum(1-xi) + g(y1-y2)
///                     + lambda'(w-y) + (rho/2)||w-y||^2.
inline double lyapunov_L(const Problem& p, const SplitPoint& w, const SplitPoint& y,
                         const Vec& lambda, double rho) {
  const Vec diff = w.stack() - y.stack();
  return detail::f_quad_only(p, w.x()) + p.gamma * (p.n - w.xi.sum()) +
         detail::g_only(p, y.x()) + lambda.dot(diff) + 0.5 * rho * diff.squaredNorm();
}

inline double lyapunov_L(const Problem& p, const AdmmState& s) {
  return lyapunov_L(p, s.w, s.y, s.lambda, s.rho);
}

/// Perturbed augmented Lagrangian
/// Ltilde(w,y,lambda) = h(w) + p(y) + (1-rho alpha) lambda'(w-y-alpha lambda)
///                      + (rho/2)||w-y||^2.
inline double lagrangian_tilde(const Problem& p, const SplitPoint& w,
                               const SplitPoint& y, const Vec& lambda, double rho,
                               double alpha) {
  const Vec diff = w.stack() - y.stack();
  return detail::f_quad_only(p, w.x()) + p.gamma * (p.n - w.xi.sum()) +
         detail::g_only(p, y.x()) +
         (1.0 - rho * alpha) * lambda.dot(diff - alpha * lambda) +
         0.5 * rho * diff.squaredNorm();
}

/// Lyapunov value
/// P_tau = Ltilde + ((1-rho alpha) alpha / 2)||lambda||^2
///         + tau (1-rho alpha)/(2 rho) ||lambda - lambda_prev||^2.
inline double lyapunov_P(const Problem& p, const SplitPoint& w, const SplitPoint& y,
                         const Vec& lambda, const Vec& prev_lambda, double rho,
                         double alpha, double tau) {
  const double ra = rho * alpha;
  return lagrangian_tilde(p, w, y, lambda, rho, alpha) +
         0.5 * (1.0 - ra) * alpha * lambda.squaredNorm() +
         tau * (1.0 - ra) / (2.0 * rho) * (lambda - prev_lambda).squaredNorm();
}

inline double lyapunov_P(const Problem& p, const AdmmState& s, const Vec& prev_lambda,
                         double tau, double alpha) {
  return lyapunov_P(p, s.w, s.y, s.lambda, prev_lambda, s.rho, alpha, tau);
}

/// Step-(2) penalty rule: grow by delta_rho iff
/// (rho - delta)||dy|| < sqrt(2)||dlambda|| and rho <= rho_max.
inline double penalty_update(double rho_k, double dy_norm, double dl_norm,
                             const AdmmOptions& opts) {
  if (dy_norm < 0 || dl_norm < 0)
    throw std::invalid_argument("penalty_update: norms must be nonnegative");
  const bool trigger = (rho_k - opts.delta) * dy_norm < std::sqrt(2.0) * dl_norm;
  if (trigger && rho_k <= opts.rho_max) return opts.delta_rho * rho_k;
  return rho_k;
}

/// The five descent constants of the perturbed scheme and their validity.
struct PerturbedConstants {
  double c1 = 0, c2 = 0, c3 = 0, c4 = 0, c5 = 0;
  bool valid = false;
};

inline PerturbedConstants check_constants(double alpha, double rho, double prox_weight,
                                          double tau, double nu, double R) {
  PerturbedConstants c;
  const double ra = rho * alpha;
  c.c1 = 0.5 * prox_weight - tau / (2.0 * nu);
  c.c2 = 0.5 * rho;
  c.c3 = tau * (alpha - 0.5 * nu) - (1.0 - ra) * (2.0 - ra) / (2.0 * rho);
  c.c4 = (1.0 - ra) * ((R + 1.0) * ra - 1.0) / (2.0 * rho * R);
  c.c5 = (1.0 - ra) / (2.0 * rho) * (tau - (1.0 - ra) * R);
  c.valid = c.c1 > 0 && c.c2 > 0 && c.c3 > 0 && c.c4 > 0 && c.c5 >= 0;
  return c;
}

/// Parameter choice alpha = eps, rho = 1/(2 eps), mu = 2/eps + 1, which makes
/// the descent constants positive with (nu, R, tau) = (eps, 2, 2) and bounds
/// the limit feasibility gap by O(eps).
inline PerturbedOptions epsilon_schedule(double eps, const SplitPoint& w0,
                                         const SplitPoint& y0, const Vec& lambda0) {
  if (!(eps > 0)) throw std::invalid_argument("epsilon_schedule: eps must be > 0");
  if ((w0.stack() - y0.stack()).norm() != 0.0)
    throw std::invalid_argument("epsilon_schedule: requires w0 == y0");
  PerturbedOptions opts;
  opts.alpha = eps;
  opts.rho = 1.0 / (2.0 * eps);
  opts.prox_weight = 2.0 / eps + 1.0;
  opts.w0 = w0;
  opts.y0 = y0;
  opts.lambda0 = lambda0;
  return opts;
}

/// Adaptive-penalty scheme: alternating closed-form w-update, convex
/// y-update, dual ascent, and the penalty growth rule, stopping when
/// max(||w - y||, rho ||y_k+1 - y_k||) < eps.
inline SolveTrace run_admm_cf(const Problem& p, const AdmmOptions& opts) {
  p.validate();
  const SpectralFactorization fact = factorize(p.M);
  const double mv = min_valid_rho(fact);
  if (!(opts.rho0 > mv))
    throw std::invalid_argument("run_admm_cf: rho0 must exceed min_valid_rho");
  if (!(opts.delta > 0 && opts.delta < opts.rho0))
    throw std::invalid_argument("run_admm_cf: need 0 < delta < rho0");
  if (!(opts.delta_rho > 1.0))
    throw std::invalid_argument("run_admm_cf: delta_rho must be > 1");
  if (!(opts.rho_max > opts.rho0))
    throw std::invalid_argument("run_admm_cf: rho_max must exceed rho0");
  if (!(opts.eps > 0)) throw std::invalid_argument("run_admm_cf: eps must be > 0");

  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
        .count();
  };

  const int n = p.n;
  SplitPoint w = opts.w0.value_or(detail::default_init(n));
  SplitPoint y = opts.y0.value_or(detail::default_init(n));
  Vec lambda = opts.lambda0.value_or(Vec::Zero(3 * n));
  double rho = opts.rho0;
  const bool box_route = !p.has_constraints() && !p.g_quad;
  TieBreakPolicy tie_break = opts.tie_break;
  tie_break.draws = 0;  // fresh stream per solve

  SolveTrace trace;
  trace.variant = Variant::admm_cf;
  trace.L0 = lyapunov_L(p, w, y, lambda, rho);
  trace.iters.reserve(256);

  const double sqrt2 = std::sqrt(2.0);
  Termination why = Termination::max_iter;
  long k = 0;
  while (k < opts.max_iter) {
    ++k;
    const SplitPoint w_prev = w;
    const SplitPoint y_prev = y;

    w = solve_w_subproblem(fact, p, y_prev, lambda, rho, tie_break);
    y = box_route ? solve_y_box(w, lambda, rho)
                  : solve_y_general(p, w, lambda, rho, opts.inner);
    const Vec residual = w.stack() - y.stack();
    lambda += rho * residual;

    IterRecord rec;
    rec.k = k;
    rec.rho_used = rho;
    rec.primal_res = residual.norm();
    rec.dy = (y.stack() - y_prev.stack()).norm();
    rec.dw = (w.stack() - w_prev.stack()).norm();
    rec.dlambda = rho * rec.primal_res;
    rec.dual_res = rho * rec.dy;
    rec.trigger = (rho - opts.delta) * rec.dy < sqrt2 * rec.dlambda;
    const bool grow = rec.trigger && rho <= opts.rho_max;
    rec.rho_next = grow ? opts.delta_rho * rho : rho;
    if (opts.monitor_descent) rec.L = lyapunov_L(p, w, y, lambda, rec.rho_next);
    const Vec xy = y.x();
    rec.obj_y = p.f_smooth(xy) + p.offset + p.gamma * count_l0(xy);
    rec.t_wall = elapsed();
    trace.min_lambda_norm = std::min(trace.min_lambda_norm, lambda.norm());
    if (rec.rho_next > opts.rho_max) trace.rho_hit_max = true;
    trace.iters.push_back(rec);
    if (opts.record_iterates) trace.snapshots.push_back({w, y, lambda, rho, k});
    if (rec.obj_y < trace.best_obj) {
      trace.best_obj = rec.obj_y;
      trace.best_k = k;
    }

    const bool stop = std::max(rec.primal_res, rho * rec.dy) < opts.eps;
    rho = rec.rho_next;
    if (stop) {
      why = Termination::converged;
      break;
    }
    if (opts.max_time > 0 && elapsed() > opts.max_time) {
      why = Termination::max_time;
      break;
    }
  }

  trace.termination = why;
  trace.iterations = k;
  trace.w = w;
  trace.y = y;
  trace.lambda = lambda;
  trace.rho_final = rho;
  trace.wall_time_s = elapsed();
  return trace;
}

/// Perturbed scheme: proximal w-update (absorbed into the closed form with
/// effective penalty rho + mu), damped dual update
/// lambda <- (1 - rho alpha) lambda + rho (w - y), constant parameters.
inline SolveTrace run_perturbed_admm(const Problem& p, const PerturbedOptions& opts) {
  p.validate();
  const SpectralFactorization fact = factorize(p.M);
  const double mv = min_valid_rho(fact);
  double alpha = opts.alpha;
  double rho = opts.rho;
  double mu = opts.prox_weight;
  if (opts.fig1_schedule) {
    alpha = 1.0;
    rho = 0.5;
    mu = 3.0;
  }
  if (!(rho > mv))
    throw std::invalid_argument("run_perturbed_admm: rho must exceed min_valid_rho");
  if (!(mu >= 0))
    throw std::invalid_argument("run_perturbed_admm: prox_weight must be >= 0");
  const double ra0 = rho * alpha;
  if (!(ra0 >= 0.0) || ra0 >= 1.0)
    throw std::invalid_argument("run_perturbed_admm: rho*alpha must lie in [0, 1)");
  if (!(opts.eps > 0))
    throw std::invalid_argument("run_perturbed_admm: eps must be > 0");

  const auto t_start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
        .count();
  };

  const int n = p.n;
  SplitPoint w = opts.w0.value_or(detail::default_init(n));
  SplitPoint y = opts.y0.value_or(detail::default_init(n));
  Vec lambda = opts.lambda0.value_or(Vec::Zero(3 * n));
  TieBreakPolicy tie_break = opts.tie_break;
  tie_break.draws = 0;

  SolveTrace trace;
  trace.variant = Variant::perturbed;
  trace.alpha = alpha;
  trace.prox_weight = mu;
  trace.L0 = lagrangian_tilde(p, w, y, lambda, rho, alpha);
  trace.iters.reserve(256);

  Termination why = Termination::max_iter;
  long k = 0;
  while (k < opts.max_iter) {
    ++k;
    const SplitPoint w_prev = w;
    const SplitPoint y_prev = y;
    const Vec lambda_prev = lambda;
    const double ra = rho * alpha;

    Vec h(3 * n);
    h.head(n) = p.lin;
    h.segment(n, n) = -p.lin;
    h.tail(n).setConstant(-p.gamma);
    h += (1.0 - ra) * lambda - rho * y_prev.stack() - mu * w_prev.stack();
    w = detail::solve_w_core(fact, h, rho + mu, tie_break);
    y = solve_y_perturbed(p, w, lambda, rho, alpha, opts.inner);
    lambda = (1.0 - ra) * lambda + rho * (w.stack() - y.stack());

    IterRecord rec;
    rec.k = k;
    rec.rho_used = rho;
    rec.rho_next = rho;
    rec.primal_res = (w.stack() - y.stack()).norm();
    rec.dy = (y.stack() - y_prev.stack()).norm();
    rec.dw = (w.stack() - w_prev.stack()).norm();
    rec.dlambda = (lambda - lambda_prev).norm();
    rec.dual_res = rho * rec.dy;
    rec.pert_dual =
        (rho * (y.stack() - y_prev.stack()) + mu * (w.stack() - w_prev.stack())).norm();
    rec.L = lagrangian_tilde(p, w, y, lambda, rho, alpha);
    rec.P_tau = lyapunov_P(p, w, y, lambda, lambda_prev, rho, alpha, opts.monitor_tau);
    const Vec xy = y.x();
    rec.obj_y = p.f_smooth(xy) + p.offset + p.gamma * count_l0(xy);
    rec.t_wall = elapsed();
    trace.min_lambda_norm = std::min(trace.min_lambda_norm, lambda.norm());
    trace.iters.push_back(rec);
    if (opts.record_iterates) trace.snapshots.push_back({w, y, lambda, rho, k});
    if (rec.obj_y < trace.best_obj) {
      trace.best_obj = rec.obj_y;
      trace.best_k = k;
      trace.best_w = w;
      trace.best_y = y;
      trace.best_lambda = lambda;
    }

    if (std::max(rec.pert_dual, rec.dlambda) < opts.eps) {
      why = Termination::converged;
      break;
    }
    if (opts.max_time > 0 && elapsed() > opts.max_time) {
      why = Termination::max_time;
      break;
    }
    if (opts.fig1_schedule && alpha > 1e-3) {
      alpha /= 1.001;
      rho *= 1.001;
      mu *= 1.001;
    }
  }

  trace.termination = why;
  trace.iterations = k;
  trace.w = w;
  trace.y = y;
  trace.lambda = lambda;
  trace.rho_final = rho;
  trace.wall_time_s = elapsed();
  return trace;
}

/// Reported objective and cardinality of a finished run. For the adaptive
/// scheme this follows the two-branch rule: on convergence the selector count
/// n - e'zeta of the final y-iterate, otherwise the realized ||x||_0; both
/// branches evaluate the smooth part at the final y-iterate. Perturbed runs
/// report the best value seen across iterations.
struct ReportedObjective {
  double value = 0.0;          // includes the report-only offset
  int cardinality = 0;
  bool from_converged = false;
};

inline ReportedObjective reported_objective(const Problem& p, const SolveTrace& trace) {
  ReportedObjective out;
  if (trace.variant == Variant::perturbed && trace.best_k >= 0) {
    const Vec x = trace.best_y.x();
    out.value = trace.best_obj;
    out.cardinality = count_l0(x);
    out.from_converged = trace.termination == Termination::converged;
    return out;
  }
  const Vec x = trace.y.x();
  const double smooth = p.f_smooth(x) + p.offset;
  if (trace.termination == Termination::converged) {
    const double relaxed_card = p.n - trace.y.xi.sum();
    out.value = smooth + p.gamma * relaxed_card;
    out.cardinality =
        std::clamp<int>(static_cast<int>(std::lround(relaxed_card)), 0, p.n);
    out.from_converged = true;
  } else {
    const int card = count_l0(x);
    out.value = smooth + p.gamma * card;
    out.cardinality = card;
  }
  return out;
}

/// Index (into trace.iters) of the first record of the maximal suffix over
/// which the penalty never changed. Descent monitors apply to this tail.
inline std::size_t frozen_start_index(const SolveTrace& trace) {
  if (trace.iters.empty()) return 0;
  std::size_t start = trace.iters.size();
  const double rho_final = trace.iters.back().rho_next;
  for (std::size_t j = trace.iters.size(); j-- > 0;) {
    if (trace.iters[j].rho_used != rho_final || trace.iters[j].rho_next != rho_final)
      break;
    start = j;
  }
  return start;
}

struct MonitorReport {
  long checked = 0;
  long violations = 0;
  double worst = 0.0;  // most positive violated margin
};

/// One-step bound holding at every iteration:
/// L_{k+1} - L_k <= (1/rho_k + (rho_{k+1}-rho_k)/(2 rho_k^2)) ||dlambda||^2
///                  - (rho_k/2) ||dy||^2, within 1e-8 (1 + |L_k|).
inline MonitorReport check_lagconv(const SolveTrace& trace) {
  MonitorReport report;
  double L_prev = trace.L0;
  for (const IterRecord& rec : trace.iters) {
    const double bound =
        (1.0 / rec.rho_used +
         (rec.rho_next - rec.rho_used) / (2.0 * rec.rho_used * rec.rho_used)) *
            rec.dlambda * rec.dlambda -
        0.5 * rec.rho_used * rec.dy * rec.dy;
    const double margin = (rec.L - L_prev) - bound - 1e-8 * (1.0 + std::abs(L_prev));
    ++report.checked;
    if (margin > 0) {
      ++report.violations;
      report.worst = std::max(report.worst, margin);
    }
    L_prev = rec.L;
  }
  return report;
}

/// Post-freeze sufficient descent: at every iteration of the constant-penalty
/// tail where the growth trigger was false,
/// L_{k+1} - L_k <= -(delta/2) ||dy||^2 within 1e-8 (1 + |L_k|).
inline MonitorReport check_frozen_descent(const SolveTrace& trace, double delta) {
  MonitorReport report;
  const std::size_t start = frozen_start_index(trace);
  for (std::size_t j = start; j < trace.iters.size(); ++j) {
    const IterRecord& rec = trace.iters[j];
    if (rec.trigger) continue;
    const double L_prev = j == 0 ? trace.L0 : trace.iters[j - 1].L;
    const double bound = -0.5 * delta * rec.dy * rec.dy;
    const double margin = (rec.L - L_prev) - bound - 1e-8 * (1.0 + std::abs(L_prev));
    ++report.checked;
    if (margin > 0) {
      ++report.violations;
      report.worst = std::max(report.worst, margin);
    }
  }
  return report;
}

/// Non-increase of the perturbed Lyapunov sequence P_tau^k, k >= 1.
inline MonitorReport check_p_tau_monotone(const SolveTrace& trace) {
  MonitorReport report;
  for (std::size_t j = 1; j < trace.iters.size(); ++j) {
    const double prev = trace.iters[j - 1].P_tau;
    const double margin = trace.iters[j].P_tau - prev - 1e-8 * (1.0 + std::abs(prev));
    ++report.checked;
    if (margin > 0) {
      ++report.violations;
      report.worst = std::max(report.worst, margin);
    }
  }
  return report;
}

}  // namespace l0qp
