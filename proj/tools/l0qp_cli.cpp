// Copyright (c) l0qp contributors. Licensed under the Apache License 2.0.
//
// Command-line driver: generate instances, run the solvers, and reproduce
// benchmark tables. See README.md for the file formats.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "l0qp/admm.hpp"
#include "l0qp/certify.hpp"
#include "l0qp/experiments.hpp"
#include "l0qp/io.hpp"

namespace {

using namespace l0qp;

constexpr int kExitOk = 0;
constexpr int kExitInputError = 1;
constexpr int kExitBudget = 2;

struct SolveArgs {
  std::string problem_path;
  std::string method = "admm-cf";
  double eps = 1e-4;
  std::optional<double> rho0;
  std::optional<double> delta;
  double delta_rho = 1.01;
  double rho_max = 2000.0;
  long max_iter = 1000000;
  double max_time = 0.0;
  std::uint64_t seed = 0;
  std::string out_path;
  std::string trace_path;
  bool certify = false;
  bool second_order = false;
  std::optional<double> alpha;
  std::optional<double> rho;
  std::optional<double> prox_weight;
  std::string preset = "fig1";
  int oracle_max_n = 16;
  long iht_max_iter = 200000;
  double iht_tol = 1e-6;
  int iht_starts = 50;
};

json options_echo(const SolveArgs& args) {
  json doc = {{"method", args.method}, {"eps", args.eps},
              {"max_iter", args.max_iter}, {"max_time", args.max_time},
              {"seed", args.seed}};
  if (args.rho0) doc["rho0"] = *args.rho0;
  if (args.delta) doc["delta"] = *args.delta;
  if (args.method == "admm-cf") {
    doc["delta_rho"] = args.delta_rho;
    doc["rho_max"] = args.rho_max;
  }
  if (args.method == "perturbed") {
    doc["preset"] = args.preset;
    if (args.alpha) doc["alpha"] = *args.alpha;
    if (args.rho) doc["rho"] = *args.rho;
    if (args.prox_weight) doc["prox_weight"] = *args.prox_weight;
  }
  return doc;
}

void attach_certificate(json& report, const Problem& p, const SplitPoint& w,
                        const SplitPoint& y, const Vec& lambda, double alpha,
                        bool perturbed, bool second_order, double tol) {
  KktReport kkt;
  Multipliers mult = recover_multipliers(p, w, y, lambda, 0.0);
  if (perturbed)
    kkt = perturbed_kkt_residual(p, w, y, lambda, alpha);
  else
    kkt = first_order_kkt_residual(p, w, mult);
  if (second_order) {
    try {
      kkt.second_order_min_eig = second_order_check(p, w, mult, tol);
    } catch (const std::exception& err) {
      report["kkt_second_order_error"] = err.what();
    }
  }
  report["kkt"] = kkt_report_to_json(kkt);
}

int run_solve(const SolveArgs& args) {
  Problem p = load_problem(args.problem_path);
  json report;
  report["schema"] = 1;
  report["solver"] = args.method;
  report["options"] = options_echo(args);
  int exit_code = kExitOk;

  const auto t0 = std::chrono::steady_clock::now();
  auto finish = [&](double time_s) {
    report["time_s"] = time_s;
    const std::string text = report.dump(2) + "\n";
    if (args.out_path.empty()) {
      std::cout << text;
    } else {
      std::ofstream out(args.out_path);
      if (!out) throw IoError("cannot write report: " + args.out_path);
      out << text;
    }
  };
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };

  if (args.method == "admm-cf" || args.method == "perturbed") {
    SolveTrace trace;
    double cert_tol = std::max(10.0 * args.eps, 1e-8);
    if (args.method == "admm-cf") {
      AdmmOptions opts;
      const SpectralFactorization fact = factorize(p.M);
      opts.rho0 = args.rho0.value_or(
          std::max(p.gamma, 1.05 * min_valid_rho(fact) + 1e-8));
      if (opts.rho0 <= 0) opts.rho0 = 1.0;
      opts.delta = args.delta.value_or(0.5 * opts.rho0);
      opts.delta_rho = args.delta_rho;
      opts.rho_max = std::max(args.rho_max, 2.0 * opts.rho0);
      opts.eps = args.eps;
      opts.max_iter = args.max_iter;
      opts.max_time = args.max_time;
      opts.tie_break = TieBreakPolicy::canonical();
      trace = run_admm_cf(p, opts);
    } else {
      PerturbedOptions opts;
      if (args.alpha && args.rho) {
        opts.alpha = *args.alpha;
        opts.rho = *args.rho;
        opts.prox_weight = args.prox_weight.value_or(0.0);
      } else if (args.preset.rfind("eps:", 0) == 0) {
        const double eps_sched = std::stod(args.preset.substr(4));
        const SplitPoint init = [&] {
          SplitPoint w = SplitPoint::zero(p.n);
          w.x_plus.setOnes();
          return w;
        }();
        opts = epsilon_schedule(eps_sched, init, init, Vec::Zero(3 * p.n));
      } else if (args.preset == "fig1") {
        opts.fig1_schedule = true;
      } else {
        throw IoError("unknown perturbed preset: " + args.preset);
      }
      opts.eps = args.eps;
      opts.max_iter = args.max_iter;
      opts.max_time = args.max_time;
      trace = run_perturbed_admm(p, opts);
    }

    const ReportedObjective obj = reported_objective(p, trace);
    report["objective"] = obj.value;
    report["objective_relaxed"] = eval_relaxed_objective(p, trace.y) + p.offset;
    report["objective_l0"] = eval_objective(p, trace.y.x()) + p.offset;
    report["cardinality"] = obj.cardinality;
    report["termination"] = to_string(trace.termination);
    report["iterations"] = trace.iterations;
    report["rho_final"] = trace.rho_final;
    report["rho_hit_max"] = trace.rho_hit_max;
    report["min_lambda_norm"] = trace.min_lambda_norm;
    if (trace.iters.size() >= 2) report["kkt_res"] = kkt_residual_admm(trace);
    {
      json x = json::array();
      const Vec xv = trace.variant == Variant::perturbed && trace.best_k >= 0
                         ? trace.best_y.x()
                         : trace.y.x();
      for (int i = 0; i < xv.size(); ++i) x.push_back(xv[i]);
      report["x"] = x;
    }
    if (!args.trace_path.empty()) {
      write_trace_jsonl(trace, args.trace_path);
      report["trace_path"] = args.trace_path;
    }
    if (args.certify) {
      const bool perturbed = trace.variant == Variant::perturbed;
      const SplitPoint& w = perturbed && trace.best_k >= 0 ? trace.best_w : trace.w;
      const SplitPoint& y = perturbed && trace.best_k >= 0 ? trace.best_y : trace.y;
      const Vec& lambda =
          perturbed && trace.best_k >= 0 ? trace.best_lambda : trace.lambda;
      attach_certificate(report, p, w, y, lambda, trace.alpha, perturbed,
                         args.second_order, cert_tol);
    }
    if (trace.termination != Termination::converged) exit_code = kExitBudget;
    finish(elapsed());
    return exit_code;
  }

  if (args.method == "oracle") {
    const BruteForceResult res = brute_force_global(p, args.oracle_max_n);
    report["objective"] = res.objective + p.offset;
    report["cardinality"] = count_l0(res.x);
    report["termination"] = "converged";
    report["iterations"] = 1L << p.n;
    json x = json::array();
    for (int i = 0; i < res.x.size(); ++i) x.push_back(res.x[i]);
    report["x"] = x;
    if (args.certify) {
      const SplitPoint w = split(res.x);
      const Multipliers mult = recover_multipliers_direct(p, w);
      KktReport kkt = first_order_kkt_residual(p, w, mult);
      if (args.second_order) {
        try {
          kkt.second_order_min_eig =
              second_order_check(p, w, mult, std::max(kkt.stationarity_res * 10, 1e-6));
        } catch (const std::exception& err) {
          report["kkt_second_order_error"] = err.what();
        }
      }
      report["kkt"] = kkt_report_to_json(kkt);
    }
    finish(elapsed());
    return kExitOk;
  }

  if (args.method == "iht" || args.method == "ihtws") {
    const IhtResult run = args.method == "iht"
                              ? iht_multistart(p, args.iht_starts, args.seed,
                                               args.iht_max_iter, args.iht_tol)
                              : iht_warm_start(p, args.iht_max_iter, args.iht_tol);
    report["objective"] = eval_objective(p, run.x) + p.offset;
    report["cardinality"] = count_l0(run.x);
    report["termination"] = run.converged ? "converged" : "max_iter";
    report["iterations"] = run.iters;
    json x = json::array();
    for (int i = 0; i < run.x.size(); ++i) x.push_back(run.x[i]);
    report["x"] = x;
    if (args.certify) {
      const SplitPoint w = split(run.x);
      const Multipliers mult = recover_multipliers_direct(p, w);
      report["kkt"] = kkt_report_to_json(first_order_kkt_residual(p, w, mult));
    }
    if (!run.converged) exit_code = kExitBudget;
    finish(elapsed());
    return exit_code;
  }

  throw IoError("unknown method: " + args.method);
}

int run_gen(int p_rows, int n, int k, double K, const std::string& noise,
            double gamma, std::uint64_t seed, const std::string& out_path) {
  NoiseSpec spec;
  if (noise == "ratio10")
    spec = NoiseSpec::ratio10();
  else if (noise.rfind("snr:", 0) == 0)
    spec = NoiseSpec::with_snr(std::stod(noise.substr(4)));
  else
    throw IoError("--noise must be 'ratio10' or 'snr:<value>'");

  const LsrInstance inst = generate_lsr_instance(p_rows, n, k, K, spec, seed);
  json doc;
  doc["least_squares"] = {{"C", [&] {
                             json rows = json::array();
                             for (int i = 0; i < inst.C.rows(); ++i) {
                               json row = json::array();
                               for (int j = 0; j < inst.C.cols(); ++j)
                                 row.push_back(inst.C(i, j));
                               rows.push_back(row);
                             }
                             return rows;
                           }()},
                          {"obs", [&] {
                             json arr = json::array();
                             for (int i = 0; i < inst.obs.size(); ++i)
                               arr.push_back(inst.obs[i]);
                             return arr;
                           }()}};
  doc["gamma"] = gamma;
  std::ofstream out(out_path);
  if (!out) throw IoError("cannot write problem file: " + out_path);
  out << doc.dump(2) << "\n";

  json truth;
  truth["x_true"] = [&] {
    json arr = json::array();
    for (int i = 0; i < inst.x_true.size(); ++i) arr.push_back(inst.x_true[i]);
    return arr;
  }();
  truth["sigma2"] = inst.sigma2;
  truth["seed"] = seed;
  std::ofstream tout(out_path + ".truth.json");
  if (!tout) throw IoError("cannot write truth sidecar for: " + out_path);
  tout << truth.dump(2) << "\n";
  return kExitOk;
}

int run_bench(const std::string& config_path, const std::string& out_dir, int jobs) {
  BenchConfig config = load_bench_config(config_path);
  if (jobs > 0) config.jobs = jobs;
  const std::vector<BenchRow> rows = run_benchmark(config);

  std::filesystem::create_directories(out_dir);
  {
    std::ofstream csv(out_dir + "/results.csv");
    if (!csv) throw IoError("cannot write " + out_dir + "/results.csv");
    csv << bench_csv(rows);
  }
  {
    std::ofstream js(out_dir + "/results.json");
    if (!js) throw IoError("cannot write " + out_dir + "/results.json");
    js << bench_rows_to_json(rows).dump(2) << "\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"l0qp: ADMM solvers for l0-penalized quadratic programs"};
  app.require_subcommand(1);

  SolveArgs sargs;
  CLI::App* solve = app.add_subcommand("solve", "solve a problem file");
  solve->add_option("--problem", sargs.problem_path, "problem JSON file")->required();
  solve->add_option("--method", sargs.method,
                    "admm-cf | perturbed | iht | ihtws | oracle");
  solve->add_option("--eps", sargs.eps, "stopping tolerance");
  solve->add_option("--rho0", sargs.rho0, "initial penalty");
  solve->add_option("--delta", sargs.delta, "penalty-rule margin (default rho0/2)");
  solve->add_option("--delta-rho", sargs.delta_rho, "penalty growth factor");
  solve->add_option("--rho-max", sargs.rho_max, "penalty cap");
  solve->add_option("--max-iter", sargs.max_iter, "iteration budget");
  solve->add_option("--max-time", sargs.max_time, "wall-clock budget, seconds");
  solve->add_option("--seed", sargs.seed, "seed for randomized starts");
  solve->add_option("--out", sargs.out_path, "report JSON path (default stdout)");
  solve->add_option("--trace", sargs.trace_path, "per-iteration JSONL trace path");
  solve->add_flag("--certify", sargs.certify, "attach a KKT certificate");
  solve->add_flag("--second-order", sargs.second_order,
                  "include the projected-Hessian check");
  solve->add_option("--alpha", sargs.alpha, "perturbed: dual damping");
  solve->add_option("--rho", sargs.rho, "perturbed: constant penalty");
  solve->add_option("--prox-weight", sargs.prox_weight, "perturbed: proximal weight");
  solve->add_option("--preset", sargs.preset, "perturbed preset: fig1 | eps:<v>");
  solve->add_option("--oracle-max-n", sargs.oracle_max_n, "oracle dimension cap");
  solve->add_option("--iht-max-iter", sargs.iht_max_iter, "IHT iteration budget");
  solve->add_option("--iht-tol", sargs.iht_tol, "IHT step-change tolerance");
  solve->add_option("--iht-starts", sargs.iht_starts, "IHT multistart count");

  int gp = 50, gn = 10, gk = 4;
  double gK = 60.0, ggamma = 1.0;
  std::string gnoise = "ratio10", gout;
  std::uint64_t gseed = 1;
  CLI::App* gen = app.add_subcommand("gen", "generate a regression instance");
  gen->add_option("--p", gp, "observation count")->required();
  gen->add_option("--n", gn, "coefficient dimension")->required();
  gen->add_option("--k", gk, "target cardinality")->required();
  gen->add_option("--K", gK, "uniform range of the true coefficients");
  gen->add_option("--noise", gnoise, "ratio10 | snr:<value>");
  gen->add_option("--gamma", ggamma, "l0 penalty weight written to the file");
  gen->add_option("--seed", gseed, "generator seed");
  gen->add_option("--out", gout, "output problem path")->required();

  std::string bconfig, bout = "bench-out";
  int bjobs = 0;
  CLI::App* bench = app.add_subcommand("bench", "run a benchmark config");
  bench->add_option("--config", bconfig, "benchmark config JSON")->required();
  bench->add_option("--out-dir", bout, "output directory");
  bench->add_option("--jobs", bjobs, "worker threads (default: config value)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    return app.exit(err) == 0 ? kExitOk : kExitInputError;
  }

  try {
    if (solve->parsed()) return run_solve(sargs);
    if (gen->parsed()) return run_gen(gp, gn, gk, gK, gnoise, ggamma, gseed, gout);
    if (bench->parsed()) return run_bench(bconfig, bout, bjobs);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}
