// Copyright (c) l0qp contributors. Licensed under the Apache License 2.0.

#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "l0qp/admm.hpp"
#include "l0qp/certify.hpp"
#include "l0qp/experiments.hpp"
#include "l0qp/problem.hpp"

namespace l0qp {

using json = nlohmann::json;

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& message) : std::runtime_error(message) {}
};

namespace detail {

inline json vec_to_json(const Vec& v) {
  json arr = json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

inline json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Vec json_to_vec(const json& value, const std::string& field) {
  if (!value.is_array()) throw IoError("field '" + field + "' must be an array");
  Vec v(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (!value[i].is_number())
      throw IoError("field '" + field + "' must contain numbers");
    v[static_cast<int>(i)] = value[i].get<double>();
  }
  return v;
}

inline Mat json_to_mat(const json& value, const std::string& field) {
  if (!value.is_array() || value.empty())
    throw IoError("field '" + field + "' must be a nonempty array of rows");
  const std::size_t cols = value[0].is_array() ? value[0].size() : 0;
  if (cols == 0) throw IoError("field '" + field + "' rows must be nonempty arrays");
  Mat m(value.size(), cols);
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (!value[i].is_array() || value[i].size() != cols)
      throw IoError("field '" + field + "' has ragged rows");
    for (std::size_t j = 0; j < cols; ++j) {
      if (!value[i][j].is_number())
        throw IoError("field '" + field + "' must contain numbers");
      m(static_cast<int>(i), static_cast<int>(j)) = value[i][j].get<double>();
    }
  }
  return m;
}

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline Problem problem_from_json(const json& doc) {
  const bool quad = doc.contains("quadratic");
  const bool lsq = doc.contains("least_squares");
  if (quad == lsq)
    throw IoError("problem file must contain exactly one of 'quadratic' or "
                  "'least_squares'");
  Problem p;
  if (quad) {
    const json& q = doc["quadratic"];
    if (!q.contains("M")) throw IoError("missing field 'quadratic.M'");
    if (!q.contains("lin")) throw IoError("missing field 'quadratic.lin'");
    p.M = detail::json_to_mat(q["M"], "quadratic.M");
    p.lin = detail::json_to_vec(q["lin"], "quadratic.lin");
    p.n = static_cast<int>(p.M.rows());
    if (q.contains("offset")) {
      if (!q["offset"].is_number()) throw IoError("field 'quadratic.offset' must be a number");
      p.offset = q["offset"].get<double>();
    }
  } else {
    const json& ls = doc["least_squares"];
    if (!ls.contains("C")) throw IoError("missing field 'least_squares.C'");
    if (!ls.contains("obs")) throw IoError("missing field 'least_squares.obs'");
    const Mat C = detail::json_to_mat(ls["C"], "least_squares.C");
    const Vec obs = detail::json_to_vec(ls["obs"], "least_squares.obs");
    if (obs.size() != C.rows())
      throw IoError("field 'least_squares.obs' length must match rows of C");
    p.n = static_cast<int>(C.cols());
    p.M = C.transpose() * C;
    p.M = 0.5 * (p.M + p.M.transpose().eval());
    p.lin = -2.0 * C.transpose() * obs;
    p.offset = obs.squaredNorm();
  }
  if (!doc.contains("gamma")) throw IoError("missing field 'gamma'");
  if (!doc["gamma"].is_number()) throw IoError("field 'gamma' must be a number");
  p.gamma = doc["gamma"].get<double>();
  if (doc.contains("g_quad")) {
    const json& g = doc["g_quad"];
    if (!g.contains("P") || !g.contains("c"))
      throw IoError("field 'g_quad' needs both 'P' and 'c'");
    p.g_quad = QuadTerm{detail::json_to_mat(g["P"], "g_quad.P"),
                        detail::json_to_vec(g["c"], "g_quad.c")};
  }
  if (doc.contains("constraints")) {
    const json& c = doc["constraints"];
    if (!c.contains("A") || !c.contains("b"))
      throw IoError("field 'constraints' needs both 'A' and 'b'");
    p.A = detail::json_to_mat(c["A"], "constraints.A");
    p.b = detail::json_to_vec(c["b"], "constraints.b");
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& err) {
    throw IoError(err.what());
  }
  return p;
}

inline json problem_to_json(const Problem& p) {
  json doc;
  doc["quadratic"] = {{"M", detail::mat_to_json(p.M)},
                      {"lin", detail::vec_to_json(p.lin)},
                      {"offset", p.offset}};
  doc["gamma"] = p.gamma;
  if (p.g_quad)
    doc["g_quad"] = {{"P", detail::mat_to_json(p.g_quad->P)},
                     {"c", detail::vec_to_json(p.g_quad->c)}};
  if (p.A)
    doc["constraints"] = {{"A", detail::mat_to_json(*p.A)},
                          {"b", detail::vec_to_json(*p.b)}};
  return doc;
}

inline Problem load_problem(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open problem file: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& err) {
    throw IoError("problem file " + path + ": " + err.what());
  }
  return problem_from_json(doc);
}

inline void save_problem(const Problem& p, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write problem file: " + path);
  out << problem_to_json(p).dump(2) << "\n";
}

/// One JSON line per iteration with the documented fields.
inline void write_trace_jsonl(const SolveTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trace file: " + path);
  for (const IterRecord& rec : trace.iters) {
    json line = {{"k", rec.k},        {"rho", rec.rho_used},
                 {"primal_res", rec.primal_res},
                 {"dual_res", trace.variant == Variant::perturbed ? rec.pert_dual
                                                                  : rec.dual_res},
                 {"dlambda", rec.dlambda},
                 {"L", rec.L},        {"P_tau", rec.P_tau},
                 {"t_wall", rec.t_wall}};
    out << line.dump() << "\n";
  }
}

inline json kkt_report_to_json(const KktReport& report) {
  json doc = {{"stationarity_res", report.stationarity_res},
              {"complementarity_res", report.complementarity_res},
              {"feasibility_res", report.feasibility_res},
              {"nondegenerate", report.nondegenerate}};
  if (!std::isnan(report.second_order_min_eig))
    doc["second_order_min_eig"] = std::isinf(report.second_order_min_eig)
                                      ? json("vacuous")
                                      : json(report.second_order_min_eig);
  if (!std::isnan(report.feasibility_gap))
    doc["feasibility_gap"] = report.feasibility_gap;
  return doc;
}

/// Benchmark CSV, one row per cell x method. Timing lives in the JSON
/// report only, so the CSV is byte-stable across repeats and job counts.
inline std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "p,n,card,gamma,seed,method,status,termination,objective,rdf_pct,"
         "rdf_is_absolute,card_sol,kkt_res,iters\n";
  for (const BenchRow& row : rows) {
    out << row.cell.p << ',' << row.cell.n << ',' << row.cell.card << ','
        << detail::fmt17(row.cell.gamma) << ',' << row.cell.seed << ','
        << row.method << ',' << (row.failed ? "failed" : "ok") << ','
        << row.termination << ',';
    if (row.failed) {
      out << ",,,,,\n";
      continue;
    }
    out << detail::fmt17(row.metrics.objective) << ','
        << detail::fmt17(row.metrics.rdf) << ','
        << (row.metrics.rdf_is_absolute ? 1 : 0) << ',' << row.metrics.card << ','
        << detail::fmt17(row.metrics.kkt_res) << ',' << row.metrics.iters << "\n";
  }
  return out.str();
}

inline json bench_rows_to_json(const std::vector<BenchRow>& rows) {
  json arr = json::array();
  for (const BenchRow& row : rows) {
    json entry = {{"p", row.cell.p},         {"n", row.cell.n},
                  {"card", row.cell.card},   {"gamma", row.cell.gamma},
                  {"seed", row.cell.seed},   {"method", row.method},
                  {"status", row.failed ? "failed" : "ok"},
                  {"termination", row.termination}};
    if (row.failed) {
      entry["error"] = row.error;
    } else {
      entry["objective"] = row.metrics.objective;
      entry["rdf_pct"] = row.metrics.rdf;
      entry["rdf_is_absolute"] = row.metrics.rdf_is_absolute;
      entry["card_sol"] = row.metrics.card;
      if (!std::isnan(row.metrics.kkt_res)) entry["kkt_res"] = row.metrics.kkt_res;
      entry["iters"] = row.metrics.iters;
      entry["time_s"] = row.metrics.time_s;
    }
    arr.push_back(entry);
  }
  return arr;
}

inline BenchConfig bench_config_from_json(const json& doc) {
  BenchConfig config;
  if (doc.contains("cells")) {
    for (const json& c : doc["cells"]) {
      BenchCell cell;
      if (!c.contains("p") || !c.contains("n") || !c.contains("card") ||
          !c.contains("gamma") || !c.contains("seed"))
        throw IoError("each cell needs fields p, n, card, gamma, seed");
      cell.p = c["p"].get<int>();
      cell.n = c["n"].get<int>();
      cell.card = c["card"].get<int>();
      cell.gamma = c["gamma"].get<double>();
      cell.seed = c["seed"].get<std::uint64_t>();
      config.cells.push_back(cell);
    }
  } else if (doc.contains("grid")) {
    const json& g = doc["grid"];
    for (const std::string& key : {"p", "n", "card", "gamma", "seeds"})
      if (!g.contains(key)) throw IoError("grid needs field '" + key + "'");
    for (const json& pv : g["p"])
      for (const json& nv : g["n"])
        for (const json& cv : g["card"])
          for (const json& gv : g["gamma"])
            for (const json& sv : g["seeds"])
              config.cells.push_back(BenchCell{pv.get<int>(), nv.get<int>(),
                                               cv.get<int>(), gv.get<double>(),
                                               sv.get<std::uint64_t>()});
  } else {
    throw IoError("benchmark config needs 'cells' or 'grid'");
  }
  if (!doc.contains("methods") || !doc["methods"].is_array() ||
      doc["methods"].empty())
    throw IoError("benchmark config needs a nonempty 'methods' array");
  for (const json& m : doc["methods"]) config.methods.push_back(m.get<std::string>());
  if (doc.contains("eps")) config.eps = doc["eps"].get<double>();
  if (doc.contains("max_iter")) config.max_iter = doc["max_iter"].get<long>();
  if (doc.contains("max_time")) config.max_time = doc["max_time"].get<double>();
  if (doc.contains("K")) config.K = doc["K"].get<double>();
  if (doc.contains("noise")) {
    const json& noise = doc["noise"];
    if (noise.is_string() && noise.get<std::string>() == "ratio10")
      config.noise = NoiseSpec::ratio10();
    else if (noise.is_object() && noise.contains("snr"))
      config.noise = NoiseSpec::with_snr(noise["snr"].get<double>());
    else
      throw IoError("field 'noise' must be \"ratio10\" or {\"snr\": value}");
  }
  if (doc.contains("reference")) config.reference = doc["reference"].get<std::string>();
  if (doc.contains("oracle_max_n")) config.oracle_max_n = doc["oracle_max_n"].get<int>();
  if (doc.contains("iht_tol")) config.iht_tol = doc["iht_tol"].get<double>();
  if (doc.contains("iht_starts")) config.iht_starts = doc["iht_starts"].get<int>();
  if (doc.contains("perturbed_preset"))
    config.perturbed_preset = doc["perturbed_preset"].get<std::string>();
  return config;
}

inline BenchConfig load_bench_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open benchmark config: " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& err) {
    throw IoError("benchmark config " + path + ": " + err.what());
  }
  return bench_config_from_json(doc);
}

}  // namespace l0qp
