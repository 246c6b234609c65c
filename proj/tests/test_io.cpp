// Copyright (c) l0qp contributors. Licensed under the Apache License 2.0.

#include <cstdio>
#include <filesystem>
#include <fstream>

#include <catch2/catch_amalgamated.hpp>

#include "l0qp/io.hpp"
#include "test_support.hpp"

using namespace l0qp;
using namespace l0qp::testing;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("problem JSON round-trip is exact") {
  Rng rng(81, "io-roundtrip");
  Problem p = make_problem(random_symmetric(3, rng), random_vec(3, rng), 0.75);
  p.offset = 12.5;
  p.g_quad = QuadTerm{random_psd(3, rng), random_vec(3, rng)};
  Mat A(2, 3);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 3; ++j) A(i, j) = rng.normal();
  p.A = A;
  p.b = random_vec(2, rng);
  p.validate();

  const auto path = temp_file("l0qp_roundtrip.json");
  save_problem(p, path.string());
  const Problem q = load_problem(path.string());
  CHECK((p.M - q.M).norm() == 0.0);
  CHECK((p.lin - q.lin).norm() == 0.0);
  CHECK(p.gamma == q.gamma);
  CHECK(p.offset == q.offset);
  CHECK((p.g_quad->P - q.g_quad->P).norm() == 0.0);
  CHECK((*p.A - *q.A).norm() == 0.0);
  CHECK((*p.b - *q.b).norm() == 0.0);
  std::filesystem::remove(path);
}

TEST_CASE("least-squares files load through the normal equations") {
  json doc;
  doc["least_squares"] = {{"C", {{1.0, 0.0}, {0.0, 2.0}}}, {"obs", {3.0, 4.0}}};
  doc["gamma"] = 1.5;
  const Problem p = problem_from_json(doc);
  CHECK(p.n == 2);
  CHECK(p.M(1, 1) == Catch::Approx(4.0));
  CHECK(p.lin[0] == Catch::Approx(-6.0));
  CHECK(p.offset == Catch::Approx(25.0));
}

TEST_CASE("malformed problem files name the offending field") {
  json doc;
  doc["quadratic"] = {{"M", {{1.0}}}, {"lin", {0.0}}};
  CHECK_THROWS_WITH(problem_from_json(doc), Catch::Matchers::ContainsSubstring("gamma"));

  json both;
  both["quadratic"] = {{"M", {{1.0}}}, {"lin", {0.0}}};
  both["least_squares"] = {{"C", {{1.0}}}, {"obs", {0.0}}};
  both["gamma"] = 1.0;
  CHECK_THROWS_AS(problem_from_json(both), IoError);

  json ragged;
  ragged["quadratic"] = {{"M", {{1.0, 2.0}, {3.0}}}, {"lin", {0.0, 0.0}}};
  ragged["gamma"] = 1.0;
  CHECK_THROWS_WITH(problem_from_json(ragged),
                    Catch::Matchers::ContainsSubstring("quadratic.M"));

  json shape;
  shape["quadratic"] = {{"M", {{1.0, 0.0}, {0.0, 1.0}}}, {"lin", {0.0}}};
  shape["gamma"] = 1.0;
  CHECK_THROWS_AS(problem_from_json(shape), IoError);
}

TEST_CASE("trace JSONL has the documented fields") {
  const LsrInstance inst =
      generate_lsr_instance(10, 4, 2, 5.0, NoiseSpec::ratio10(), 31);
  const Problem p = to_problem(inst, 1.0);
  AdmmOptions opts;
  opts.rho0 = p.gamma;
  opts.delta = 0.5;
  opts.max_iter = 50;
  opts.eps = 1e-12;
  const SolveTrace trace = run_admm_cf(p, opts);

  const auto path = temp_file("l0qp_trace.jsonl");
  write_trace_jsonl(trace, path.string());
  std::ifstream in(path);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    const json rec = json::parse(line);
    for (const char* key :
         {"k", "rho", "primal_res", "dual_res", "dlambda", "L", "P_tau", "t_wall"})
      CHECK(rec.contains(key));
    ++lines;
  }
  CHECK(lines == trace.iters.size());
  std::filesystem::remove(path);
}

TEST_CASE("bench csv excludes timing and is stable") {
  BenchConfig config;
  config.cells = {BenchCell{10, 4, 2, 1.0, 1}};
  config.methods = {"oracle", "iht"};
  config.iht_starts = 3;
  const auto rows = run_benchmark(config);
  const std::string csv = bench_csv(rows);
  CHECK(csv.find("time") == std::string::npos);
  CHECK(csv.find("oracle") != std::string::npos);
  // Repeat run: identical bytes.
  const auto rows2 = run_benchmark(config);
  CHECK(bench_csv(rows2) == csv);
}

TEST_CASE("bench config parses cells, grids, and noise") {
  json doc;
  doc["cells"] = {{{"p", 10}, {"n", 4}, {"card", 2}, {"gamma", 1.0}, {"seed", 3}}};
  doc["methods"] = {"oracle"};
  doc["noise"] = "ratio10";
  const BenchConfig a = bench_config_from_json(doc);
  CHECK(a.cells.size() == 1);
  CHECK(a.cells[0].seed == 3);

  json grid;
  grid["grid"] = {{"p", {10}},
                  {"n", {4, 6}},
                  {"card", {2}},
                  {"gamma", {0.1, 1.0}},
                  {"seeds", {1, 2, 3}}};
  grid["methods"] = {"admm-cf"};
  grid["noise"] = {{"snr", 5.0}};
  const BenchConfig b = bench_config_from_json(grid);
  CHECK(b.cells.size() == 2 * 2 * 3);
  CHECK(b.noise.kind == NoiseSpec::Kind::snr);

  json bad;
  bad["methods"] = json::array();
  CHECK_THROWS_AS(bench_config_from_json(bad), IoError);
}

TEST_CASE("solve report fields match the published schema") {
  // Structural validation against schema/solve_report.schema.json: required
  // fields exist and primitive types line up.
  const std::string schema_path =
      std::string(L0QP_SOURCE_DIR) + "/schema/solve_report.schema.json";
  std::ifstream schema_in(schema_path);
  REQUIRE(schema_in.good());
  const json schema = json::parse(schema_in);

  json report;
  report["schema"] = 1;
  report["solver"] = "admm-cf";
  report["options"] = json::object();
  report["objective"] = 1.0;
  report["cardinality"] = 2;
  report["termination"] = "converged";
  report["iterations"] = 10;
  report["time_s"] = 0.5;

  for (const auto& field : schema["required"]) {
    CHECK(report.contains(field.get<std::string>()));
  }
  for (auto it = schema["properties"].begin(); it != schema["properties"].end(); ++it) {
    if (!report.contains(it.key())) continue;
    const std::string type = it.value()["type"].get<std::string>();
    const json& value = report[it.key()];
    if (type == "number") CHECK(value.is_number());
    if (type == "integer") CHECK(value.is_number_integer());
    if (type == "string") CHECK(value.is_string());
    if (type == "object") CHECK(value.is_object());
  }
}
