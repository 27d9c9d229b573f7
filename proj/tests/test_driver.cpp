/*
  This file is part of slablu, a sparse direct solver for elliptic
  partial differential equations discretized on two-dimensional
  tensor-product grids.

  Copyright (C) 2026 the slablu authors. All rights reserved.

  slablu is licensed under the Apache License, Version 2.0 (the
  "License"); you may not use this software except in compliance with
  the License.  You may obtain a copy of the License at

  http://www.apache.org/licenses/LICENSE-2.0
*/
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <catch2/catch_amalgamated.hpp>

#include "slablu/driver.hpp"
#include "slablu/problem.hpp"

namespace {

slablu::Matrix gaussian(Eigen::Index rows, Eigen::Index cols,
                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist;
  slablu::Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; j++)
    for (Eigen::Index i = 0; i < rows; i++) m(i, j) = dist(rng);
  return m;
}

std::vector<std::string> split_csv(const std::string& row) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : row) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

TEST_CASE("choose_b reproduces the reference buffer widths", "[driver]") {
  slablu::SolverConfig config;
  config.c = 0.5;
  CHECK(slablu::choose_b(4000, 1000, config) == 50);
  config.c = 0.6;
  CHECK(slablu::choose_b(4000, 1000, config) == 60);
  config.c = 0.54;
  CHECK(slablu::choose_b(40000, 10000, config) == 250);

  config.c = 0.6;
  CHECK(slablu::choose_b(24, 1000, config) == 12);  // clamped to n1/2
  config.c = 0.05;
  CHECK(slablu::choose_b(100, 8, config) == 10);  // clamped from below
  config.b = 17;
  CHECK(slablu::choose_b(100, 8, config) == 17);  // explicit override

  slablu::SolverConfig bad;
  CHECK_THROWS_AS(slablu::choose_b(100, 7, bad), slablu::ConfigError);
  bad.c = 0.0;
  CHECK_THROWS_AS(slablu::choose_b(100, 64, bad), slablu::ConfigError);
  bad.c = 2.5;
  CHECK_THROWS_AS(slablu::choose_b(100, 64, bad), slablu::ConfigError);
  bad.c = 2.0;
  CHECK_NOTHROW(slablu::choose_b(100, 64, bad));
}

TEST_CASE("factorize and solve match the dense oracle", "[driver]") {
  const auto sys =
      slablu::assemble_fd5(slablu::poisson_log_problem(32, 32));
  slablu::SolverConfig config;
  config.b = 4;
  const auto fact = slablu::factorize(sys, config);
  CHECK_FALSE(fact.single_slab());
  CHECK(fact.b == 4);
  CHECK(fact.config.compression == slablu::CompressionChoice::dense);
  CHECK(fact.t_stage1 >= 0.0);
  CHECK(fact.t_stage2 >= 0.0);
  const Eigen::Index k = fact.part.interface_count();
  CHECK(fact.storage_stage2 ==
        static_cast<std::size_t>((k + 2 * (k - 1)) * 32 * 32));

  slablu::Matrix f(sys.dim(), 2);
  f.col(0) = sys.rhs;
  f.col(1) = gaussian(sys.dim(), 1, 3);
  const slablu::Matrix u = slablu::solve(fact, f);
  const slablu::Matrix u_ref =
      slablu::Matrix(sys.matrix).partialPivLu().solve(f);
  CHECK((u - u_ref).cwiseAbs().maxCoeff() / u_ref.cwiseAbs().maxCoeff() <
        1e-10);

  CHECK_THROWS_AS(slablu::solve(fact, slablu::Matrix::Zero(7, 1)),
                  slablu::Error);
  CHECK_THROWS_AS(slablu::factorize(slablu::SparseSystem{}, config),
                  slablu::ConfigError);
}

TEST_CASE("solve returns the generating vector of a consistent rhs",
          "[driver]") {
  const auto sys =
      slablu::assemble_fd5(slablu::helmholtz_problem(48, 32, 9.0));
  slablu::SolverConfig config;
  config.b = 5;
  const auto fact = slablu::factorize(sys, config);
  const slablu::Matrix w = gaussian(sys.dim(), 2, 7);
  const slablu::Matrix u = slablu::solve(fact, sys.matrix * w);
  CHECK((u - w).norm() / w.norm() < 1e-10);
  CHECK(slablu::solve(fact, slablu::Matrix::Zero(sys.dim(), 3)).norm() ==
        0.0);
}

TEST_CASE("oversized buffer widths degenerate to one banded solve",
          "[driver]") {
  const auto sys =
      slablu::assemble_fd5(slablu::poisson_log_problem(16, 8));
  slablu::SolverConfig config;
  config.b = 20;  // wider than the grid
  const auto fact = slablu::factorize(sys, config);
  CHECK(fact.single_slab());
  CHECK(fact.storage_stage2 == 0);
  CHECK(fact.hbs_max_rank == 0);
  const slablu::Matrix u = slablu::solve(fact, sys.rhs);
  const slablu::Matrix u_ref =
      slablu::Matrix(sys.matrix).partialPivLu().solve(sys.rhs);
  CHECK((u - u_ref).norm() / u_ref.norm() < 1e-11);

  // The widest partitionable width still goes through the normal path.
  config.b = 14;
  const auto edge = slablu::factorize(sys, config);
  CHECK_FALSE(edge.single_slab());
  CHECK(edge.part.interface_count() == 1);
  CHECK((slablu::solve(edge, sys.rhs) - u_ref).norm() / u_ref.norm() <
        1e-11);
}

TEST_CASE("one factorization serves many solves bitwise", "[driver]") {
  const auto sys =
      slablu::assemble_fd5(slablu::poisson_log_problem(32, 16));
  slablu::SolverConfig config;
  config.b = 4;
  config.seed = 42;
  const auto fact = slablu::factorize(sys, config);
  const slablu::Matrix f = gaussian(sys.dim(), 1, 13);
  const slablu::Matrix u0 = slablu::solve(fact, f);
  for (int i = 0; i < 100; i++)
    REQUIRE((slablu::solve(fact, f) - u0).norm() == 0.0);
  const auto fact2 = slablu::factorize(sys, config);
  CHECK((slablu::solve(fact2, f) - u0).norm() == 0.0);
}

TEST_CASE("compressed factorization path solves to tolerance", "[driver]") {
  const auto sys =
      slablu::assemble_fd5(slablu::poisson_log_problem(64, 64));
  slablu::SolverConfig config;
  config.b = 4;
  config.compression = slablu::CompressionChoice::hbs;
  config.hbs_leaf_size = 16;
  const auto fact = slablu::factorize(sys, config);
  CHECK(fact.config.compression == slablu::CompressionChoice::hbs);
  CHECK(fact.hbs_max_rank > 0);
  const slablu::Matrix u = slablu::solve(fact, sys.rhs);
  const slablu::Matrix u_ref =
      slablu::Matrix(sys.matrix).partialPivLu().solve(sys.rhs);
  CHECK((u - u_ref).norm() / u_ref.norm() < 1e-9);

  // The automatic choice stays dense on small interfaces.
  slablu::SolverConfig small;
  small.b = 4;
  const auto plain = slablu::factorize(sys, small);
  CHECK(plain.config.compression == slablu::CompressionChoice::dense);
  CHECK(plain.hbs_max_rank == 0);
}

TEST_CASE("stage-one storage grows proportionally to b times N",
          "[driver]") {
  std::vector<double> ratios;
  for (Eigen::Index n : {64, 96, 128}) {
    const auto sys =
        slablu::assemble_fd5(slablu::poisson_log_problem(n, n));
    const auto fact = slablu::factorize(sys, slablu::SolverConfig{});
    ratios.push_back(double(fact.storage_stage1) /
                     (double(fact.b) * double(sys.dim())));
  }
  const auto [lo, hi] = std::minmax_element(ratios.begin(), ratios.end());
  CHECK(*hi / *lo < 1.2);
}

TEST_CASE("csv and json rows follow the report schema", "[driver]") {
  CHECK(std::string(slablu::kCsvHeader) ==
        "N,n1,n2,b,kappa,T_factor_stage1_s,T_factor_stage2_s,T_solve_s,"
        "M_factor_scalars,relerr_res,relerr_true,hbs_max_rank,seed");
  slablu::SolveReport r;
  r.n = 10;
  r.n1 = 5;
  r.n2 = 2;
  r.b = 3;
  r.kappa = 1.5;
  r.t_factor_stage1 = 0.25;
  r.t_factor_stage2 = 0.5;
  r.t_solve = 0.125;
  r.m_factor_scalars = 77;
  r.errors.relerr_res = 0.015625;
  r.errors.relerr_true = 0.25;
  r.hbs_max_rank = 4;
  r.seed = 9;
  CHECK(slablu::csv_row(r) ==
        "10,5,2,3,1.5,2.500000e-01,5.000000e-01,1.250000e-01,77,0.015625,"
        "0.25,4,9");
  CHECK(slablu::csv_row(r, "ok") ==
        "10,5,2,3,1.5,2.500000e-01,5.000000e-01,1.250000e-01,77,0.015625,"
        "0.25,4,9,ok");
  CHECK(r.m_factor_bytes() == 77 * sizeof(double));
  const std::string json = slablu::json_row(r, "ok");
  CHECK(json.front() == '{');
  CHECK(json.back() == '}');
  for (const char* key :
       {"\"N\": 10", "\"n1\": 5", "\"kappa\": 1.5",
        "\"M_factor_scalars\": 77", "\"relerr_res\": 0.015625",
        "\"hbs_max_rank\": 4", "\"seed\": 9", "\"status\": \"ok\""})
    CHECK(json.find(key) != std::string::npos);
}

TEST_CASE("benchmark sweeps converge at second order and survive bad rows",
          "[driver]") {
  std::vector<slablu::ProblemSpec> sweep = {
      slablu::poisson_log_problem(16, 16),
      slablu::poisson_log_problem(32, 32),
      slablu::poisson_log_problem(64, 64)};
  slablu::SolverConfig config;
  config.b = 4;
  std::ostringstream csv;
  const auto reports = slablu::benchmark(sweep, config, &csv);
  REQUIRE(reports.size() == 3);
  // Dirichlet-driven discretization error for the log reference field.
  CHECK(reports[0].errors.relerr_true ==
        Catch::Approx(1.890462e-03).epsilon(1e-4));
  CHECK(reports[1].errors.relerr_true ==
        Catch::Approx(4.961321e-04).epsilon(1e-4));
  CHECK(reports[2].errors.relerr_true ==
        Catch::Approx(1.261650e-04).epsilon(1e-4));
  for (int i = 0; i + 1 < 3; i++) {
    const double ratio = reports[i].errors.relerr_true /
                         reports[i + 1].errors.relerr_true;
    CHECK(ratio > 3.4);
    CHECK(ratio < 4.6);
  }
  std::istringstream lines(csv.str());
  std::string line;
  std::getline(lines, line);
  CHECK(line == std::string(slablu::kCsvHeader) + ",status");
  int rows = 0;
  while (std::getline(lines, line)) {
    const auto fields = split_csv(line);
    REQUIRE(fields.size() == 14);
    CHECK(fields[13] == "ok");
    rows++;
  }
  CHECK(rows == 3);

  // A failing row records its error and the sweep continues.
  slablu::ProblemSpec bad = slablu::poisson_log_problem(16, 16);
  bad.n1 = 4;
  bad.n2 = 8;
  std::ostringstream csv2;
  const auto mixed = slablu::benchmark(
      {bad, slablu::poisson_log_problem(16, 16)}, config, &csv2);
  REQUIRE(mixed.size() == 2);
  std::istringstream lines2(csv2.str());
  std::getline(lines2, line);
  std::getline(lines2, line);
  CHECK(split_csv(line)[13].find("error:") == 0);
  std::getline(lines2, line);
  CHECK(split_csv(line)[13] == "ok");

  CHECK(slablu::benchmark({}, config).empty());
}

TEST_CASE("identical config and seed reproduce reports bitwise",
          "[driver]") {
  slablu::SolverConfig config;
  config.b = 6;
  config.seed = 123;
  config.compression = slablu::CompressionChoice::hbs;
  config.hbs_leaf_size = 16;
  const auto spec = slablu::poisson_log_problem(64, 64);
  const auto r1 = slablu::run_problem(spec, config);
  const auto r2 = slablu::run_problem(spec, config);
  const auto f1 = split_csv(slablu::csv_row(r1));
  const auto f2 = split_csv(slablu::csv_row(r2));
  REQUIRE(f1.size() == f2.size());
  for (std::size_t i = 0; i < f1.size(); i++) {
    if (i == 5 || i == 6 || i == 7) continue;  // wall-clock columns
    CHECK(f1[i] == f2[i]);
  }

  const auto sys = slablu::assemble_fd5(spec);
  const auto u1 = slablu::solve(slablu::factorize(sys, config), sys.rhs);
  const auto u2 = slablu::solve(slablu::factorize(sys, config), sys.rhs);
  CHECK((u1 - u2).norm() == 0.0);
}

TEST_CASE("large smooth-coefficient problem solves at direct accuracy",
          "[driver][slow]") {
  slablu::SolverConfig config;
  config.b = 60;
  const auto report =
      slablu::run_problem(slablu::poisson_log_problem(1000, 1000), config);
  CHECK(report.errors.relerr_res < 1e-10);
  CHECK(report.errors.relerr_true > 1e-7);
  CHECK(report.errors.relerr_true < 2e-6);
  CHECK(report.hbs_max_rank > 0);  // interfaces wide enough to compress
}

TEST_CASE("large oscillatory problem keeps the residual at direct accuracy",
          "[driver][slow]") {
  slablu::SolverConfig config;
  config.b = 60;
  const auto report = slablu::run_problem(
      slablu::helmholtz_problem(1000, 1000, 27.12), config);
  CHECK(report.errors.relerr_res < 1e-9);
  CHECK(report.errors.relerr_true > 3e-4);
  CHECK(report.errors.relerr_true < 1e-2);
}
