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
#ifndef SLABLU_DRIVER_HPP
#define SLABLU_DRIVER_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "slablu/banded.hpp"
#include "slablu/common.hpp"
#include "slablu/partition.hpp"
#include "slablu/problem.hpp"
#include "slablu/stage_one.hpp"
#include "slablu/stage_two.hpp"

namespace slablu {

/// How the reduced interface blocks are materialized.  `automatic`
/// switches to randomized compression once the interfaces are large
/// enough for sampling to beat n2 dense applies per block.
enum class CompressionChoice { automatic, dense, hbs };

struct SolverConfig {
  Eigen::Index b = 0;  // explicit buffer width; 0 derives it from c
  double c = 0.6;      // coefficient in b ~ c * n2^(2/3), c in (0, 2]
  CompressionChoice compression = CompressionChoice::automatic;
  double hbs_tol = 1e-11;        // per-block compression tolerance
  double hbs_trunc_rel = 1e-13;  // generator truncation floor
  Eigen::Index hbs_leaf_size = 64;
  std::uint64_t seed = 0;  // sole randomness source
  int threads = 1;
};

/// Buffer width balancing the two stage costs, b ~ c * n2^(2/3),
/// rounded to a multiple of ten and clamped to [10, n1/2].  An explicit
/// config.b wins.
inline Eigen::Index choose_b(Eigen::Index n1, Eigen::Index n2,
                             const SolverConfig& config) {
  if (config.b > 0) return config.b;
  if (n2 < 8) throw ConfigError("choose_b: n2 must be at least 8");
  if (!(config.c > 0.0) || config.c > 2.0)
    throw ConfigError("choose_b: coefficient c must lie in (0, 2]");
  const double raw = config.c * std::pow(double(n2), 2.0 / 3.0);
  const Eigen::Index rounded =
      10 * static_cast<Eigen::Index>(std::llround(raw / 10.0));
  const Eigen::Index hi = std::max<Eigen::Index>(1, n1 / 2);
  return std::clamp(rounded, std::min<Eigen::Index>(10, hi), hi);
}

/// Immutable two-stage factorization of one assembled system, reusable
/// across any number of solves.  When the buffer width covers the whole
/// grid (no partition possible) the factorization degenerates to a
/// single banded LU in the natural grid ordering.
struct Factorization {
  Eigen::Index n1 = 0, n2 = 0, b = 0;
  SolverConfig config{};  // resolved: b filled in, compression concrete
  SlabPartition part{};
  std::vector<SlabFactor> slabs;
  std::optional<SweepFactorization> sweep;
  std::optional<BandedLU> whole;  // degenerate single-slab path
  Eigen::Index hbs_max_rank = 0;
  double t_stage1 = 0.0, t_stage2 = 0.0;  // seconds
  std::size_t storage_stage1 = 0, storage_stage2 = 0;

  bool single_slab() const { return whole.has_value(); }
  std::size_t storage_scalars() const {
    return storage_stage1 + storage_stage2;
  }
};

namespace detail {

inline double seconds_since(
    std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                       t0)
      .count();
}

/// Whole-grid banded factorization; the natural ordering i*n2 + j is
/// already banded with bandwidth n2.
inline BandedLU factor_whole_grid(const SparseSystem& system) {
  const Eigen::Index n = system.dim(), n2 = system.n2;
  BandedMatrix a(n, n2, n2);
  for (Eigen::Index r = 0; r < n; r++)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(
             system.matrix, r);
         it; ++it)
      a.at(r, it.col()) = it.value();
  return BandedLU(std::move(a));
}

}  // namespace detail

/// Run both stages: partition, eliminate slab interiors, assemble the
/// reduced block tridiagonal system, and factor it by sweeping.
inline Factorization factorize(const SparseSystem& system,
                               SolverConfig config) {
  if (system.dim() == 0) throw ConfigError("factorize: empty system");
  Factorization fact;
  fact.n1 = system.n1;
  fact.n2 = system.n2;
  fact.b = config.b > 0 ? config.b
                        : choose_b(system.n1, system.n2, config);
  config.b = fact.b;

  const bool use_hbs =
      config.compression == CompressionChoice::hbs ||
      (config.compression == CompressionChoice::automatic &&
       system.n2 >= 512 && fact.b >= 16);
  config.compression =
      use_hbs ? CompressionChoice::hbs : CompressionChoice::dense;
  fact.config = config;

  const auto t0 = std::chrono::steady_clock::now();
  if (fact.b > system.n1 - 2 || system.n1 < 3) {
    fact.whole = detail::factor_whole_grid(system);
    fact.storage_stage1 = fact.whole->storage_scalars();
    fact.t_stage1 = detail::seconds_since(t0);
    return fact;
  }

  fact.part = partition(system.n1, system.n2, fact.b);
  fact.slabs = factor_interiors(system, fact.part);

  ReductionPolicy policy;
  policy.mode = use_hbs ? ReductionMode::hbs : ReductionMode::dense;
  policy.options.tol = config.hbs_tol;
  policy.options.trunc_rel = config.hbs_trunc_rel;
  policy.options.seed = config.seed;
  policy.leaf_size = config.hbs_leaf_size;
  ReducedSystem reduced =
      build_reduced(system, fact.part, fact.slabs, policy);
  fact.hbs_max_rank = reduced.hbs_max_rank;
  for (const SlabFactor& f : fact.slabs)
    fact.storage_stage1 +=
        f.lu.storage_scalars() +
        static_cast<std::size_t>(f.from_left.nonZeros() +
                                 f.from_right.nonZeros() +
                                 f.to_left.nonZeros() +
                                 f.to_right.nonZeros());
  fact.t_stage1 = detail::seconds_since(t0);

  const auto t1 = std::chrono::steady_clock::now();
  fact.sweep.emplace(sweep_build(std::move(reduced.blocks)));
  fact.storage_stage2 = fact.sweep->storage_scalars();
  fact.t_stage2 = detail::seconds_since(t1);
  return fact;
}

/// Solve A u = f for one or many right-hand sides with the precomputed
/// factorization; multiple columns share one sweep pass.
inline Matrix solve(const Factorization& fact,
                    const Eigen::Ref<const Matrix>& f) {
  if (f.rows() != fact.n1 * fact.n2)
    throw Error("solve: rhs length must equal the grid size");
  if (fact.single_slab()) return fact.whole->solve(f);
  const Matrix u_ifc =
      sweep_solve(*fact.sweep, reduce_rhs(f, fact.slabs, fact.part));
  return recover_interiors(u_ifc, f, fact.slabs, fact.part);
}

/// Timing/storage/accuracy summary of one factorize+solve run.
struct SolveReport {
  Eigen::Index n = 0, n1 = 0, n2 = 0, b = 0;
  double kappa = 0.0;
  double t_factor_stage1 = 0.0, t_factor_stage2 = 0.0, t_solve = 0.0;
  std::size_t m_factor_scalars = 0;
  ErrorReport errors{};
  Eigen::Index hbs_max_rank = 0;
  std::uint64_t seed = 0;

  std::size_t m_factor_bytes() const {
    return m_factor_scalars * sizeof(double);
  }
};

inline const char* kCsvHeader =
    "N,n1,n2,b,kappa,T_factor_stage1_s,T_factor_stage2_s,T_solve_s,"
    "M_factor_scalars,relerr_res,relerr_true,hbs_max_rank,seed";

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string format_time(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.6e", v);
  return buf;
}

}  // namespace detail

/// One CSV row in the column order of kCsvHeader; `status` appends a
/// trailing benchmark status column when non-null.
inline std::string csv_row(const SolveReport& r,
                           const char* status = nullptr) {
  std::string row;
  row += std::to_string(r.n) + ",";
  row += std::to_string(r.n1) + ",";
  row += std::to_string(r.n2) + ",";
  row += std::to_string(r.b) + ",";
  row += detail::format_double(r.kappa) + ",";
  row += detail::format_time(r.t_factor_stage1) + ",";
  row += detail::format_time(r.t_factor_stage2) + ",";
  row += detail::format_time(r.t_solve) + ",";
  row += std::to_string(r.m_factor_scalars) + ",";
  row += detail::format_double(r.errors.relerr_res) + ",";
  row += detail::format_double(r.errors.relerr_true) + ",";
  row += std::to_string(r.hbs_max_rank) + ",";
  row += std::to_string(r.seed);
  if (status) row += std::string(",") + status;
  return row;
}

/// JSON object mirroring the CSV fields under identical names.
inline std::string json_row(const SolveReport& r,
                            const char* status = nullptr) {
  std::string out = "{";
  out += "\"N\": " + std::to_string(r.n) + ", ";
  out += "\"n1\": " + std::to_string(r.n1) + ", ";
  out += "\"n2\": " + std::to_string(r.n2) + ", ";
  out += "\"b\": " + std::to_string(r.b) + ", ";
  out += "\"kappa\": " + detail::format_double(r.kappa) + ", ";
  out += "\"T_factor_stage1_s\": " +
         detail::format_time(r.t_factor_stage1) + ", ";
  out += "\"T_factor_stage2_s\": " +
         detail::format_time(r.t_factor_stage2) + ", ";
  out += "\"T_solve_s\": " + detail::format_time(r.t_solve) + ", ";
  out += "\"M_factor_scalars\": " + std::to_string(r.m_factor_scalars) +
         ", ";
  out += "\"relerr_res\": " + detail::format_double(r.errors.relerr_res) +
         ", ";
  out += "\"relerr_true\": " +
         detail::format_double(r.errors.relerr_true) + ", ";
  out += "\"hbs_max_rank\": " + std::to_string(r.hbs_max_rank) + ", ";
  out += "\"seed\": " + std::to_string(r.seed);
  if (status) out += std::string(", \"status\": \"") + status + "\"";
  out += "}";
  return out;
}

/// Assemble, factorize, and solve one problem; relerr_true is measured
/// against the Dirichlet data field sampled on the grid (the
/// manufactured solution for the canned problems).
inline SolveReport run_problem(const ProblemSpec& spec,
                               const SolverConfig& config) {
  const SparseSystem system = assemble_fd5(spec);
  SolveReport report;
  report.n = system.dim();
  report.n1 = system.n1;
  report.n2 = system.n2;
  report.kappa = spec.kappa;
  report.seed = config.seed;

  const Factorization fact = factorize(system, config);
  report.b = fact.b;
  report.hbs_max_rank = fact.hbs_max_rank;
  report.t_factor_stage1 = fact.t_stage1;
  report.t_factor_stage2 = fact.t_stage2;
  report.m_factor_scalars = fact.storage_scalars();

  const auto t0 = std::chrono::steady_clock::now();
  const Matrix u = solve(fact, system.rhs);
  report.t_solve = detail::seconds_since(t0);

  const Vector u_true = sample_field(system, spec.dirichlet_data);
  report.errors = error_report(system, u, u_true);
  return report;
}

/// Sweep harness: one report per problem, rows appended to `csv` as
/// they complete (crash-safe partial output).  Failed runs keep their
/// row with the error recorded in the status column and the sweep
/// continues.
inline std::vector<SolveReport> benchmark(
    const std::vector<ProblemSpec>& sweep, const SolverConfig& config,
    std::ostream* csv = nullptr) {
  std::vector<SolveReport> reports;
  if (csv) *csv << kCsvHeader << ",status\n" << std::flush;
  for (const ProblemSpec& spec : sweep) {
    SolveReport report;
    std::string status = "ok";
    try {
      report = run_problem(spec, config);
    } catch (const Error& e) {
      report.n1 = spec.n1;
      report.n2 = spec.n2;
      report.n = spec.n1 * spec.n2;
      report.kappa = spec.kappa;
      report.seed = config.seed;
      status = std::string("error: ") + e.what();
      for (char& ch : status)
        if (ch == ',' || ch == '\n') ch = ';';
    }
    reports.push_back(report);
    if (csv) *csv << csv_row(report, status.c_str()) << "\n" << std::flush;
  }
  return reports;
}

}  // namespace slablu

#endif  // SLABLU_DRIVER_HPP
