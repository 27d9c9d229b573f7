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

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "slablu/driver.hpp"
#include "slablu/problem.hpp"
#include "slablu/verify.hpp"

namespace {

using nlohmann::json;

/// A fully validated run description: the flat key-value config file
/// plus any command-line overrides.  Exactly one of {b, c} and, for
/// Helmholtz problems, exactly one of {ppw, kappa} is set.
struct RunConfig {
  std::string problem = "poisson";
  Eigen::Index n1 = 0, n2 = 0;            // solve
  std::vector<Eigen::Index> sweep_n2;     // bench
  double aspect = 1.0;                    // bench: n1 = round(aspect * n2)
  std::optional<Eigen::Index> b;
  std::optional<double> c;
  std::optional<double> kappa, ppw;
  std::string compression = "auto";
  double hbs_tol = 1e-11;
  double hbs_trunc_rel = 1e-13;
  Eigen::Index hbs_leaf = 64;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string format = "csv";
  std::string output;  // empty writes to stdout
};

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw slablu::ConfigError("cannot read config file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw slablu::ConfigError(std::string("config is not valid JSON: ") +
                              e.what());
  }
}

Eigen::Index get_index(const json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
    throw slablu::ConfigError("config key '" + key +
                              "' must be a non-negative integer");
  return static_cast<Eigen::Index>(v.get<std::int64_t>());
}

double get_number(const json& v, const std::string& key) {
  if (!v.is_number())
    throw slablu::ConfigError("config key '" + key + "' must be a number");
  return v.get<double>();
}

std::string get_string(const json& v, const std::string& key,
                       const std::set<std::string>& allowed) {
  if (!v.is_string())
    throw slablu::ConfigError("config key '" + key + "' must be a string");
  const std::string s = v.get<std::string>();
  if (!allowed.empty() && allowed.find(s) == allowed.end()) {
    std::string msg = "config key '" + key + "' must be one of:";
    for (const auto& a : allowed) msg += " " + a;
    throw slablu::ConfigError(msg);
  }
  return s;
}

RunConfig parse_run_config(const json& j, bool bench) {
  if (!j.is_object())
    throw slablu::ConfigError("config must be a JSON object");
  static const std::set<std::string> known = {
      "problem", "n1",       "n2",     "sweep_n2",      "aspect",
      "b",       "c",        "kappa",  "ppw",           "compression",
      "hbs_tol", "hbs_leaf", "seed",   "hbs_trunc_rel", "threads",
      "format",  "output"};
  for (const auto& item : j.items())
    if (known.find(item.key()) == known.end())
      throw slablu::ConfigError("unknown config key: " + item.key());

  RunConfig rc;
  if (j.contains("problem"))
    rc.problem = get_string(j["problem"], "problem",
                            {"poisson", "helmholtz_const",
                             "helmholtz_varcoef"});
  if (j.contains("compression"))
    rc.compression = get_string(j["compression"], "compression",
                                {"auto", "dense", "hbs"});
  if (j.contains("format"))
    rc.format = get_string(j["format"], "format", {"csv", "json"});
  if (j.contains("output")) rc.output = get_string(j["output"], "output", {});
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() || j["seed"].get<std::int64_t>() < 0)
      throw slablu::ConfigError(
          "config key 'seed' must be a non-negative integer");
    rc.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("threads")) {
    rc.threads = static_cast<int>(get_index(j["threads"], "threads"));
    if (rc.threads < 1)
      throw slablu::ConfigError("config key 'threads' must be >= 1");
  }
  if (j.contains("b")) rc.b = get_index(j["b"], "b");
  if (j.contains("c")) rc.c = get_number(j["c"], "c");
  if (j.contains("kappa")) rc.kappa = get_number(j["kappa"], "kappa");
  if (j.contains("ppw")) rc.ppw = get_number(j["ppw"], "ppw");
  if (j.contains("hbs_tol")) rc.hbs_tol = get_number(j["hbs_tol"], "hbs_tol");
  if (j.contains("hbs_trunc_rel"))
    rc.hbs_trunc_rel = get_number(j["hbs_trunc_rel"], "hbs_trunc_rel");
  if (j.contains("hbs_leaf")) rc.hbs_leaf = get_index(j["hbs_leaf"], "hbs_leaf");

  if (rc.b && rc.c)
    throw slablu::ConfigError("set exactly one of 'b' and 'c', not both");
  if (rc.b && *rc.b < 1)
    throw slablu::ConfigError("config key 'b' must be >= 1");

  const bool is_helmholtz = rc.problem != "poisson";
  if (is_helmholtz) {
    if (rc.kappa && rc.ppw)
      throw slablu::ConfigError(
          "set exactly one of 'kappa' and 'ppw', not both");
    if (!rc.kappa && !rc.ppw)
      throw slablu::ConfigError(
          "Helmholtz problems need exactly one of 'kappa' and 'ppw'");
    if (rc.kappa && *rc.kappa <= 0.0)
      throw slablu::ConfigError("config key 'kappa' must be positive");
    if (rc.ppw && *rc.ppw <= 0.0)
      throw slablu::ConfigError("config key 'ppw' must be positive");
  } else if (rc.kappa || rc.ppw) {
    throw slablu::ConfigError("'kappa'/'ppw' apply only to Helmholtz problems");
  }

  if (bench) {
    if (j.contains("n1") || j.contains("n2"))
      throw slablu::ConfigError(
          "bench derives grids from 'sweep_n2' and 'aspect'; drop 'n1'/'n2'");
    if (!j.contains("sweep_n2") || !j["sweep_n2"].is_array() ||
        j["sweep_n2"].empty())
      throw slablu::ConfigError(
          "bench needs 'sweep_n2': a non-empty array of grid sizes");
    for (const auto& v : j["sweep_n2"]) {
      const Eigen::Index n2 = get_index(v, "sweep_n2");
      if (n2 < 2)
        throw slablu::ConfigError("'sweep_n2' entries must be >= 2");
      rc.sweep_n2.push_back(n2);
    }
    if (j.contains("aspect")) rc.aspect = get_number(j["aspect"], "aspect");
    if (rc.aspect < 1.0)
      throw slablu::ConfigError("'aspect' must be >= 1 so that n1 >= n2");
  } else {
    if (j.contains("sweep_n2") || j.contains("aspect"))
      throw slablu::ConfigError(
          "'sweep_n2'/'aspect' are bench keys; solve takes 'n1' and 'n2'");
    if (!j.contains("n1") || !j.contains("n2"))
      throw slablu::ConfigError("solve needs 'n1' and 'n2'");
    rc.n1 = get_index(j["n1"], "n1");
    rc.n2 = get_index(j["n2"], "n2");
    if (rc.n2 < 2 || rc.n1 < rc.n2)
      throw slablu::ConfigError("grid must satisfy n1 >= n2 >= 2");
  }
  return rc;
}

slablu::ProblemSpec make_spec(const RunConfig& rc, Eigen::Index n1,
                              Eigen::Index n2) {
  if (rc.problem == "poisson") return slablu::poisson_log_problem(n1, n2);
  const double kappa =
      rc.kappa ? *rc.kappa : slablu::kappa_from_ppw(*rc.ppw, n2);
  if (rc.problem == "helmholtz_const")
    return slablu::helmholtz_problem(n1, n2, kappa);
  return slablu::helmholtz_bump_problem(n1, n2, kappa);
}

slablu::SolverConfig make_solver_config(const RunConfig& rc) {
  slablu::SolverConfig config;
  config.b = rc.b.value_or(0);
  if (rc.c) config.c = *rc.c;
  if (rc.compression == "dense")
    config.compression = slablu::CompressionChoice::dense;
  else if (rc.compression == "hbs")
    config.compression = slablu::CompressionChoice::hbs;
  config.hbs_tol = rc.hbs_tol;
  config.hbs_trunc_rel = rc.hbs_trunc_rel;
  config.hbs_leaf_size = rc.hbs_leaf;
  config.seed = rc.seed;
  config.threads = rc.threads;
  return config;
}

/// The config with every default made explicit; re-running it must
/// reproduce the same report (timings aside) for the same seed.
json resolved_config(const RunConfig& rc, bool bench) {
  json j;
  j["problem"] = rc.problem;
  if (bench) {
    j["sweep_n2"] = json::array();
    for (const Eigen::Index n2 : rc.sweep_n2) j["sweep_n2"].push_back(n2);
    j["aspect"] = rc.aspect;
  } else {
    j["n1"] = rc.n1;
    j["n2"] = rc.n2;
  }
  if (rc.b)
    j["b"] = *rc.b;
  else
    j["c"] = rc.c.value_or(0.6);
  if (rc.kappa) j["kappa"] = *rc.kappa;
  if (rc.ppw) j["ppw"] = *rc.ppw;
  j["compression"] = rc.compression;
  j["hbs_tol"] = rc.hbs_tol;
  j["hbs_trunc_rel"] = rc.hbs_trunc_rel;
  j["hbs_leaf"] = rc.hbs_leaf;
  j["seed"] = rc.seed;
  j["threads"] = rc.threads;
  j["format"] = rc.format;
  if (!rc.output.empty()) j["output"] = rc.output;
  return j;
}

/// BLAS backends size their pools on first use, so pin the environment
/// before any solver call.
void apply_threads(int threads) {
  const std::string n = std::to_string(threads);
  setenv("OPENBLAS_NUM_THREADS", n.c_str(), 1);
  setenv("OMP_NUM_THREADS", n.c_str(), 1);
  Eigen::setNbThreads(threads);
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream out(path);
  if (!out) throw slablu::Error("cannot write output file: " + path);
  out << text;
  if (!out) throw slablu::Error("failed writing output file: " + path);
}

std::string sanitize_status(std::string s) {
  for (char& ch : s)
    if (ch == ',' || ch == '\n' || ch == '"' || ch == '\\') ch = ';';
  return s;
}

int cmd_solve(const RunConfig& rc, const std::string& dump_path) {
  apply_threads(rc.threads);
  if (!dump_path.empty())
    write_text(dump_path, resolved_config(rc, false).dump(2) + "\n");
  const slablu::SolveReport report =
      slablu::run_problem(make_spec(rc, rc.n1, rc.n2), make_solver_config(rc));
  std::string text;
  if (rc.format == "csv")
    text = std::string(slablu::kCsvHeader) + "\n" + slablu::csv_row(report) +
           "\n";
  else
    text = slablu::json_row(report) + "\n";
  write_text(rc.output, text);
  return 0;
}

int cmd_bench(const RunConfig& rc, const std::string& dump_path) {
  apply_threads(rc.threads);
  if (!dump_path.empty())
    write_text(dump_path, resolved_config(rc, true).dump(2) + "\n");
  std::vector<slablu::ProblemSpec> sweep;
  for (const Eigen::Index n2 : rc.sweep_n2) {
    const Eigen::Index n1 = std::max<Eigen::Index>(
        n2, static_cast<Eigen::Index>(std::llround(rc.aspect * double(n2))));
    sweep.push_back(make_spec(rc, n1, n2));
  }
  const slablu::SolverConfig config = make_solver_config(rc);

  std::ofstream file;
  std::ostream* os = &std::cout;
  if (!rc.output.empty()) {
    file.open(rc.output);
    if (!file) throw slablu::Error("cannot write output file: " + rc.output);
    os = &file;
  }
  if (rc.format == "csv") {
    slablu::benchmark(sweep, config, os);
    return 0;
  }
  // JSON Lines: one object per run, flushed as rows complete so a
  // crashed sweep still leaves the finished rows behind.
  for (const slablu::ProblemSpec& spec : sweep) {
    slablu::SolveReport report;
    std::string status = "ok";
    try {
      report = slablu::run_problem(spec, config);
    } catch (const slablu::Error& e) {
      report.n1 = spec.n1;
      report.n2 = spec.n2;
      report.n = spec.n1 * spec.n2;
      report.kappa = spec.kappa;
      report.seed = config.seed;
      status = sanitize_status(std::string("error: ") + e.what());
    }
    *os << slablu::json_row(report, status.c_str()) << "\n" << std::flush;
  }
  return 0;
}

int cmd_verify(bool full) {
  std::vector<slablu::CheckResult> results;
  try {
    results = slablu::run_verification(full ? slablu::VerifyLevel::full
                                            : slablu::VerifyLevel::quick);
  } catch (const std::exception& e) {
    std::cerr << "verification aborted: " << e.what() << "\n";
    return 3;
  }
  std::size_t passed = 0;
  for (const auto& r : results) {
    std::printf("[%s] %-26s %s (metric=%.3g)\n", r.pass ? "PASS" : "FAIL",
                r.name.c_str(), r.detail.c_str(), r.metric);
    if (r.pass) passed++;
  }
  std::printf("verification: %zu/%zu checks passed\n", passed, results.size());
  return passed == results.size() ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "slablu: two-level sparse direct solver for 2D elliptic problems"};
  app.require_subcommand(1);

  std::string config_path, output_path, format, dump_path;
  std::uint64_t seed = 0;
  int threads = 1;

  auto add_run_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "JSON config file")->required();
    cmd->add_option("--output", output_path,
                    "report destination (default: stdout)");
    cmd->add_option("--format", format, "report format: csv | json");
    cmd->add_option("--seed", seed, "override the config seed");
    cmd->add_option("--threads", threads, "override the config thread count");
    cmd->add_option("--dump-config", dump_path,
                    "write the resolved config (defaults filled) here");
  };
  CLI::App* solve = app.add_subcommand("solve", "factor and solve one problem");
  add_run_options(solve);
  CLI::App* bench =
      app.add_subcommand("bench", "run a grid sweep, appending rows per run");
  add_run_options(bench);

  CLI::App* verify =
      app.add_subcommand("verify", "run the built-in correctness checks");
  bool quick = false, full = false;
  CLI::Option* quick_opt =
      verify->add_flag("--quick", quick, "fast checks only (default)");
  verify->add_flag("--full", full, "also run the rank sweeps")
      ->excludes(quick_opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (verify->parsed()) return cmd_verify(full);

    json j = load_config(config_path);
    if (!j.is_object())
      throw slablu::ConfigError("config must be a JSON object");
    const CLI::App* cmd = solve->parsed() ? solve : bench;
    if (cmd->count("--seed")) j["seed"] = seed;
    if (cmd->count("--threads")) j["threads"] = threads;
    if (cmd->count("--format")) j["format"] = format;
    if (cmd->count("--output")) j["output"] = output_path;
    const RunConfig rc = parse_run_config(j, bench->parsed());
    return solve->parsed() ? cmd_solve(rc, dump_path)
                           : cmd_bench(rc, dump_path);
  } catch (const slablu::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
