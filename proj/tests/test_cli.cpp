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
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "slablu/driver.hpp"

namespace {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string out;  // stdout and stderr interleaved
};

/// Run the CLI as a subprocess with optional environment prefix.
RunResult run_cli(const std::string& args, const std::string& env = "") {
  std::string cmd;
  if (!env.empty()) cmd += env + " ";
  cmd += std::string(SLABLU_CLI_PATH) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  while (std::size_t got = std::fread(buf, 1, sizeof(buf), pipe))
    r.out.append(buf, got);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

/// Scratch directory removed when the test ends.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("slablu_cli_" + tag);
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& content) const {
    const fs::path p = path / name;
    std::ofstream(p) << content;
    return p.string();
  }
  std::string name(const std::string& leaf) const {
    return (path / leaf).string();
  }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  return fields;
}

}  // namespace

TEST_CASE("solve emits a csv report with the stable header", "[cli]") {
  TempDir dir("solve_csv");
  const std::string cfg = dir.file(
      "cfg.json",
      R"({"problem": "poisson", "n1": 64, "n2": 64, "b": 4, "seed": 5})");
  const auto r = run_cli("solve --config " + cfg);
  CAPTURE(r.out);
  REQUIRE(r.exit_code == 0);
  const auto lines = lines_of(r.out);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == slablu::kCsvHeader);
  const auto fields = split_csv(lines[1]);
  REQUIRE(fields.size() == 13);
  CHECK(fields[0] == "4096");
  CHECK(fields[1] == "64");
  CHECK(fields[2] == "64");
  CHECK(fields[3] == "4");
  CHECK(std::stod(fields[9]) <= 1e-10);   // relerr_res
  CHECK(std::stod(fields[10]) <= 2e-4);   // relerr_true, O(h^2)
  CHECK(fields[12] == "5");               // seed
}

TEST_CASE("solve emits a single json object on request", "[cli]") {
  TempDir dir("solve_json");
  const std::string cfg = dir.file(
      "cfg.json",
      R"({"problem": "helmholtz_const", "n1": 32, "n2": 32, "b": 4,)"
      R"( "ppw": 15, "format": "json"})");
  const auto r = run_cli("solve --config " + cfg);
  CAPTURE(r.out);
  REQUIRE(r.exit_code == 0);
  const auto lines = lines_of(r.out);
  REQUIRE(lines.size() == 1);
  CHECK(lines[0].front() == '{');
  CHECK(lines[0].find("\"N\": 1024") != std::string::npos);
  CHECK(lines[0].find("\"relerr_res\": ") != std::string::npos);
  CHECK(lines[0].find("\"kappa\": ") != std::string::npos);
  CHECK(lines[0].find("\"status\"") == std::string::npos);
}

TEST_CASE("malformed configs exit 1 and write nothing", "[cli]") {
  TempDir dir("badcfg");
  const std::string out_path = dir.name("report.csv");

  SECTION("not JSON at all") {
    const std::string cfg = dir.file("bad.json", "{this is not json");
    const auto r = run_cli("solve --config " + cfg + " --output " + out_path);
    CHECK(r.exit_code == 1);
    CHECK(r.out.find("config error") != std::string::npos);
    CHECK_FALSE(fs::exists(out_path));
  }

  SECTION("missing config file") {
    const auto r = run_cli("solve --config " + dir.name("absent.json"));
    CHECK(r.exit_code == 1);
  }

  SECTION("unknown key") {
    const std::string cfg = dir.file(
        "cfg.json", R"({"problem": "poisson", "n1": 16, "n2": 16, "bee": 3})");
    const auto r = run_cli("solve --config " + cfg);
    CHECK(r.exit_code == 1);
    CHECK(r.out.find("unknown config key: bee") != std::string::npos);
  }

  SECTION("both b and c") {
    const std::string cfg = dir.file(
        "cfg.json",
        R"({"problem": "poisson", "n1": 16, "n2": 16, "b": 3, "c": 0.5})");
    const auto r = run_cli("solve --config " + cfg);
    CHECK(r.exit_code == 1);
    CHECK(r.out.find("exactly one of 'b' and 'c'") != std::string::npos);
  }

  SECTION("helmholtz with both ppw and kappa") {
    const std::string cfg = dir.file(
        "cfg.json",
        R"({"problem": "helmholtz_const", "n1": 16, "n2": 16, "b": 3,)"
        R"( "ppw": 15, "kappa": 6.0})");
    const auto r = run_cli("solve --config " + cfg + " --output " + out_path);
    CHECK(r.exit_code == 1);
    CHECK(r.out.find("'kappa' and 'ppw'") != std::string::npos);
    CHECK_FALSE(fs::exists(out_path));
  }

  SECTION("helmholtz with neither ppw nor kappa") {
    const std::string cfg = dir.file(
        "cfg.json",
        R"({"problem": "helmholtz_varcoef", "n1": 16, "n2": 16, "b": 3})");
    const auto r = run_cli("solve --config " + cfg);
    CHECK(r.exit_code == 1);
  }

  SECTION("poisson rejects kappa") {
    const std::string cfg = dir.file(
        "cfg.json",
        R"({"problem": "poisson", "n1": 16, "n2": 16, "b": 3, "kappa": 2.0})");
    const auto r = run_cli("solve --config " + cfg);
    CHECK(r.exit_code == 1);
  }

  SECTION("missing required --config flag") {
    const auto r = run_cli("solve");
    CHECK(r.exit_code == 1);
  }

  SECTION("unknown subcommand") {
    const auto r = run_cli("frobnicate");
    CHECK(r.exit_code == 1);
  }

  SECTION("help exits 0") {
    const auto r = run_cli("--help");
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("solve") != std::string::npos);
    CHECK(r.out.find("bench") != std::string::npos);
    CHECK(r.out.find("verify") != std::string::npos);
  }
}

TEST_CASE("bench writes rows with a status column and keeps going",
          "[cli]") {
  TempDir dir("bench");
  // n2 = 4 cannot derive b (needs n2 >= 8): that row must carry an
  // error status while the rest of the sweep completes.
  const std::string cfg = dir.file(
      "cfg.json",
      R"({"problem": "poisson", "sweep_n2": [4, 16, 32, 64], "c": 0.6,)"
      R"( "seed": 2})");
  const std::string out_path = dir.name("rows.csv");
  const auto r = run_cli("bench --config " + cfg + " --output " + out_path);
  CAPTURE(r.out);
  REQUIRE(r.exit_code == 0);
  const auto lines = lines_of(slurp(out_path));
  REQUIRE(lines.size() == 5);
  CHECK(lines[0] == std::string(slablu::kCsvHeader) + ",status");
  CHECK(lines[1].find(",error: ") != std::string::npos);
  CHECK(lines[1].find("n2 must be at least 8") != std::string::npos);
  double prev = 1.0;
  for (int i = 2; i <= 4; i++) {
    const auto fields = split_csv(lines[static_cast<std::size_t>(i)]);
    REQUIRE(fields.size() == 14);
    CHECK(fields[13] == "ok");
    const double relerr_true = std::stod(fields[10]);
    CHECK(relerr_true < prev);  // second-order convergence is monotone
    prev = relerr_true;
  }
}

TEST_CASE("bench emits json lines on request", "[cli]") {
  TempDir dir("bench_json");
  const std::string cfg = dir.file(
      "cfg.json",
      R"({"problem": "poisson", "sweep_n2": [16, 32], "b": 4})");
  const auto r = run_cli("bench --config " + cfg + " --format json");
  CAPTURE(r.out);
  REQUIRE(r.exit_code == 0);
  const auto lines = lines_of(r.out);
  REQUIRE(lines.size() == 2);
  for (const auto& line : lines) {
    CHECK(line.front() == '{');
    CHECK(line.find("\"status\": \"ok\"") != std::string::npos);
  }
  CHECK(lines[0].find("\"n2\": 16") != std::string::npos);
  CHECK(lines[1].find("\"n2\": 32") != std::string::npos);
}

TEST_CASE("bench rejects solve-style grid keys", "[cli]") {
  TempDir dir("bench_keys");
  const std::string cfg = dir.file(
      "cfg.json", R"({"problem": "poisson", "n1": 16, "n2": 16, "b": 3})");
  const auto r = run_cli("bench --config " + cfg);
  CHECK(r.exit_code == 1);
  const std::string cfg2 = dir.file(
      "cfg2.json", R"({"problem": "poisson", "sweep_n2": [16], "b": 3})");
  const auto r2 = run_cli("solve --config " + cfg2);
  CHECK(r2.exit_code == 1);
}

TEST_CASE("resolved config round-trips to an identical report", "[cli]") {
  TempDir dir("roundtrip");
  const std::string cfg = dir.file(
      "cfg.json",
      R"({"problem": "helmholtz_const", "n1": 48, "n2": 32, "kappa": 9.0,)"
      R"( "b": 5, "seed": 77})");
  const std::string dump1 = dir.name("resolved.json");
  const std::string out1 = dir.name("a.csv"), out2 = dir.name("b.csv");
  const auto r1 = run_cli("solve --config " + cfg + " --output " + out1 +
                          " --dump-config " + dump1);
  REQUIRE(r1.exit_code == 0);

  const std::string dump2 = dir.name("resolved2.json");
  const auto r2 = run_cli("solve --config " + dump1 + " --output " + out2 +
                          " --dump-config " + dump2);
  REQUIRE(r2.exit_code == 0);

  // The dumped config is a fixed point up to the output override.
  auto strip_output = [](const std::string& text) {
    std::string s;
    for (const auto& line : lines_of(text))
      if (line.find("\"output\"") == std::string::npos) s += line + "\n";
    return s;
  };
  CHECK(strip_output(slurp(dump1)) == strip_output(slurp(dump2)));

  // Reports agree except in the timing columns (5, 6, 7).
  const auto rows1 = lines_of(slurp(out1)), rows2 = lines_of(slurp(out2));
  REQUIRE(rows1.size() == 2);
  REQUIRE(rows2.size() == 2);
  CHECK(rows1[0] == rows2[0]);
  const auto f1 = split_csv(rows1[1]), f2 = split_csv(rows2[1]);
  REQUIRE(f1.size() == f2.size());
  for (std::size_t i = 0; i < f1.size(); i++) {
    if (i == 5 || i == 6 || i == 7) continue;
    CAPTURE(i);
    CHECK(f1[i] == f2[i]);
  }
}

TEST_CASE("command-line flags override config values", "[cli]") {
  TempDir dir("overrides");
  const std::string cfg = dir.file(
      "cfg.json",
      R"({"problem": "poisson", "n1": 24, "n2": 16, "b": 3, "seed": 1})");
  const auto r = run_cli("solve --config " + cfg + " --seed 42");
  REQUIRE(r.exit_code == 0);
  const auto fields = split_csv(lines_of(r.out)[1]);
  CHECK(fields[12] == "42");
}

TEST_CASE("verify quick passes on a healthy build", "[cli]") {
  const auto r = run_cli("verify --quick");
  CAPTURE(r.out);
  CHECK(r.exit_code == 0);
  CHECK(r.out.find("[PASS] elimination-exactness") != std::string::npos);
  CHECK(r.out.find("[FAIL]") == std::string::npos);
  CHECK(r.out.find("7/7 checks passed") != std::string::npos);
  // Default level is quick.
  const auto r2 = run_cli("verify");
  CHECK(r2.exit_code == 0);
}

TEST_CASE("injected elimination fault makes verify exit 3 naming the check",
          "[cli]") {
  const auto r = run_cli("verify --quick", "SLABLU_INJECT_FAULT=elimination");
  CAPTURE(r.out);
  CHECK(r.exit_code == 3);
  CHECK(r.out.find("[FAIL] elimination-exactness") != std::string::npos);
  CHECK(r.out.find("[FAIL] dense-oracle") == std::string::npos);
  CHECK(r.out.find("6/7 checks passed") != std::string::npos);
}

TEST_CASE("verify full runs the rank sweeps and reports them honestly",
          "[cli]") {
  const auto r = run_cli("verify --full");
  CAPTURE(r.out);
  CHECK(r.exit_code == 3);
  CHECK(r.out.find("[FAIL] rank-bound-b2") != std::string::npos);
  CHECK(r.out.find("[FAIL] rank-bound-b4") != std::string::npos);
  CHECK(r.out.find("[PASS] rank-bound-b8") != std::string::npos);
  CHECK(r.out.find("8/10 checks passed") != std::string::npos);

  const auto r2 = run_cli("verify --quick --full");
  CHECK(r2.exit_code == 1);
}
