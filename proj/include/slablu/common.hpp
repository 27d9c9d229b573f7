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
#ifndef SLABLU_COMMON_HPP
#define SLABLU_COMMON_HPP

#include <chrono>
#include <cstdint>
#include <iostream>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace slablu {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Base class for all errors thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid or inconsistent user-facing configuration.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what) {}
};

/// An exactly singular pivot was met during a factorization.  `index`
/// is the zero-based failing pivot column, or — when thrown by a block
/// algorithm — the zero-based block or slab that failed.
class SingularMatrixError : public Error {
 public:
  SingularMatrixError(const std::string& what, std::ptrdiff_t index)
      : Error(what + " (index " + std::to_string(index) + ")"), index(index) {}
  std::ptrdiff_t index;
};

/// Randomized compression could not reach the requested tolerance.
/// `residual_estimate` is the last a-posteriori probe result (relative).
class CompressionError : public Error {
 public:
  CompressionError(const std::string& what, double residual_estimate)
      : Error(what), residual_estimate(residual_estimate) {}
  double residual_estimate;
};

/// splitmix64 step; used to derive independent per-task seeds from one
/// user-provided seed so that results are reproducible run to run.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// iid standard normal matrix drawn from `rng`.
inline Matrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols,
                              std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(rows, cols);
  for (Eigen::Index j = 0; j < cols; j++)
    for (Eigen::Index i = 0; i < rows; i++) g(i, j) = gauss(rng);
  return g;
}

namespace detail {

/// Raw little-endian binary IO used by every serialized artifact.
inline void write_u64(std::ostream& os, std::uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint64_t read_u64(std::istream& is) {
  std::uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  if (!is) throw Error("deserialize: truncated stream");
  return v;
}

inline void write_dense(std::ostream& os, const Matrix& m) {
  write_u64(os, static_cast<std::uint64_t>(m.rows()));
  write_u64(os, static_cast<std::uint64_t>(m.cols()));
  os.write(reinterpret_cast<const char*>(m.data()),
           static_cast<std::streamsize>(sizeof(double) * m.size()));
}

inline Matrix read_dense(std::istream& is) {
  const Eigen::Index rows = static_cast<Eigen::Index>(read_u64(is));
  const Eigen::Index cols = static_cast<Eigen::Index>(read_u64(is));
  Matrix m(rows, cols);
  is.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!is) throw Error("deserialize: truncated stream");
  return m;
}

}  // namespace detail

/// Monotonic wall-clock stopwatch.
class StopWatch {
 public:
  StopWatch() : start_(clock::now()) {}
  void reset() { start_ = clock::now(); }
  double seconds() const {
    return std::chrono::duration<double>(clock::now() - start_).count();
  }

 private:
  using clock = std::chrono::steady_clock;
  clock::time_point start_;
};

}  // namespace slablu

#endif  // SLABLU_COMMON_HPP
