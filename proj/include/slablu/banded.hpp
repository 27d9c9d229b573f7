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
#ifndef SLABLU_BANDED_HPP
#define SLABLU_BANDED_HPP

#include <algorithm>
#include <cstdint>
#include <istream>
#include <ostream>
#include <utility>
#include <vector>

#include <lapacke.h>

#include "slablu/common.hpp"

namespace slablu {

/// Square banded matrix in LAPACK band storage (column major, with the
/// extra `kl` fill rows dgbtrf needs, so factorization can run in place).
/// Entry (i, j) lives at band[kl + ku + i - j, j] for |i - j| within band.
class BandedMatrix {
 public:
  BandedMatrix(Eigen::Index n, Eigen::Index kl, Eigen::Index ku)
      : n_(n), kl_(kl), ku_(ku), ldab_(2 * kl + ku + 1),
        band_(static_cast<std::size_t>(ldab_) * n, 0.0) {
    if (n < 1 || kl < 0 || ku < 0 || kl >= n || ku >= n)
      throw Error("BandedMatrix: inconsistent bandwidths");
  }

  Eigen::Index dim() const { return n_; }
  Eigen::Index lower_bandwidth() const { return kl_; }
  Eigen::Index upper_bandwidth() const { return ku_; }

  double& at(Eigen::Index i, Eigen::Index j) {
    if (i < 0 || j < 0 || i >= n_ || j >= n_ || i - j > kl_ || j - i > ku_)
      throw Error("BandedMatrix::at: index outside band");
    return band_[static_cast<std::size_t>(j) * ldab_ + kl_ + ku_ + i - j];
  }

  double coeff(Eigen::Index i, Eigen::Index j) const {
    if (i < 0 || j < 0 || i >= n_ || j >= n_ || i - j > kl_ || j - i > ku_)
      return 0.0;
    return band_[static_cast<std::size_t>(j) * ldab_ + kl_ + ku_ + i - j];
  }

  /// Band matrix-matrix product A * X (or A^T * X).
  Matrix apply(const Matrix& x, bool adjoint = false) const {
    if (x.rows() != n_) throw Error("BandedMatrix::apply: dimension mismatch");
    Matrix y = Matrix::Zero(n_, x.cols());
    for (Eigen::Index j = 0; j < n_; j++) {
      const Eigen::Index i0 = std::max<Eigen::Index>(0, j - ku_);
      const Eigen::Index i1 = std::min(n_ - 1, j + kl_);
      for (Eigen::Index i = i0; i <= i1; i++) {
        const double v = band_[static_cast<std::size_t>(j) * ldab_ + kl_ + ku_ + i - j];
        if (!adjoint)
          y.row(i) += v * x.row(j);
        else
          y.row(j) += v * x.row(i);
      }
    }
    return y;
  }

  Matrix to_dense() const {
    Matrix d = Matrix::Zero(n_, n_);
    for (Eigen::Index j = 0; j < n_; j++)
      for (Eigen::Index i = std::max<Eigen::Index>(0, j - ku_);
           i <= std::min(n_ - 1, j + kl_); i++)
        d(i, j) = coeff(i, j);
    return d;
  }

  std::vector<double>& raw_band() { return band_; }
  const std::vector<double>& raw_band() const { return band_; }
  Eigen::Index leading_dimension() const { return ldab_; }

 private:
  Eigen::Index n_, kl_, ku_, ldab_;
  std::vector<double> band_;
};

/// Banded LU with partial pivoting (LAPACK dgbtrf).  Pivoting fills the
/// upper band out to kl + ku; the factor object is immutable and supports
/// blocked normal and adjoint solves.
class BandedLU {
 public:
  explicit BandedLU(BandedMatrix a)
      : n_(a.dim()), kl_(a.lower_bandwidth()), ku_(a.upper_bandwidth()),
        ldab_(a.leading_dimension()), band_(std::move(a.raw_band())),
        ipiv_(n_) {
    lapack_int info = LAPACKE_dgbtrf(
        LAPACK_COL_MAJOR, static_cast<lapack_int>(n_),
        static_cast<lapack_int>(n_), static_cast<lapack_int>(kl_),
        static_cast<lapack_int>(ku_), band_.data(),
        static_cast<lapack_int>(ldab_), ipiv_.data());
    if (info > 0)
      throw SingularMatrixError("BandedLU: exactly singular pivot", info - 1);
    if (info < 0) throw Error("BandedLU: illegal argument to dgbtrf");
  }

  Eigen::Index dim() const { return n_; }

  /// Solve A X = B (normal) or A^T X = B (adjoint), multi-column.
  Matrix solve(const Eigen::Ref<const Matrix>& b, bool adjoint = false) const {
    if (b.rows() != n_) throw Error("BandedLU::solve: dimension mismatch");
    Matrix x = b;
    if (x.cols() == 0) return x;
    lapack_int info = LAPACKE_dgbtrs(
        LAPACK_COL_MAJOR, adjoint ? 'T' : 'N', static_cast<lapack_int>(n_),
        static_cast<lapack_int>(kl_), static_cast<lapack_int>(ku_),
        static_cast<lapack_int>(x.cols()), band_.data(),
        static_cast<lapack_int>(ldab_), ipiv_.data(), x.data(),
        static_cast<lapack_int>(x.rows()));
    if (info != 0) throw Error("BandedLU: dgbtrs failed");
    return x;
  }

  /// Count of stored floating-point scalars (pivot integers excluded).
  std::size_t storage_scalars() const { return band_.size(); }

  void serialize(std::ostream& os) const {
    const std::uint64_t dims[4] = {
        static_cast<std::uint64_t>(n_), static_cast<std::uint64_t>(kl_),
        static_cast<std::uint64_t>(ku_), static_cast<std::uint64_t>(ldab_)};
    os.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    os.write(reinterpret_cast<const char*>(band_.data()),
             static_cast<std::streamsize>(band_.size() * sizeof(double)));
    std::vector<std::int64_t> piv(ipiv_.begin(), ipiv_.end());
    os.write(reinterpret_cast<const char*>(piv.data()),
             static_cast<std::streamsize>(piv.size() * sizeof(std::int64_t)));
  }

  static BandedLU deserialize(std::istream& is) {
    std::uint64_t dims[4];
    is.read(reinterpret_cast<char*>(dims), sizeof(dims));
    if (!is) throw Error("BandedLU::deserialize: truncated stream");
    BandedLU f(private_tag{});
    f.n_ = static_cast<Eigen::Index>(dims[0]);
    f.kl_ = static_cast<Eigen::Index>(dims[1]);
    f.ku_ = static_cast<Eigen::Index>(dims[2]);
    f.ldab_ = static_cast<Eigen::Index>(dims[3]);
    f.band_.resize(static_cast<std::size_t>(f.ldab_) * f.n_);
    is.read(reinterpret_cast<char*>(f.band_.data()),
            static_cast<std::streamsize>(f.band_.size() * sizeof(double)));
    std::vector<std::int64_t> piv(f.n_);
    is.read(reinterpret_cast<char*>(piv.data()),
            static_cast<std::streamsize>(piv.size() * sizeof(std::int64_t)));
    if (!is) throw Error("BandedLU::deserialize: truncated stream");
    f.ipiv_.assign(piv.begin(), piv.end());
    return f;
  }

 private:
  struct private_tag {};
  explicit BandedLU(private_tag) {}

  Eigen::Index n_ = 0, kl_ = 0, ku_ = 0, ldab_ = 0;
  std::vector<double> band_;
  std::vector<lapack_int> ipiv_;
};

}  // namespace slablu

#endif  // SLABLU_BANDED_HPP
