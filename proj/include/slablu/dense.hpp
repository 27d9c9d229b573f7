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
#ifndef SLABLU_DENSE_HPP
#define SLABLU_DENSE_HPP

#include <utility>
#include <vector>

#include <lapacke.h>

#include "slablu/common.hpp"

namespace slablu {

/// Dense LU factorization with partial pivoting (LAPACK dgetrf).
/// The factor object is immutable after construction; solves against it
/// are reentrant.
class DenseLU {
 public:
  explicit DenseLU(Matrix a) : lu_(std::move(a)), ipiv_(lu_.rows()) {
    if (lu_.rows() != lu_.cols())
      throw Error("DenseLU: matrix must be square");
    if (lu_.rows() == 0) return;
    lapack_int info = LAPACKE_dgetrf(
        LAPACK_COL_MAJOR, static_cast<lapack_int>(lu_.rows()),
        static_cast<lapack_int>(lu_.cols()), lu_.data(),
        static_cast<lapack_int>(lu_.rows()), ipiv_.data());
    if (info > 0)
      throw SingularMatrixError("DenseLU: exactly singular pivot", info - 1);
    if (info < 0) throw Error("DenseLU: illegal argument to dgetrf");
  }

  Eigen::Index dim() const { return lu_.rows(); }

  /// Solve A X = B (normal) or A^T X = B (adjoint; real arithmetic).
  /// Accepts vectors, matrices, and expressions; returns a dense block.
  Matrix solve(const Eigen::Ref<const Matrix>& b, bool adjoint = false) const {
    if (b.rows() != lu_.rows())
      throw Error("DenseLU::solve: dimension mismatch");
    Matrix x = b;
    if (lu_.rows() == 0 || x.cols() == 0) return x;
    lapack_int info = LAPACKE_dgetrs(
        LAPACK_COL_MAJOR, adjoint ? 'T' : 'N',
        static_cast<lapack_int>(lu_.rows()),
        static_cast<lapack_int>(x.cols()), lu_.data(),
        static_cast<lapack_int>(lu_.rows()), ipiv_.data(), x.data(),
        static_cast<lapack_int>(x.rows()));
    if (info != 0) throw Error("DenseLU: dgetrs failed");
    return x;
  }

  /// Count of stored floating-point scalars (pivot integers excluded).
  std::size_t storage_scalars() const {
    return static_cast<std::size_t>(lu_.size());
  }

  const Matrix& packed_factors() const { return lu_; }
  const std::vector<lapack_int>& pivots() const { return ipiv_; }

  void serialize(std::ostream& os) const {
    detail::write_dense(os, lu_);
    std::vector<std::int64_t> piv(ipiv_.begin(), ipiv_.end());
    os.write(reinterpret_cast<const char*>(piv.data()),
             static_cast<std::streamsize>(piv.size() * sizeof(std::int64_t)));
  }

  static DenseLU deserialize(std::istream& is) {
    DenseLU f(private_tag{});
    f.lu_ = detail::read_dense(is);
    std::vector<std::int64_t> piv(static_cast<std::size_t>(f.lu_.rows()));
    is.read(reinterpret_cast<char*>(piv.data()),
            static_cast<std::streamsize>(piv.size() * sizeof(std::int64_t)));
    if (!is) throw Error("DenseLU::deserialize: truncated stream");
    f.ipiv_.assign(piv.begin(), piv.end());
    return f;
  }

 private:
  struct private_tag {};
  explicit DenseLU(private_tag) {}

  Matrix lu_;
  std::vector<lapack_int> ipiv_;
};

/// Count of singular values exceeding rel_tol * sigma_max; 0 for the zero
/// (or empty) matrix.
inline int numerical_rank(const Matrix& a, double rel_tol) {
  if (rel_tol <= 0.0 || rel_tol >= 1.0)
    throw Error("numerical_rank: rel_tol must lie in (0, 1)");
  if (a.size() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(a);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); i++)
    if (s(i) > rel_tol * s(0)) r++;
  return r;
}

/// Orthonormal basis for the numerically significant column space of `a`:
/// left singular vectors with sigma_i > rel_tol * sigma_max, at most
/// max_cols of them (max_cols < 0 means no cap).
inline Matrix orthonormal_columns(const Matrix& a, double rel_tol,
                                  Eigen::Index max_cols = -1) {
  if (a.size() == 0) return Matrix(a.rows(), 0);
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); i++)
    if (s(0) > 0.0 && s(i) > rel_tol * s(0)) r++;
  if (max_cols >= 0 && r > max_cols) r = max_cols;
  return svd.matrixU().leftCols(r);
}

/// Minimum-norm least-squares solution of A X = B (pseudoinverse apply).
inline Matrix least_squares_solve(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows())
    throw Error("least_squares_solve: dimension mismatch");
  return a.completeOrthogonalDecomposition().solve(b);
}

}  // namespace slablu

#endif  // SLABLU_DENSE_HPP
