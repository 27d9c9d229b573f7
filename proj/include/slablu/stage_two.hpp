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
#ifndef SLABLU_STAGE_TWO_HPP
#define SLABLU_STAGE_TWO_HPP

#include <cstring>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "slablu/common.hpp"
#include "slablu/dense.hpp"

namespace slablu {

/// Block-tridiagonal matrix with square dense blocks of one size.
/// sub[j] couples block row j+1 to block column j; super[j] the
/// transpose position.
struct BlockTridiagonal {
  std::vector<Matrix> diag;
  std::vector<Matrix> sub, super;

  Eigen::Index block_count() const {
    return static_cast<Eigen::Index>(diag.size());
  }
  Eigen::Index block_dim() const { return diag.empty() ? 0 : diag[0].rows(); }
  Eigen::Index dim() const { return block_count() * block_dim(); }

  void validate() const {
    const Eigen::Index k = block_count(), m = block_dim();
    if (k == 0) throw ConfigError("BlockTridiagonal: no blocks");
    if (static_cast<Eigen::Index>(sub.size()) != k - 1 ||
        static_cast<Eigen::Index>(super.size()) != k - 1)
      throw ConfigError("BlockTridiagonal: off-diagonal count must be k - 1");
    auto check = [m](const Matrix& blk) {
      if (blk.rows() != m || blk.cols() != m)
        throw ConfigError("BlockTridiagonal: inconsistent block dimensions");
      if (!blk.allFinite())
        throw Error("BlockTridiagonal: non-finite block entry");
    };
    for (const Matrix& blk : diag) check(blk);
    for (const Matrix& blk : sub) check(blk);
    for (const Matrix& blk : super) check(blk);
  }

  /// y = T x (or T^T x) for stacked block columns x.
  Matrix apply(const Eigen::Ref<const Matrix>& x, bool adjoint = false) const {
    const Eigen::Index k = block_count(), m = block_dim();
    if (x.rows() != k * m)
      throw Error("BlockTridiagonal::apply: dimension mismatch");
    Matrix y = Matrix::Zero(x.rows(), x.cols());
    auto blk = [m](const Eigen::Ref<const Matrix>& v, Eigen::Index j) {
      return v.middleRows(j * m, m);
    };
    for (Eigen::Index j = 0; j < k; j++) {
      Matrix acc = adjoint ? Matrix(diag[j].transpose() * blk(x, j))
                           : Matrix(diag[j] * blk(x, j));
      if (j > 0)
        acc += adjoint ? Matrix(super[j - 1].transpose() * blk(x, j - 1))
                       : Matrix(sub[j - 1] * blk(x, j - 1));
      if (j + 1 < k)
        acc += adjoint ? Matrix(sub[j].transpose() * blk(x, j + 1))
                       : Matrix(super[j] * blk(x, j + 1));
      y.middleRows(j * m, m) = acc;
    }
    return y;
  }

  /// Assembled dense matrix; intended for oracles on small systems.
  Matrix to_dense() const {
    const Eigen::Index k = block_count(), m = block_dim();
    Matrix t = Matrix::Zero(k * m, k * m);
    for (Eigen::Index j = 0; j < k; j++) {
      t.block(j * m, j * m, m, m) = diag[j];
      if (j + 1 < k) {
        t.block((j + 1) * m, j * m, m, m) = sub[j];
        t.block(j * m, (j + 1) * m, m, m) = super[j];
      }
    }
    return t;
  }

  void serialize(std::ostream& os) const {
    os.write(kMagic, 8);
    detail::write_u64(os, static_cast<std::uint64_t>(block_count()));
    for (const Matrix& blk : diag) detail::write_dense(os, blk);
    for (const Matrix& blk : sub) detail::write_dense(os, blk);
    for (const Matrix& blk : super) detail::write_dense(os, blk);
  }

  static BlockTridiagonal deserialize(std::istream& is) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
      throw Error("BlockTridiagonal::deserialize: bad magic or version");
    const Eigen::Index k = static_cast<Eigen::Index>(detail::read_u64(is));
    BlockTridiagonal t;
    for (Eigen::Index j = 0; j < k; j++)
      t.diag.push_back(detail::read_dense(is));
    for (Eigen::Index j = 0; j + 1 < k; j++)
      t.sub.push_back(detail::read_dense(is));
    for (Eigen::Index j = 0; j + 1 < k; j++)
      t.super.push_back(detail::read_dense(is));
    return t;
  }

 private:
  static constexpr const char* kMagic = "SLBBTD01";
};

/// Sweeping block LU of a block-tridiagonal matrix: Schur complements
/// S_0 = D_0, S_{j+1} = D_{j+1} - sub_j S_j^{-1} super_j held as dense
/// LU factors, with the couplings retained for the solve passes.
class SweepFactorization {
 public:
  /// Consumes the blocks; each diagonal block is released as soon as
  /// its Schur complement is factored, so peak memory stays at the
  /// factored footprint plus one block.
  explicit SweepFactorization(BlockTridiagonal t) {
    t.validate();
    const Eigen::Index k = t.block_count();
    factors_.reserve(static_cast<std::size_t>(k));
    for (Eigen::Index j = 0; j < k; j++) {
      Matrix s = std::move(t.diag[static_cast<std::size_t>(j)]);
      if (j > 0)
        s.noalias() -= t.sub[static_cast<std::size_t>(j - 1)] *
                       factors_.back().solve(
                           t.super[static_cast<std::size_t>(j - 1)]);
      try {
        factors_.emplace_back(std::move(s));
      } catch (const SingularMatrixError&) {
        throw SingularMatrixError("sweep_build: singular Schur complement block",
                                  j);
      }
    }
    sub_ = std::move(t.sub);
    super_ = std::move(t.super);
  }

  Eigen::Index block_count() const {
    return static_cast<Eigen::Index>(factors_.size());
  }
  Eigen::Index block_dim() const { return factors_[0].dim(); }
  Eigen::Index dim() const { return block_count() * block_dim(); }

  const DenseLU& schur_factor(Eigen::Index j) const {
    return factors_[static_cast<std::size_t>(j)];
  }
  const Matrix& sub_coupling(Eigen::Index j) const {
    return sub_[static_cast<std::size_t>(j)];
  }
  const Matrix& super_coupling(Eigen::Index j) const {
    return super_[static_cast<std::size_t>(j)];
  }

  /// Solve T u = f for stacked block columns f (forward sweep through
  /// the Schur factors, then backward substitution).
  Matrix solve(const Eigen::Ref<const Matrix>& f) const {
    const Eigen::Index k = block_count(), m = block_dim();
    if (f.rows() != k * m)
      throw Error("sweep_solve: rhs length must be block count times size");
    Matrix u(f.rows(), f.cols());
    for (Eigen::Index j = 0; j < k; j++) {
      Matrix rhs = f.middleRows(j * m, m);
      if (j > 0)
        rhs.noalias() -= sub_[static_cast<std::size_t>(j - 1)] *
                         u.middleRows((j - 1) * m, m);
      u.middleRows(j * m, m) = lu(j).solve(rhs);
    }
    for (Eigen::Index j = k - 2; j >= 0; j--) {
      Matrix rhs = super_[static_cast<std::size_t>(j)] *
                   u.middleRows((j + 1) * m, m);
      u.middleRows(j * m, m) -= lu(j).solve(rhs);
    }
    return u;
  }

  /// Stored doubles: k factored blocks plus 2(k-1) retained couplings.
  std::size_t storage_scalars() const {
    std::size_t total = 0;
    for (const DenseLU& f : factors_) total += f.storage_scalars();
    for (const Matrix& blk : sub_) total += static_cast<std::size_t>(blk.size());
    for (const Matrix& blk : super_)
      total += static_cast<std::size_t>(blk.size());
    return total;
  }

  void serialize(std::ostream& os) const {
    os.write(kMagic, 8);
    detail::write_u64(os, static_cast<std::uint64_t>(block_count()));
    for (const DenseLU& f : factors_) f.serialize(os);
    for (const Matrix& blk : sub_) detail::write_dense(os, blk);
    for (const Matrix& blk : super_) detail::write_dense(os, blk);
  }

  static SweepFactorization deserialize(std::istream& is) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
      throw Error("SweepFactorization::deserialize: bad magic or version");
    const Eigen::Index k = static_cast<Eigen::Index>(detail::read_u64(is));
    SweepFactorization out(private_tag{});
    for (Eigen::Index j = 0; j < k; j++)
      out.factors_.push_back(DenseLU::deserialize(is));
    for (Eigen::Index j = 0; j + 1 < k; j++)
      out.sub_.push_back(detail::read_dense(is));
    for (Eigen::Index j = 0; j + 1 < k; j++)
      out.super_.push_back(detail::read_dense(is));
    return out;
  }

 private:
  struct private_tag {};
  explicit SweepFactorization(private_tag) {}

  const DenseLU& lu(Eigen::Index j) const {
    return factors_[static_cast<std::size_t>(j)];
  }

  static constexpr const char* kMagic = "SLBSWP01";

  std::vector<DenseLU> factors_;
  std::vector<Matrix> sub_, super_;
};

/// Factor the reduced block-tridiagonal system by sequential sweeping.
inline SweepFactorization sweep_build(BlockTridiagonal t) {
  return SweepFactorization(std::move(t));
}

/// Solve against a sweep factorization (kept as a free function to
/// mirror sweep_build; forwards to the member).
inline Matrix sweep_solve(const SweepFactorization& fact,
                          const Eigen::Ref<const Matrix>& f) {
  return fact.solve(f);
}

}  // namespace slablu

#endif  // SLABLU_STAGE_TWO_HPP
