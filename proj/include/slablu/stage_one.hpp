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
#ifndef SLABLU_STAGE_ONE_HPP
#define SLABLU_STAGE_ONE_HPP

#include <algorithm>
#include <array>
#include <cstring>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "slablu/banded.hpp"
#include "slablu/common.hpp"
#include "slablu/hbs_compress.hpp"
#include "slablu/partition.hpp"
#include "slablu/problem.hpp"
#include "slablu/stage_two.hpp"

namespace slablu {

using SparseBlock = Eigen::SparseMatrix<double>;

namespace detail {

/// Copy of a rectangular block of a row-major sparse matrix.
inline SparseBlock sparse_block(
    const Eigen::SparseMatrix<double, Eigen::RowMajor>& a, Eigen::Index r0,
    Eigen::Index nr, Eigen::Index c0, Eigen::Index nc) {
  std::vector<Eigen::Triplet<double>> trips;
  for (Eigen::Index r = 0; r < nr; r++)
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(
             a, r0 + r);
         it; ++it)
      if (it.col() >= c0 && it.col() < c0 + nc)
        trips.emplace_back(r, it.col() - c0, it.value());
  SparseBlock out(nr, nc);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

inline void write_sparse(std::ostream& os, const SparseBlock& a) {
  write_u64(os, static_cast<std::uint64_t>(a.rows()));
  write_u64(os, static_cast<std::uint64_t>(a.cols()));
  write_u64(os, static_cast<std::uint64_t>(a.nonZeros()));
  for (Eigen::Index k = 0; k < a.outerSize(); k++)
    for (SparseBlock::InnerIterator it(a, k); it; ++it) {
      write_u64(os, static_cast<std::uint64_t>(it.row()));
      write_u64(os, static_cast<std::uint64_t>(it.col()));
      const double v = it.value();
      os.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
}

inline SparseBlock read_sparse(std::istream& is) {
  const Eigen::Index rows = static_cast<Eigen::Index>(read_u64(is));
  const Eigen::Index cols = static_cast<Eigen::Index>(read_u64(is));
  const Eigen::Index nnz = static_cast<Eigen::Index>(read_u64(is));
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(nnz));
  for (Eigen::Index k = 0; k < nnz; k++) {
    const Eigen::Index r = static_cast<Eigen::Index>(read_u64(is));
    const Eigen::Index c = static_cast<Eigen::Index>(read_u64(is));
    double v = 0.0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    trips.emplace_back(r, c, v);
  }
  if (!is) throw Error("deserialize: truncated stream");
  SparseBlock out(rows, cols);
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

}  // namespace detail

/// Banded factorization of one slab interior plus its sparse couplings
/// to the (at most two) adjacent interfaces.  Interior unknowns are
/// permuted thin-direction innermost — local row iy*width + ix for grid
/// offset (ix, iy) inside the strip — which makes the interior block
/// banded with bandwidth `width`.  All coupling blocks are stored with
/// the interior side already in this permuted order.
struct SlabFactor {
  Eigen::Index strip;              // index into the partition's interiors
  Eigen::Index first_col, width;   // grid columns [first_col, first_col+width)
  Eigen::Index n2;
  Eigen::Index left_ifc, right_ifc;  // adjacent interface ids, -1 if absent
  BandedLU lu;                       // factors of the permuted A_ii
  SparseBlock from_left, from_right;  // A_{i,L}, A_{i,R}: interior x interface
  SparseBlock to_left, to_right;      // A_{L,i}, A_{R,i}: interface x interior

  Eigen::Index rows() const { return width * n2; }

  /// Natural strip ordering (x outer, y inner) -> banded ordering.
  Matrix permute_in(const Eigen::Ref<const Matrix>& f) const {
    Matrix out(f.rows(), f.cols());
    for (Eigen::Index ix = 0; ix < width; ix++)
      for (Eigen::Index iy = 0; iy < n2; iy++)
        out.row(iy * width + ix) = f.row(ix * n2 + iy);
    return out;
  }

  /// Banded ordering -> natural strip ordering.
  Matrix permute_out(const Eigen::Ref<const Matrix>& u) const {
    Matrix out(u.rows(), u.cols());
    for (Eigen::Index ix = 0; ix < width; ix++)
      for (Eigen::Index iy = 0; iy < n2; iy++)
        out.row(ix * n2 + iy) = u.row(iy * width + ix);
    return out;
  }

  void serialize(std::ostream& os) const {
    const std::uint64_t header[6] = {
        static_cast<std::uint64_t>(strip),
        static_cast<std::uint64_t>(first_col),
        static_cast<std::uint64_t>(width),
        static_cast<std::uint64_t>(n2),
        static_cast<std::uint64_t>(left_ifc + 1),
        static_cast<std::uint64_t>(right_ifc + 1)};
    os.write(reinterpret_cast<const char*>(header), sizeof(header));
    lu.serialize(os);
    detail::write_sparse(os, from_left);
    detail::write_sparse(os, from_right);
    detail::write_sparse(os, to_left);
    detail::write_sparse(os, to_right);
  }

  static SlabFactor deserialize(std::istream& is) {
    std::uint64_t header[6];
    is.read(reinterpret_cast<char*>(header), sizeof(header));
    if (!is) throw Error("SlabFactor::deserialize: truncated stream");
    BandedLU lu = BandedLU::deserialize(is);
    SlabFactor f{static_cast<Eigen::Index>(header[0]),
                 static_cast<Eigen::Index>(header[1]),
                 static_cast<Eigen::Index>(header[2]),
                 static_cast<Eigen::Index>(header[3]),
                 static_cast<Eigen::Index>(header[4]) - 1,
                 static_cast<Eigen::Index>(header[5]) - 1,
                 std::move(lu),
                 detail::read_sparse(is),
                 detail::read_sparse(is),
                 detail::read_sparse(is),
                 detail::read_sparse(is)};
    return f;
  }
};

/// Factor the interior of one strip and extract its couplings.  Pure in
/// (system, part, strip): slabs may be processed in any order.
inline SlabFactor factor_one_interior(const SparseSystem& system,
                                      const SlabPartition& part,
                                      Eigen::Index strip) {
  const Eigen::Index n2 = part.n2;
  const GridStrip& st = part.interiors[static_cast<std::size_t>(strip)];
  const Eigen::Index w = st.width, col0 = st.first_col;
  const Eigen::Index begin = col0 * n2, end = (col0 + w) * n2;
  const Eigen::Index left = strip > 0 ? strip - 1 : -1;
  const Eigen::Index right = strip < part.interface_count() ? strip : -1;
  const Eigen::Index left_off = left >= 0 ? part.interface_offset(left) : -1;
  const Eigen::Index right_off =
      right >= 0 ? part.interface_offset(right) : -1;

  BandedMatrix aii(w * n2, w, w);
  std::vector<Eigen::Triplet<double>> t_from_l, t_from_r, t_to_l, t_to_r;
  for (Eigen::Index ix = 0; ix < w; ix++)
    for (Eigen::Index iy = 0; iy < n2; iy++) {
      const Eigen::Index g = (col0 + ix) * n2 + iy;
      const Eigen::Index r = iy * w + ix;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(
               system.matrix, g);
           it; ++it) {
        const Eigen::Index c = it.col();
        if (c >= begin && c < end) {
          const Eigen::Index cx = c / n2 - col0, cy = c % n2;
          aii.at(r, cy * w + cx) = it.value();
        } else if (left >= 0 && c >= left_off && c < left_off + n2) {
          t_from_l.emplace_back(r, c - left_off, it.value());
        } else if (right >= 0 && c >= right_off && c < right_off + n2) {
          t_from_r.emplace_back(r, c - right_off, it.value());
        } else {
          throw Error(
              "factor_one_interior: interior couples past its adjacent "
              "interfaces");
        }
      }
    }
  // Interface rows restricted to this strip's columns (permuted).
  auto gather_interface = [&](Eigen::Index off,
                              std::vector<Eigen::Triplet<double>>& trips) {
    for (Eigen::Index q = 0; q < n2; q++)
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(
               system.matrix, off + q);
           it; ++it)
        if (it.col() >= begin && it.col() < end) {
          const Eigen::Index cx = it.col() / n2 - col0, cy = it.col() % n2;
          trips.emplace_back(q, cy * w + cx, it.value());
        }
  };
  if (left >= 0) gather_interface(left_off, t_to_l);
  if (right >= 0) gather_interface(right_off, t_to_r);

  auto assemble = [&](std::vector<Eigen::Triplet<double>>& trips,
                      Eigen::Index rows, Eigen::Index cols) {
    SparseBlock out(rows, cols);
    out.setFromTriplets(trips.begin(), trips.end());
    return out;
  };
  try {
    SlabFactor f{strip,
                 col0,
                 w,
                 n2,
                 left,
                 right,
                 BandedLU(std::move(aii)),
                 assemble(t_from_l, w * n2, left >= 0 ? n2 : 0),
                 assemble(t_from_r, w * n2, right >= 0 ? n2 : 0),
                 assemble(t_to_l, left >= 0 ? n2 : 0, w * n2),
                 assemble(t_to_r, right >= 0 ? n2 : 0, w * n2)};
    return f;
  } catch (const SingularMatrixError&) {
    throw SingularMatrixError("factor_one_interior: singular slab interior",
                              strip);
  }
}

/// Factor every slab interior.  Slabs are independent; any processing
/// order yields identical factors.
inline std::vector<SlabFactor> factor_interiors(const SparseSystem& system,
                                                const SlabPartition& part) {
  if (system.n1 != part.n1 || system.n2 != part.n2)
    throw Error("factor_interiors: system and partition dimensions differ");
  std::vector<SlabFactor> factors;
  factors.reserve(static_cast<std::size_t>(part.interior_count()));
  for (Eigen::Index i = 0; i < part.interior_count(); i++)
    factors.push_back(factor_one_interior(system, part, i));
  return factors;
}

/// Apply the reduced block T_jk = A_jk - sum_i A_{j,i} A_ii^{-1} A_{i,k}
/// (i ranging over the strips adjacent to both interfaces) to a block of
/// vectors, or its transpose in adjoint mode.  Only j == k and adjacent
/// pairs |j - k| = 1 exist in the reduced system.  No dense intermediate
/// beyond the slab-solve workspace is formed.
inline Matrix apply_T_block(Eigen::Index j, Eigen::Index k,
                            const Eigen::Ref<const Matrix>& x, bool adjoint,
                            const std::vector<SlabFactor>& factors,
                            const SparseSystem& system,
                            const SlabPartition& part) {
  const Eigen::Index n2 = part.n2, nifc = part.interface_count();
  if (j < 0 || j >= nifc || k < 0 || k >= nifc)
    throw Error("apply_T_block: interface index out of range");
  if (j != k && j != k + 1 && k != j + 1)
    throw Error("apply_T_block: interfaces are not adjacent");
  if (x.rows() != n2) throw Error("apply_T_block: block must have n2 rows");

  SparseBlock direct = detail::sparse_block(
      system.matrix, part.interface_offset(j), n2, part.interface_offset(k),
      n2);
  Matrix y = adjoint ? Matrix(direct.transpose() * x) : Matrix(direct * x);

  // to/from selectors for the strip side facing a given interface.
  auto schur_term = [&](const SlabFactor& f, bool via_right_of_j,
                        bool via_right_of_k) {
    const SparseBlock& out_blk = via_right_of_j ? f.to_right : f.to_left;
    const SparseBlock& in_blk = via_right_of_k ? f.from_right : f.from_left;
    if (!adjoint) return Matrix(out_blk * f.lu.solve(in_blk * x));
    return Matrix(in_blk.transpose() *
                  f.lu.solve(out_blk.transpose() * x, true));
  };
  if (j == k) {
    // Strip j lies left of interface j, strip j+1 (if any) to the right.
    const SlabFactor& lf = factors[static_cast<std::size_t>(j)];
    y -= schur_term(lf, true, true);
    if (j + 1 < part.interior_count()) {
      const SlabFactor& rf = factors[static_cast<std::size_t>(j + 1)];
      y -= schur_term(rf, false, false);
    }
  } else if (k == j + 1) {
    // The shared strip has interface j on its left, k on its right.
    y -= schur_term(factors[static_cast<std::size_t>(j + 1)], false, true);
  } else {
    y -= schur_term(factors[static_cast<std::size_t>(j)], true, false);
  }
  return y;
}

/// The reduced block-tridiagonal system over the interfaces, plus the
/// provenance needed to map blocks back to contributing strips.
struct ReducedSystem {
  BlockTridiagonal blocks;
  std::vector<std::array<Eigen::Index, 2>> diag_strips;  // {left, right strip}
  std::vector<Eigen::Index> between_strip;  // strip bridging ifc j and j+1
  Eigen::Index hbs_max_rank = 0;            // 0 when built densely

  void serialize(std::ostream& os) const {
    blocks.serialize(os);
    detail::write_u64(os, static_cast<std::uint64_t>(diag_strips.size()));
    for (const auto& p : diag_strips) {
      detail::write_u64(os, static_cast<std::uint64_t>(p[0] + 1));
      detail::write_u64(os, static_cast<std::uint64_t>(p[1] + 1));
    }
    for (Eigen::Index s : between_strip)
      detail::write_u64(os, static_cast<std::uint64_t>(s));
    detail::write_u64(os, static_cast<std::uint64_t>(hbs_max_rank));
  }

  static ReducedSystem deserialize(std::istream& is) {
    ReducedSystem out;
    out.blocks = BlockTridiagonal::deserialize(is);
    const Eigen::Index k = static_cast<Eigen::Index>(detail::read_u64(is));
    for (Eigen::Index j = 0; j < k; j++) {
      const Eigen::Index a =
          static_cast<Eigen::Index>(detail::read_u64(is)) - 1;
      const Eigen::Index b =
          static_cast<Eigen::Index>(detail::read_u64(is)) - 1;
      out.diag_strips.push_back({a, b});
    }
    for (Eigen::Index j = 0; j + 1 < k; j++)
      out.between_strip.push_back(
          static_cast<Eigen::Index>(detail::read_u64(is)));
    out.hbs_max_rank = static_cast<Eigen::Index>(detail::read_u64(is));
    return out;
  }
};

enum class ReductionMode { dense, hbs };

/// How the reduced blocks are materialized.  The hbs path compresses
/// each block from matrix-free products before densifying; rank limits
/// of 0 derive defaults from the leaf size and the slab width.
struct ReductionPolicy {
  ReductionMode mode = ReductionMode::dense;
  CompressOptions options{};
  Eigen::Index leaf_size = 64;
  Eigen::Index r_start = 0;
  Eigen::Index r_max = 0;
};

/// Build the reduced system.  Dense mode applies each block to the
/// identity (the same code path as the matrix-free sampler); hbs mode
/// recovers each block with adaptive randomized compression and then
/// densifies it for the sweeping stage.
inline ReducedSystem build_reduced(const SparseSystem& system,
                                   const SlabPartition& part,
                                   const std::vector<SlabFactor>& factors,
                                   const ReductionPolicy& policy = {}) {
  const Eigen::Index n2 = part.n2, nifc = part.interface_count();
  if (static_cast<Eigen::Index>(factors.size()) != part.interior_count())
    throw Error("build_reduced: factor list does not match the partition");
  ReducedSystem out;

  const Eigen::Index leaf = std::min(policy.leaf_size, n2);
  Eigen::Index r_start = policy.r_start;
  if (r_start <= 0) r_start = std::max<Eigen::Index>(2, (leaf - 10 + 1) / 2);
  Eigen::Index r_max = policy.r_max;
  if (r_max <= 0) r_max = std::max(2 * part.b + 8, r_start);
  r_max = std::min(r_max, n2);
  r_start = std::min(r_start, r_max);

  auto materialize = [&](Eigen::Index j, Eigen::Index k,
                         std::uint64_t ordinal) {
    if (policy.mode == ReductionMode::dense)
      return apply_T_block(j, k, Matrix::Identity(n2, n2), false, factors,
                           system, part);
    auto sampler = [&](const Matrix& x, bool adjoint) {
      return apply_T_block(j, k, x, adjoint, factors, system, part);
    };
    CompressOptions opts = policy.options;
    opts.seed = mix_seed(policy.options.seed, ordinal);
    ClusterTree tree(n2, leaf);
    CompressStats stats;
    try {
      HbsMatrix h =
          hbs_compress_adaptive(sampler, n2, tree, r_start, r_max, opts,
                                &stats);
      out.hbs_max_rank = std::max(out.hbs_max_rank, stats.final_rank);
      return h.to_dense();
    } catch (const CompressionError& e) {
      throw CompressionError("build_reduced: block (" + std::to_string(j) +
                                 ", " + std::to_string(k) +
                                 "): " + e.what(),
                             e.residual_estimate);
    }
  };

  for (Eigen::Index j = 0; j < nifc; j++) {
    out.blocks.diag.push_back(materialize(j, j, 3 * j));
    out.diag_strips.push_back(
        {part.left_interior(j), part.right_interior(j)});
  }
  for (Eigen::Index j = 0; j + 1 < nifc; j++) {
    out.blocks.super.push_back(materialize(j, j + 1, 3 * j + 1));
    out.blocks.sub.push_back(materialize(j + 1, j, 3 * j + 2));
    out.between_strip.push_back(j + 1);
  }
  return out;
}

/// Reduced right-hand sides over the interfaces:
/// f~_j = f_j - sum_i A_{j,i} A_ii^{-1} f_i over the adjacent strips.
inline Matrix reduce_rhs(const Eigen::Ref<const Matrix>& f,
                         const std::vector<SlabFactor>& factors,
                         const SlabPartition& part) {
  const Eigen::Index n2 = part.n2;
  if (f.rows() != part.dim()) throw Error("reduce_rhs: rhs length must be N");
  Matrix out(part.interface_count() * n2, f.cols());
  for (Eigen::Index j = 0; j < part.interface_count(); j++)
    out.middleRows(j * n2, n2) = f.middleRows(part.interface_offset(j), n2);
  for (const SlabFactor& fac : factors) {
    const Matrix g = fac.lu.solve(
        fac.permute_in(f.middleRows(part.interior_offset(fac.strip),
                                    fac.rows())));
    if (fac.left_ifc >= 0)
      out.middleRows(fac.left_ifc * n2, n2) -= fac.to_left * g;
    if (fac.right_ifc >= 0)
      out.middleRows(fac.right_ifc * n2, n2) -= fac.to_right * g;
  }
  return out;
}

/// Back-substitute the slab interiors around a known interface solution:
/// u_i = A_ii^{-1} (f_i - A_{i,L} u_L - A_{i,R} u_R), assembled into the
/// original grid ordering alongside the interface values themselves.
inline Matrix recover_interiors(const Eigen::Ref<const Matrix>& u_ifc,
                                const Eigen::Ref<const Matrix>& f,
                                const std::vector<SlabFactor>& factors,
                                const SlabPartition& part) {
  const Eigen::Index n2 = part.n2;
  if (f.rows() != part.dim())
    throw Error("recover_interiors: rhs length must be N");
  if (u_ifc.rows() != part.interface_count() * n2 ||
      u_ifc.cols() != f.cols())
    throw Error("recover_interiors: interface solution has the wrong shape");
  Matrix u(part.dim(), f.cols());
  for (Eigen::Index j = 0; j < part.interface_count(); j++)
    u.middleRows(part.interface_offset(j), n2) = u_ifc.middleRows(j * n2, n2);
  for (const SlabFactor& fac : factors) {
    Matrix rhs = fac.permute_in(
        f.middleRows(part.interior_offset(fac.strip), fac.rows()));
    if (fac.left_ifc >= 0)
      rhs -= fac.from_left * u_ifc.middleRows(fac.left_ifc * n2, n2);
    if (fac.right_ifc >= 0)
      rhs -= fac.from_right * u_ifc.middleRows(fac.right_ifc * n2, n2);
    u.middleRows(part.interior_offset(fac.strip), fac.rows()) =
        fac.permute_out(fac.lu.solve(rhs));
  }
  return u;
}

}  // namespace slablu

#endif  // SLABLU_STAGE_ONE_HPP
