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
#ifndef SLABLU_HBS_HPP
#define SLABLU_HBS_HPP

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <utility>
#include <vector>

#include "slablu/cluster_tree.hpp"
#include "slablu/common.hpp"

namespace slablu {

/// Per-node payload of a telescoping HBS representation.
///
/// Leaf node over rows I:   d is the |I| x |I| diagonal term, u/v are the
/// column/row generator bases for the off-diagonal block row/column.
/// Internal node:           d is the reduced interaction block in child
/// generator coordinates (its off-diagonal corners are the sibling
/// interaction blocks), u/v are the translation operators into the
/// parent's coordinates.  The root keeps only d.
struct HbsNodeData {
  Matrix d;
  Matrix u;
  Matrix v;
};

/// Hierarchically block-separable matrix over a cluster tree.  The
/// represented operator is
///   A = D_leaf + U ( D_1 + U_1 ( ... D_root ... ) V_1^T ) V^T
/// with all factors block diagonal per tree level.
class HbsMatrix {
 public:
  HbsMatrix(ClusterTree tree, std::vector<HbsNodeData> nodes,
            Eigen::Index rank_bound)
      : tree_(std::move(tree)), nodes_(std::move(nodes)),
        rank_bound_(rank_bound) {
    if (static_cast<Eigen::Index>(nodes_.size()) != tree_.node_count())
      throw Error("HbsMatrix: one payload per tree node required");
    for (Eigen::Index id = 0; id < tree_.node_count(); id++) {
      const ClusterNode& nd = tree_.node(id);
      const HbsNodeData& p = at(id);
      const bool root = nd.parent < 0;
      if (nd.is_leaf()) {
        if (p.d.rows() != nd.size() || p.d.cols() != nd.size())
          throw Error("HbsMatrix: leaf diagonal block has wrong shape");
        if (!root && (p.u.rows() != nd.size() || p.v.rows() != nd.size()))
          throw Error("HbsMatrix: leaf generator has wrong row count");
      } else {
        const Eigen::Index ru = row_rank(nd.left) + row_rank(nd.right);
        const Eigen::Index rv = col_rank(nd.left) + col_rank(nd.right);
        if (p.d.rows() != ru || p.d.cols() != rv)
          throw Error("HbsMatrix: interaction block has wrong shape");
        if (!root && (p.u.rows() != ru || p.v.rows() != rv))
          throw Error("HbsMatrix: translation operator has wrong row count");
      }
      if (p.u.cols() > rank_bound_ || p.v.cols() > rank_bound_)
        throw Error("HbsMatrix: generator width exceeds the rank bound");
    }
  }

  const ClusterTree& tree() const { return tree_; }
  Eigen::Index dim() const { return tree_.dim(); }
  Eigen::Index rank_bound() const { return rank_bound_; }
  const HbsNodeData& at(Eigen::Index id) const {
    return nodes_[static_cast<std::size_t>(id)];
  }

  /// Widest generator across the tree (the representation's rank).
  Eigen::Index max_generator_width() const {
    Eigen::Index w = 0;
    for (const HbsNodeData& p : nodes_)
      w = std::max({w, p.u.cols(), p.v.cols()});
    return w;
  }

  std::size_t storage_scalars() const {
    std::size_t total = 0;
    for (const HbsNodeData& p : nodes_)
      total += static_cast<std::size_t>(p.d.size() + p.u.size() + p.v.size());
    return total;
  }

  /// Fast multiply; O(n r) per column.
  Matrix apply(const Eigen::Ref<const Matrix>& x, bool adjoint = false) const {
    if (x.rows() != dim()) throw Error("HbsMatrix::apply: dimension mismatch");
    const Eigen::Index cols = x.cols();
    Matrix y = Matrix::Zero(dim(), cols);
    std::vector<Matrix> xhat(static_cast<std::size_t>(tree_.node_count()));
    std::vector<Matrix> yhat(static_cast<std::size_t>(tree_.node_count()));

    // Upward pass: project onto the generator coordinates.
    for (Eigen::Index id : tree_.post_order()) {
      const ClusterNode& nd = tree_.node(id);
      if (nd.parent < 0) break;  // root is last in post order
      const Matrix& up = adjoint ? at(id).u : at(id).v;
      if (nd.is_leaf()) {
        xhat[static_cast<std::size_t>(id)] =
            up.transpose() * x.middleRows(nd.begin, nd.size());
      } else {
        xhat[static_cast<std::size_t>(id)] =
            up.transpose() * stack(xhat, nd, adjoint ? RowSide : ColSide);
      }
    }

    // Core and downward pass: expand interactions back down the tree.
    for (auto it = tree_.post_order().rbegin(); it != tree_.post_order().rend();
         ++it) {
      const Eigen::Index id = *it;
      const ClusterNode& nd = tree_.node(id);
      if (nd.is_leaf()) {
        Matrix local = x.middleRows(nd.begin, nd.size());
        Matrix out = nd.parent < 0
                         ? Matrix(core(id, adjoint) * local)
                         : Matrix(core(id, adjoint) * local +
                                  (adjoint ? at(id).v : at(id).u) *
                                      yhat[static_cast<std::size_t>(id)]);
        y.middleRows(nd.begin, nd.size()) = out;
        continue;
      }
      Matrix in = stack(xhat, nd, adjoint ? RowSide : ColSide);
      Matrix out = core(id, adjoint) * in;
      if (nd.parent >= 0)
        out += (adjoint ? at(id).v : at(id).u) *
               yhat[static_cast<std::size_t>(id)];
      const Eigen::Index top = adjoint ? col_rank_of(nd.left)
                                       : row_rank_of(nd.left);
      yhat[static_cast<std::size_t>(nd.left)] = out.topRows(top);
      yhat[static_cast<std::size_t>(nd.right)] = out.bottomRows(out.rows() - top);
    }
    return y;
  }

  /// Exact dense materialization of the represented operator.
  Matrix to_dense() const {
    const Eigen::Index rid = tree_.root();
    if (tree_.node(rid).is_leaf()) return at(rid).d;
    return expand(rid, Matrix());
  }

  void serialize(std::ostream& os) const {
    os.write(kMagic, 8);
    tree_.serialize(os);
    const std::uint64_t rb = static_cast<std::uint64_t>(rank_bound_);
    os.write(reinterpret_cast<const char*>(&rb), sizeof(rb));
    for (const HbsNodeData& p : nodes_) {
      detail::write_dense(os, p.d);
      detail::write_dense(os, p.u);
      detail::write_dense(os, p.v);
    }
  }

  static HbsMatrix deserialize(std::istream& is) {
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0)
      throw Error("HbsMatrix::deserialize: bad magic or version");
    ClusterTree tree = ClusterTree::deserialize(is);
    std::uint64_t rb = 0;
    is.read(reinterpret_cast<char*>(&rb), sizeof(rb));
    std::vector<HbsNodeData> nodes(
        static_cast<std::size_t>(tree.node_count()));
    for (HbsNodeData& p : nodes) {
      p.d = detail::read_dense(is);
      p.u = detail::read_dense(is);
      p.v = detail::read_dense(is);
    }
    if (!is) throw Error("HbsMatrix::deserialize: truncated stream");
    return HbsMatrix(std::move(tree), std::move(nodes),
                     static_cast<Eigen::Index>(rb));
  }

 private:
  static constexpr const char* kMagic = "SLBHBS01";
  enum Side { RowSide, ColSide };

  Eigen::Index row_rank(Eigen::Index id) const { return at(id).u.cols(); }
  Eigen::Index col_rank(Eigen::Index id) const { return at(id).v.cols(); }
  Eigen::Index row_rank_of(Eigen::Index id) const { return row_rank(id); }
  Eigen::Index col_rank_of(Eigen::Index id) const { return col_rank(id); }

  Matrix core(Eigen::Index id, bool adjoint) const {
    return adjoint ? Matrix(at(id).d.transpose()) : at(id).d;
  }

  Matrix stack(const std::vector<Matrix>& hat, const ClusterNode& nd,
               Side side) const {
    const Matrix& a = hat[static_cast<std::size_t>(nd.left)];
    const Matrix& b = hat[static_cast<std::size_t>(nd.right)];
    Matrix out(a.rows() + b.rows(), std::max(a.cols(), b.cols()));
    out.topRows(a.rows()) = a;
    out.bottomRows(b.rows()) = b;
    (void)side;
    return out;
  }

  /// Tall basis mapping a node's generator coordinates to original rows.
  Matrix big_basis(Eigen::Index id, bool column_side) const {
    const ClusterNode& nd = tree_.node(id);
    const Matrix& gen = column_side ? at(id).u : at(id).v;
    if (nd.is_leaf()) return gen;
    Matrix bl = big_basis(nd.left, column_side);
    Matrix br = big_basis(nd.right, column_side);
    Matrix big = Matrix::Zero(bl.rows() + br.rows(), gen.cols());
    big.topRows(bl.rows()) = bl * gen.topRows(bl.cols());
    big.bottomRows(br.rows()) = br * gen.bottomRows(br.cols());
    return big;
  }

  /// Dense block for node `id`; `carried` is the interaction core that
  /// coarser levels contribute to this node's diagonal block.
  Matrix expand(Eigen::Index id, const Matrix& carried) const {
    const ClusterNode& nd = tree_.node(id);
    if (nd.is_leaf()) {
      if (carried.size() == 0) return at(id).d;
      return at(id).d + at(id).u * carried * at(id).v.transpose();
    }
    Matrix r = at(id).d;
    if (carried.size() != 0)
      r += at(id).u * carried * at(id).v.transpose();
    const Eigen::Index ru = row_rank(nd.left);
    const Eigen::Index rv = col_rank(nd.left);
    Matrix all = expand(nd.left, r.topLeftCorner(ru, rv));
    Matrix arr = expand(nd.right, r.bottomRightCorner(r.rows() - ru,
                                                      r.cols() - rv));
    Matrix off_lr = big_basis(nd.left, true) *
                    r.topRightCorner(ru, r.cols() - rv) *
                    big_basis(nd.right, false).transpose();
    Matrix off_rl = big_basis(nd.right, true) *
                    r.bottomLeftCorner(r.rows() - ru, rv) *
                    big_basis(nd.left, false).transpose();
    Matrix out(all.rows() + arr.rows(), all.cols() + arr.cols());
    out << all, off_lr, off_rl, arr;
    return out;
  }

  ClusterTree tree_;
  std::vector<HbsNodeData> nodes_;
  Eigen::Index rank_bound_;
};

}  // namespace slablu

#endif  // SLABLU_HBS_HPP
