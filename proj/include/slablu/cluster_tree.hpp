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
#ifndef SLABLU_CLUSTER_TREE_HPP
#define SLABLU_CLUSTER_TREE_HPP

#include <cstdint>
#include <istream>
#include <ostream>
#include <vector>

#include "slablu/common.hpp"

namespace slablu {

/// Node of a binary cluster tree over a contiguous index range.
/// Child ranges partition the parent range and are adjacent.
struct ClusterNode {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;  // half-open range [begin, end)
  Eigen::Index left = -1;
  Eigen::Index right = -1;
  Eigen::Index parent = -1;
  int level = 0;

  Eigen::Index size() const { return end - begin; }
  bool is_leaf() const { return left < 0; }
};

/// Balanced binary partition of 0..n-1 halting once a range fits the
/// leaf size.  Every leaf has size in (leaf_size/2, leaf_size].
class ClusterTree {
 public:
  ClusterTree(Eigen::Index n, Eigen::Index leaf_size)
      : n_(n), leaf_size_(leaf_size) {
    if (leaf_size < 1 || leaf_size > n)
      throw ConfigError("ClusterTree: need 1 <= leaf_size <= n");
    nodes_.push_back({0, n, -1, -1, -1, 0});
    for (std::size_t k = 0; k < nodes_.size(); k++) {
      if (nodes_[k].size() <= leaf_size) continue;
      const Eigen::Index mid = nodes_[k].begin + nodes_[k].size() / 2;
      const Eigen::Index id = static_cast<Eigen::Index>(k);
      nodes_[k].left = static_cast<Eigen::Index>(nodes_.size());
      nodes_.push_back({nodes_[k].begin, mid, -1, -1, id, nodes_[k].level + 1});
      nodes_[k].right = static_cast<Eigen::Index>(nodes_.size());
      nodes_.push_back({mid, nodes_[k].end, -1, -1, id, nodes_[k].level + 1});
    }
    for (std::size_t k = 0; k < nodes_.size(); k++)
      if (nodes_[k].is_leaf()) leaves_.push_back(static_cast<Eigen::Index>(k));
    build_post_order(0);
  }

  Eigen::Index dim() const { return n_; }
  Eigen::Index leaf_size() const { return leaf_size_; }
  Eigen::Index root() const { return 0; }
  Eigen::Index node_count() const {
    return static_cast<Eigen::Index>(nodes_.size());
  }
  const ClusterNode& node(Eigen::Index id) const {
    return nodes_[static_cast<std::size_t>(id)];
  }
  /// Leaf ids in ascending range order.
  const std::vector<Eigen::Index>& leaves() const { return leaves_; }
  /// All node ids with children listed before their parents.
  const std::vector<Eigen::Index>& post_order() const { return post_order_; }

  Eigen::Index max_leaf_size() const {
    Eigen::Index m = 0;
    for (Eigen::Index id : leaves_) m = std::max(m, node(id).size());
    return m;
  }

  void serialize(std::ostream& os) const {
    const std::uint64_t head[2] = {static_cast<std::uint64_t>(n_),
                                   static_cast<std::uint64_t>(leaf_size_)};
    os.write(reinterpret_cast<const char*>(head), sizeof(head));
  }

  static ClusterTree deserialize(std::istream& is) {
    std::uint64_t head[2];
    is.read(reinterpret_cast<char*>(head), sizeof(head));
    if (!is) throw Error("ClusterTree::deserialize: truncated stream");
    return ClusterTree(static_cast<Eigen::Index>(head[0]),
                       static_cast<Eigen::Index>(head[1]));
  }

 private:
  void build_post_order(Eigen::Index id) {
    const ClusterNode& nd = node(id);
    if (!nd.is_leaf()) {
      build_post_order(nd.left);
      build_post_order(nd.right);
    }
    post_order_.push_back(id);
  }

  Eigen::Index n_, leaf_size_;
  std::vector<ClusterNode> nodes_;
  std::vector<Eigen::Index> leaves_;
  std::vector<Eigen::Index> post_order_;
};

inline ClusterTree build_tree(Eigen::Index n, Eigen::Index leaf_size) {
  return ClusterTree(n, leaf_size);
}

}  // namespace slablu

#endif  // SLABLU_CLUSTER_TREE_HPP
