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
#ifndef SLABLU_PARTITION_HPP
#define SLABLU_PARTITION_HPP

#include <algorithm>
#include <vector>

#include "slablu/common.hpp"

namespace slablu {

/// A contiguous run of grid columns.  With the grid ordering used by
/// SparseSystem (x outer, y inner) a strip occupies the contiguous
/// global index range [first_col*n2, (first_col+width)*n2).
struct GridStrip {
  Eigen::Index first_col = 0;  // 0-based grid column
  Eigen::Index width = 0;      // number of columns in the strip
};

/// Decomposition of an n1 x n2 grid into interior slabs of width <= b
/// separated by single-column interfaces.  Interface j lies between
/// interior strips j and j+1; a trailing interface on the last grid
/// column has no right-hand strip.
struct SlabPartition {
  Eigen::Index n1 = 0, n2 = 0, b = 0;
  std::vector<GridStrip> interfaces;  // every strip has width 1
  std::vector<GridStrip> interiors;   // widths in [1, b]

  Eigen::Index interface_count() const {
    return static_cast<Eigen::Index>(interfaces.size());
  }
  Eigen::Index interior_count() const {
    return static_cast<Eigen::Index>(interiors.size());
  }
  Eigen::Index dim() const { return n1 * n2; }

  /// First global unknown index of interface j / interior strip i.
  Eigen::Index interface_offset(Eigen::Index j) const {
    return interfaces[static_cast<std::size_t>(j)].first_col * n2;
  }
  Eigen::Index interior_offset(Eigen::Index i) const {
    return interiors[static_cast<std::size_t>(i)].first_col * n2;
  }
  Eigen::Index interior_size(Eigen::Index i) const {
    return interiors[static_cast<std::size_t>(i)].width * n2;
  }

  /// Interior strips adjacent to interface j (right one may be absent).
  Eigen::Index left_interior(Eigen::Index j) const { return j; }
  Eigen::Index right_interior(Eigen::Index j) const {
    return j + 1 < interior_count() ? j + 1 : -1;
  }
};

/// Split the grid into slabs.  Interfaces sit at 1-based grid columns
/// (b+1), 2(b+1), ...; the trailing strip may be thinner than b, and is
/// omitted when an interface lands exactly on the last column.
inline SlabPartition partition(Eigen::Index n1, Eigen::Index n2,
                               Eigen::Index b) {
  if (n2 < 1) throw ConfigError("partition: n2 must be positive");
  if (b < 1 || b > n1 - 2)
    throw ConfigError("partition: slab width must satisfy 1 <= b <= n1 - 2");
  SlabPartition p;
  p.n1 = n1;
  p.n2 = n2;
  p.b = b;
  Eigen::Index col = 0;
  for (Eigen::Index t = 1; col < n1; t++) {
    const Eigen::Index ifc = t * (b + 1) - 1;  // 0-based interface column
    const Eigen::Index stop = std::min(ifc, n1);
    if (stop > col) p.interiors.push_back({col, stop - col});
    col = stop;
    if (col == ifc && col < n1) {
      p.interfaces.push_back({col, 1});
      col++;
    }
  }
  return p;
}

}  // namespace slablu

#endif  // SLABLU_PARTITION_HPP
