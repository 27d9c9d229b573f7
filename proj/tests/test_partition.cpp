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

#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "slablu/partition.hpp"

namespace {

/// Every grid column lands in exactly one strip, in left-to-right
/// alternation interior / interface / interior / ...
void check_cover_and_disjoint(const slablu::SlabPartition& p) {
  std::vector<int> owner(static_cast<std::size_t>(p.n1), 0);
  auto mark = [&](const slablu::GridStrip& s) {
    for (Eigen::Index c = s.first_col; c < s.first_col + s.width; c++)
      owner[static_cast<std::size_t>(c)]++;
  };
  for (const auto& s : p.interiors) mark(s);
  for (const auto& s : p.interfaces) mark(s);
  for (int c : owner) REQUIRE(c == 1);
  for (const auto& s : p.interiors) {
    REQUIRE(s.width >= 1);
    REQUIRE(s.width <= p.b);
  }
  for (const auto& s : p.interfaces) REQUIRE(s.width == 1);
  // Interface j sits immediately after interior j.
  for (Eigen::Index j = 0; j < p.interface_count(); j++) {
    const auto& in = p.interiors[static_cast<std::size_t>(j)];
    REQUIRE(p.interfaces[static_cast<std::size_t>(j)].first_col ==
            in.first_col + in.width);
  }
}

}  // namespace

TEST_CASE("three-column slabs around a single interface", "[partition]") {
  slablu::SlabPartition p = slablu::partition(7, 5, 3);
  REQUIRE(p.interior_count() == 2);
  REQUIRE(p.interface_count() == 1);
  REQUIRE(p.interiors[0].first_col == 0);
  REQUIRE(p.interiors[0].width == 3);
  REQUIRE(p.interfaces[0].first_col == 3);
  REQUIRE(p.interiors[1].first_col == 4);
  REQUIRE(p.interiors[1].width == 3);
  check_cover_and_disjoint(p);
}

TEST_CASE("interfaces repeat every b+1 columns", "[partition]") {
  slablu::SlabPartition p = slablu::partition(9, 4, 3);
  REQUIRE(p.interface_count() == 2);
  REQUIRE(p.interfaces[0].first_col == 3);
  REQUIRE(p.interfaces[1].first_col == 7);
  REQUIRE(p.interiors.back().width == 1);
  // Each interface holds exactly n2 unknowns.
  for (Eigen::Index j = 0; j < p.interface_count(); j++) {
    REQUIRE(p.interfaces[static_cast<std::size_t>(j)].width * p.n2 == 4);
    REQUIRE(p.interface_offset(j) ==
            p.interfaces[static_cast<std::size_t>(j)].first_col * 4);
  }
  check_cover_and_disjoint(p);
}

TEST_CASE("thousand-column grid with width-50 slabs", "[partition]") {
  slablu::SlabPartition p = slablu::partition(1000, 1000, 50);
  REQUIRE(p.interface_count() == 19);
  REQUIRE(p.interior_count() == 20);
  REQUIRE(p.interiors.back().width == 31);
  check_cover_and_disjoint(p);
}

TEST_CASE("interface on the last column has no trailing strip",
          "[partition]") {
  slablu::SlabPartition p = slablu::partition(8, 3, 3);
  REQUIRE(p.interface_count() == 2);
  REQUIRE(p.interior_count() == 2);
  REQUIRE(p.interfaces[1].first_col == 7);
  REQUIRE(p.left_interior(1) == 1);
  REQUIRE(p.right_interior(1) == -1);
  REQUIRE(p.right_interior(0) == 1);
  check_cover_and_disjoint(p);
}

TEST_CASE("cover and adjacency hold across widths", "[partition]") {
  for (Eigen::Index n1 : {5, 11, 16, 37, 101, 257}) {
    for (Eigen::Index b = 1; b <= n1 - 2; b++) {
      slablu::SlabPartition p = slablu::partition(n1, 6, b);
      check_cover_and_disjoint(p);
      REQUIRE((p.interior_count() == p.interface_count() ||
               p.interior_count() == p.interface_count() + 1));
      for (Eigen::Index i = 0; i < p.interior_count(); i++) {
        REQUIRE(p.interior_size(i) ==
                p.interiors[static_cast<std::size_t>(i)].width * 6);
        REQUIRE(p.interior_offset(i) ==
                p.interiors[static_cast<std::size_t>(i)].first_col * 6);
      }
    }
  }
}

TEST_CASE("slab width bounds are enforced", "[partition]") {
  REQUIRE_THROWS_AS(slablu::partition(10, 4, 0), slablu::ConfigError);
  REQUIRE_THROWS_AS(slablu::partition(10, 4, 9), slablu::ConfigError);
  REQUIRE_THROWS_AS(slablu::partition(10, 4, 20), slablu::ConfigError);
  REQUIRE_THROWS_AS(slablu::partition(2, 4, 1), slablu::ConfigError);
  REQUIRE_THROWS_AS(slablu::partition(10, 0, 3), slablu::ConfigError);
  REQUIRE_NOTHROW(slablu::partition(10, 4, 8));
}
