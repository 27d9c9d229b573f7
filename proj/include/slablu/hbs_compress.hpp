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
#ifndef SLABLU_HBS_COMPRESS_HPP
#define SLABLU_HBS_COMPRESS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "slablu/cluster_tree.hpp"
#include "slablu/common.hpp"
#include "slablu/dense.hpp"
#include "slablu/hbs.hpp"

namespace slablu {

/// Black-box access to the target operator: returns M * X, or M^T * X
/// when `adjoint` is set.
using MatrixSampler = std::function<Matrix(const Matrix&, bool)>;

struct CompressOptions {
  double tol = 1e-10;        // a-posteriori probe tolerance, relative
  double trunc_rel = 1e-12;  // per-block singular-value truncation
  std::uint64_t seed = 0;    // recorded for replay
};

struct CompressStats {
  Eigen::Index products_normal = 0;   // columns sent through M
  Eigen::Index products_adjoint = 0;  // columns sent through M^T
  int rounds = 0;                     // probed adaptive rounds
  Eigen::Index final_rank = 0;        // widest recovered generator
  double residual_estimate = 0.0;     // last probe result, relative
  std::uint64_t seed = 0;
};

namespace detail {

/// Orthonormal basis of the right nullspace of a (possibly empty) block.
inline Matrix right_nullspace(const Matrix& a) {
  const Eigen::Index s = a.cols();
  if (a.rows() == 0) return Matrix::Identity(s, s);
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeFullV);
  Eigen::Index rank = 0;
  const auto& sv = svd.singularValues();
  for (Eigen::Index i = 0; i < sv.size(); i++)
    if (sv[0] > 0.0 && sv[i] > 1e-13 * sv[0]) rank++;
  return svd.matrixV().rightCols(s - rank);
}

/// Right-multiplication by the pseudoinverse: returns P * pinv(a).
inline Matrix apply_pinv(const Matrix& p, const Matrix& a) {
  if (a.rows() == 0 || p.rows() == 0) return Matrix::Zero(p.rows(), a.rows());
  return least_squares_solve(a.transpose(), p.transpose()).transpose();
}

/// Orthonormal range basis truncated at an absolute singular-value
/// threshold.  The threshold is derived from the global sample scale,
/// not the block's own largest value, so that blocks which vanish
/// relative to the operator collapse to width zero.
inline Matrix orth_columns_floor(const Matrix& a, double abs_tol,
                                 Eigen::Index max_cols) {
  if (a.size() == 0) return Matrix(a.rows(), 0);
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU);
  const auto& s = svd.singularValues();
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < s.size(); i++)
    if (s(i) > abs_tol) r++;
  if (r > max_cols) r = max_cols;
  return svd.matrixU().leftCols(r);
}

/// Reconstruct the HBS payload from one global sample set.  Y = M Omega
/// and Z = M^T Psi must come from the same operator; no sampling happens
/// here.  Generator widths are truncated at `trunc_rel` and capped at r.
inline HbsMatrix build_from_samples(const ClusterTree& tree, const Matrix& om,
                                    const Matrix& y, const Matrix& ps,
                                    const Matrix& z, Eigen::Index r,
                                    double trunc_rel) {
  const std::size_t count = static_cast<std::size_t>(tree.node_count());
  std::vector<HbsNodeData> nodes(count);
  std::vector<Matrix> om_hat(count), y_hat(count), ps_hat(count), z_hat(count);

  // ||Y||_F / sqrt(s) estimates the operator's Frobenius norm; singular
  // values below trunc_rel of it carry nothing at the target accuracy.
  const double scale = std::max(y.norm(), z.norm()) /
                       std::sqrt(double(std::max<Eigen::Index>(y.cols(), 1)));
  const double floor_tol = trunc_rel * scale;

  for (Eigen::Index id : tree.post_order()) {
    const ClusterNode& nd = tree.node(id);
    const bool root = nd.parent < 0;
    Matrix ym, omm, zm, psm;
    if (nd.is_leaf()) {
      ym = y.middleRows(nd.begin, nd.size());
      omm = om.middleRows(nd.begin, nd.size());
      zm = z.middleRows(nd.begin, nd.size());
      psm = ps.middleRows(nd.begin, nd.size());
    } else {
      const auto& a = nd.left;
      const auto& b = nd.right;
      auto vstack = [](const Matrix& t, const Matrix& u) {
        Matrix out(t.rows() + u.rows(), std::max(t.cols(), u.cols()));
        out.topRows(t.rows()) = t;
        out.bottomRows(u.rows()) = u;
        return out;
      };
      ym = vstack(y_hat[static_cast<std::size_t>(a)],
                  y_hat[static_cast<std::size_t>(b)]);
      omm = vstack(om_hat[static_cast<std::size_t>(a)],
                   om_hat[static_cast<std::size_t>(b)]);
      zm = vstack(z_hat[static_cast<std::size_t>(a)],
                  z_hat[static_cast<std::size_t>(b)]);
      psm = vstack(ps_hat[static_cast<std::size_t>(a)],
                   ps_hat[static_cast<std::size_t>(b)]);
    }
    HbsNodeData& out = nodes[static_cast<std::size_t>(id)];
    if (root) {
      // The top-level core is recovered completely from the samples.
      out.d = apply_pinv(ym, omm);
      out.u.resize(nd.is_leaf() ? nd.size() : ym.rows(), 0);
      out.v.resize(nd.is_leaf() ? nd.size() : omm.rows(), 0);
      continue;
    }
    // Columns of the off-diagonal block row survive multiplication by a
    // nullspace of this block's own test rows; that isolates the range.
    const Eigen::Index cap = std::min(r, std::min(ym.rows(), omm.rows()));
    out.u = orth_columns_floor(ym * right_nullspace(omm), floor_tol, cap);
    out.v = orth_columns_floor(zm * right_nullspace(psm), floor_tol, cap);

    // Remainder of the diagonal term outside span(u) x span(v).
    Matrix f = apply_pinv(ym - out.u * (out.u.transpose() * ym), omm);
    Matrix g = apply_pinv(zm - out.v * (out.v.transpose() * zm), psm);
    out.d = f + out.u * (out.u.transpose() * g.transpose());

    y_hat[static_cast<std::size_t>(id)] =
        out.u.transpose() * ym - (out.u.transpose() * out.d) * omm;
    z_hat[static_cast<std::size_t>(id)] =
        out.v.transpose() * zm - (out.v.transpose() * out.d.transpose()) * psm;
    om_hat[static_cast<std::size_t>(id)] = out.v.transpose() * omm;
    ps_hat[static_cast<std::size_t>(id)] = out.u.transpose() * psm;
  }
  return HbsMatrix(tree, std::move(nodes), std::max<Eigen::Index>(r, 1));
}

/// Relative reconstruction error estimated with fresh random probes.
inline double probe_residual(const MatrixSampler& sampler, const HbsMatrix& h,
                             Eigen::Index n, std::mt19937_64& rng,
                             CompressStats& stats, Matrix* w_out = nullptr,
                             Matrix* mw_out = nullptr, Matrix* q_out = nullptr,
                             Matrix* mq_out = nullptr) {
  Matrix w = gaussian_matrix(n, 4, rng);
  Matrix mw = sampler(w, false);
  stats.products_normal += w.cols();
  Matrix q = gaussian_matrix(n, 4, rng);
  Matrix mq = sampler(q, true);
  stats.products_adjoint += q.cols();

  const double dn = (mw - h.apply(w, false)).norm();
  const double da = (mq - h.apply(q, true)).norm();
  const double nn = mw.norm(), na = mq.norm();
  const double rel_n = nn > 0.0 ? dn / nn : dn;
  const double rel_a = na > 0.0 ? da / na : da;
  if (w_out) *w_out = std::move(w);
  if (mw_out) *mw_out = std::move(mw);
  if (q_out) *q_out = std::move(q);
  if (mq_out) *mq_out = std::move(mq);
  return std::max(rel_n, rel_a);
}

/// Sample count for a working rank (budget: 3r plus oversampling).
inline Eigen::Index sample_count(Eigen::Index r) { return 3 * r + 10; }

/// A working rank is usable only if the sketch leaves enough nullspace
/// columns at the widest leaf.
inline bool rank_feasible(const ClusterTree& tree, Eigen::Index r) {
  if (tree.node(tree.root()).is_leaf())
    return sample_count(r) >= tree.dim();
  return sample_count(r) >= tree.max_leaf_size() + r;
}

inline void append_columns(Matrix& pool, const Matrix& fresh) {
  if (pool.size() == 0) {
    pool = fresh;
    return;
  }
  const Eigen::Index old = pool.cols();
  pool.conservativeResize(Eigen::NoChange, old + fresh.cols());
  pool.rightCols(fresh.cols()) = fresh;
}

}  // namespace detail

/// Compress a black-box operator onto the given tree with a fixed rank
/// budget.  Throws CompressionError if the rank bound is infeasible for
/// the tree's leaf size, or if the a-posteriori probe misses `tol`.
inline HbsMatrix hbs_compress(const MatrixSampler& sampler, Eigen::Index n,
                              const ClusterTree& tree, Eigen::Index rank_bound,
                              const CompressOptions& options = {},
                              CompressStats* stats_out = nullptr) {
  if (tree.dim() != n)
    throw Error("hbs_compress: tree and operator dimensions differ");
  if (rank_bound < 0) throw ConfigError("hbs_compress: negative rank bound");
  CompressStats stats;
  stats.seed = options.seed;
  if (!detail::rank_feasible(tree, rank_bound))
    throw CompressionError(
        "hbs_compress: rank bound leaves no sketch nullspace at the widest "
        "leaf",
        std::numeric_limits<double>::infinity());

  const Eigen::Index s = detail::sample_count(rank_bound);
  std::mt19937_64 rng_om(mix_seed(options.seed, 1));
  std::mt19937_64 rng_ps(mix_seed(options.seed, 2));
  Matrix om = gaussian_matrix(n, s, rng_om);
  Matrix ps = gaussian_matrix(n, s, rng_ps);
  Matrix y = sampler(om, false);
  stats.products_normal += s;
  Matrix z = sampler(ps, true);
  stats.products_adjoint += s;

  HbsMatrix h = detail::build_from_samples(tree, om, y, ps, z, rank_bound,
                                           options.trunc_rel);
  std::mt19937_64 rng_probe(mix_seed(options.seed, 100));
  stats.rounds = 1;
  stats.residual_estimate =
      detail::probe_residual(sampler, h, n, rng_probe, stats);
  stats.final_rank = h.max_generator_width();
  if (stats_out) *stats_out = stats;
  if (stats.residual_estimate > options.tol)
    throw CompressionError(
        "hbs_compress: probe residual exceeds tolerance (rank bound too "
        "small)",
        stats.residual_estimate);
  return h;
}

/// Adaptive variant: doubles the working rank until the probe passes,
/// reusing every sample and failed probe from earlier rounds.
inline HbsMatrix hbs_compress_adaptive(const MatrixSampler& sampler,
                                       Eigen::Index n, const ClusterTree& tree,
                                       Eigen::Index r_start,
                                       Eigen::Index r_max,
                                       const CompressOptions& options = {},
                                       CompressStats* stats_out = nullptr) {
  if (tree.dim() != n)
    throw Error("hbs_compress_adaptive: tree and operator dimensions differ");
  if (r_start > r_max)
    throw ConfigError("hbs_compress_adaptive: r_start must be <= r_max");
  CompressStats stats;
  stats.seed = options.seed;
  stats.residual_estimate = std::numeric_limits<double>::infinity();

  Matrix om, y, ps, z;
  std::mt19937_64 rng_om(mix_seed(options.seed, 1));
  std::mt19937_64 rng_ps(mix_seed(options.seed, 2));
  std::mt19937_64 rng_probe(mix_seed(options.seed, 100));

  Eigen::Index r = std::max<Eigen::Index>(r_start, 2);
  for (;;) {
    if (detail::rank_feasible(tree, r)) {
      const Eigen::Index s = detail::sample_count(r);
      if (om.cols() < s) {
        Matrix fresh_om = gaussian_matrix(n, s - om.cols(), rng_om);
        Matrix fresh_ps = gaussian_matrix(n, s - ps.cols(), rng_ps);
        detail::append_columns(y, sampler(fresh_om, false));
        stats.products_normal += fresh_om.cols();
        detail::append_columns(z, sampler(fresh_ps, true));
        stats.products_adjoint += fresh_ps.cols();
        detail::append_columns(om, fresh_om);
        detail::append_columns(ps, fresh_ps);
      }
      HbsMatrix h = detail::build_from_samples(tree, om, y, ps, z, r,
                                               options.trunc_rel);
      stats.rounds++;
      Matrix w, mw, q, mq;
      stats.residual_estimate = detail::probe_residual(
          sampler, h, n, rng_probe, stats, &w, &mw, &q, &mq);
      if (stats.residual_estimate <= options.tol) {
        stats.final_rank = h.max_generator_width();
        if (stats_out) *stats_out = stats;
        return h;
      }
      // Failed probes are valid samples; fold them into the pool.
      detail::append_columns(om, w);
      detail::append_columns(y, mw);
      detail::append_columns(ps, q);
      detail::append_columns(z, mq);
    }
    if (r >= r_max) break;
    r = std::min(2 * r, r_max);
  }
  if (stats_out) *stats_out = stats;
  throw CompressionError(
      "hbs_compress_adaptive: rank ceiling reached without passing the probe",
      stats.residual_estimate);
}

}  // namespace slablu

#endif  // SLABLU_HBS_COMPRESS_HPP
