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
#ifndef SLABLU_PROBLEM_HPP
#define SLABLU_PROBLEM_HPP

#include <array>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "slablu/bessel.hpp"
#include "slablu/common.hpp"

namespace slablu {

/// Pointwise scalar field over the rectangle.
using ScalarField = std::function<double(double, double)>;

/// Description of the variable-coefficient Helmholtz boundary-value
/// problem -Delta u - kappa^2 b(x) u = f on [0, (n1+1)h] x [0, (n2+1)h]
/// with Dirichlet data g, discretized by the five-point stencil on the
/// n1 x n2 grid of interior nodes.  Unknown (i, j), zero-based, sits at
/// ((i+1)h, (j+1)h).
struct ProblemSpec {
  Eigen::Index n1 = 0;
  Eigen::Index n2 = 0;
  double h = 0.0;
  double kappa = 0.0;
  ScalarField coefficient_field = [](double, double) { return 1.0; };
  ScalarField dirichlet_data = [](double, double) { return 0.0; };
  ScalarField body_load = [](double, double) { return 0.0; };
};

/// Assembled sparse system A u = f with boundary data folded into f.
/// Unknowns are ordered column-of-the-grid major: index(i, j) = i*n2 + j.
struct SparseSystem {
  Eigen::SparseMatrix<double, Eigen::RowMajor> matrix;
  Vector rhs;
  std::vector<std::array<double, 2>> node_coords;
  Eigen::Index n1 = 0;
  Eigen::Index n2 = 0;
  double h = 0.0;

  Eigen::Index dim() const { return matrix.rows(); }
  Eigen::Index node_index(Eigen::Index i, Eigen::Index j) const {
    return i * n2 + j;
  }
};

/// Residual and solution-error summary for a computed solution.
/// When a reference norm vanishes the corresponding ratio degrades to an
/// absolute norm and the matching flag is set.
struct ErrorReport {
  double relerr_res = 0.0;
  double relerr_true = 0.0;
  Eigen::Index n_rhs = 0;
  bool residual_norm_is_absolute = false;
  bool solution_norm_is_absolute = false;
};

/// Five-point finite-difference assembly of -Delta - kappa^2 b(x).
inline SparseSystem assemble_fd5(const ProblemSpec& spec) {
  if (spec.n2 < 2 || spec.n1 < spec.n2)
    throw ConfigError("assemble_fd5: grid must satisfy n1 >= n2 >= 2");
  if (!(spec.h > 0.0)) throw ConfigError("assemble_fd5: h must be positive");
  if (spec.kappa < 0.0)
    throw ConfigError("assemble_fd5: kappa must be nonnegative");

  const Eigen::Index n1 = spec.n1, n2 = spec.n2;
  const double h = spec.h;
  const double inv_h2 = 1.0 / (h * h);
  const Eigen::Index n = n1 * n2;

  SparseSystem sys;
  sys.n1 = n1;
  sys.n2 = n2;
  sys.h = h;
  sys.rhs = Vector::Zero(n);
  sys.node_coords.resize(static_cast<std::size_t>(n));

  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(static_cast<std::size_t>(5 * n));

  for (Eigen::Index i = 0; i < n1; i++) {
    for (Eigen::Index j = 0; j < n2; j++) {
      const Eigen::Index row = i * n2 + j;
      const double x = double(i + 1) * h;
      const double y = double(j + 1) * h;
      sys.node_coords[static_cast<std::size_t>(row)] = {x, y};

      const double b = spec.coefficient_field(x, y);
      if (b < 0.0)
        throw Error("assemble_fd5: coefficient field is negative at a node");
      entries.emplace_back(row, row,
                           4.0 * inv_h2 - spec.kappa * spec.kappa * b);
      sys.rhs[row] = spec.body_load(x, y);

      const Eigen::Index di[4] = {-1, 1, 0, 0};
      const Eigen::Index dj[4] = {0, 0, -1, 1};
      for (int s = 0; s < 4; s++) {
        const Eigen::Index ii = i + di[s], jj = j + dj[s];
        if (ii >= 0 && ii < n1 && jj >= 0 && jj < n2) {
          entries.emplace_back(row, ii * n2 + jj, -inv_h2);
        } else {
          sys.rhs[row] +=
              spec.dirichlet_data(double(ii + 1) * h, double(jj + 1) * h) *
              inv_h2;
        }
      }
    }
  }
  sys.matrix.resize(n, n);
  sys.matrix.setFromTriplets(entries.begin(), entries.end());
  sys.matrix.makeCompressed();
  return sys;
}

/// Harmonic reference solution log ||x - x0|| with an exterior source
/// at x0 = (-0.1, 0.5); exact for the Laplace equation on the rectangle.
inline double true_solution_poisson(double x, double y) {
  const double r = std::hypot(x + 0.1, y - 0.5);
  if (r == 0.0)
    throw Error("true_solution_poisson: evaluated at the source point");
  return std::log(r);
}

/// Oscillatory reference solution J0(kappa ||x - x0||), exact for the
/// constant-coefficient Helmholtz equation.
inline double true_solution_helmholtz(double x, double y, double kappa) {
  if (kappa < 0.0)
    throw Error("true_solution_helmholtz: kappa must be nonnegative");
  return bessel_j0(kappa * std::hypot(x + 0.1, y - 0.5));
}

/// Wavenumber for a requested point-per-wavelength density on the unit
/// square: ppw = 2 pi / (kappa h) with h = 1/(n2+1).
inline double kappa_from_ppw(double ppw, Eigen::Index n2) {
  if (!(ppw > 0.0)) throw ConfigError("kappa_from_ppw: ppw must be positive");
  if (n2 < 2) throw ConfigError("kappa_from_ppw: n2 must be at least 2");
  return 2.0 * 3.14159265358979323846 * double(n2 + 1) / ppw;
}

/// Relative residual and solution error for a block of solutions.
inline ErrorReport error_report(const SparseSystem& system,
                                const Eigen::Ref<const Matrix>& u_calc,
                                const Eigen::Ref<const Matrix>& u_true,
                                const Eigen::Ref<const Matrix>& f) {
  if (u_calc.rows() != system.dim() || u_true.rows() != system.dim() ||
      f.rows() != system.dim())
    throw Error("error_report: vector length must equal system dimension");
  if (u_calc.cols() != u_true.cols() || u_calc.cols() != f.cols() ||
      u_calc.cols() < 1)
    throw Error("error_report: column counts must agree");

  ErrorReport rep;
  rep.n_rhs = u_calc.cols();
  const double res = (system.matrix * u_calc - f).norm();
  const double fn = f.norm();
  if (fn > 0.0) {
    rep.relerr_res = res / fn;
  } else {
    rep.relerr_res = res;
    rep.residual_norm_is_absolute = true;
  }
  const double err = (u_calc - u_true).norm();
  const double un = u_true.norm();
  if (un > 0.0) {
    rep.relerr_true = err / un;
  } else {
    rep.relerr_true = err;
    rep.solution_norm_is_absolute = true;
  }
  return rep;
}

inline ErrorReport error_report(const SparseSystem& system,
                                const Eigen::Ref<const Matrix>& u_calc,
                                const Eigen::Ref<const Matrix>& u_true) {
  return error_report(system, u_calc, u_true, system.rhs);
}

/// Reference-solution samples at all unknowns, as a length-N vector.
inline Vector sample_field(const SparseSystem& system,
                           const ScalarField& field) {
  Vector v(system.dim());
  for (Eigen::Index k = 0; k < system.dim(); k++)
    v[k] = field(system.node_coords[static_cast<std::size_t>(k)][0],
                 system.node_coords[static_cast<std::size_t>(k)][1]);
  return v;
}

/// Laplace problem with the log-distance reference solution as boundary
/// data; the discrete solution converges to the reference at order two.
inline ProblemSpec poisson_log_problem(Eigen::Index n1, Eigen::Index n2) {
  ProblemSpec spec;
  spec.n1 = n1;
  spec.n2 = n2;
  spec.h = 1.0 / double(n2 + 1);
  spec.kappa = 0.0;
  spec.coefficient_field = [](double, double) { return 1.0; };
  spec.dirichlet_data = [](double x, double y) {
    return true_solution_poisson(x, y);
  };
  spec.body_load = [](double, double) { return 0.0; };
  return spec;
}

/// Constant-coefficient Helmholtz problem with the Bessel reference
/// solution as boundary data.
inline ProblemSpec helmholtz_problem(Eigen::Index n1, Eigen::Index n2,
                                     double kappa) {
  ProblemSpec spec;
  spec.n1 = n1;
  spec.n2 = n2;
  spec.h = 1.0 / double(n2 + 1);
  spec.kappa = kappa;
  spec.coefficient_field = [](double, double) { return 1.0; };
  spec.dirichlet_data = [kappa](double x, double y) {
    return true_solution_helmholtz(x, y, kappa);
  };
  spec.body_load = [](double, double) { return 0.0; };
  return spec;
}

/// Helmholtz problem with a smooth non-constant coefficient field
/// (a Gaussian bump scatterer); no closed-form reference solution.
inline ProblemSpec helmholtz_bump_problem(Eigen::Index n1, Eigen::Index n2,
                                          double kappa) {
  ProblemSpec spec;
  spec.n1 = n1;
  spec.n2 = n2;
  spec.h = 1.0 / double(n2 + 1);
  spec.kappa = kappa;
  spec.coefficient_field = [n1, n2](double x, double y) {
    const double h = 1.0 / double(n2 + 1);
    const double cx = 0.5 * double(n1 + 1) * h, cy = 0.5;
    const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
    return 1.0 - 0.9 * std::exp(-64.0 * d2);
  };
  spec.dirichlet_data = [kappa](double x, double y) {
    return true_solution_helmholtz(x, y, kappa);
  };
  spec.body_load = [](double, double) { return 0.0; };
  return spec;
}

/// MatrixMarket coordinate-format export (1-based indices).
inline void write_matrix_market(const SparseSystem& system,
                                std::ostream& os) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << system.dim() << " " << system.dim() << " "
     << system.matrix.nonZeros() << "\n";
  char line[96];
  for (Eigen::Index r = 0; r < system.matrix.outerSize(); r++) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(
             system.matrix, r);
         it; ++it) {
      std::snprintf(line, sizeof(line), "%ld %ld %.16e\n",
                    static_cast<long>(it.row() + 1),
                    static_cast<long>(it.col() + 1), it.value());
      os << line;
    }
  }
}

}  // namespace slablu

#endif  // SLABLU_PROBLEM_HPP
