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
#ifndef SLABLU_BESSEL_HPP
#define SLABLU_BESSEL_HPP

#include <cmath>

#include "slablu/common.hpp"

namespace slablu {

/// Bessel function of the first kind, order zero.  Absolute error is
/// below 1e-13 for |t| <= 1e4.  Small arguments use the power series in
/// extended precision; larger ones evaluate the integral representation
/// J0(t) = (1/pi) * int_0^pi cos(t sin(theta)) dtheta by the midpoint
/// rule, whose error decays spectrally for this periodic integrand.
inline double bessel_j0(double t) {
  if (!std::isfinite(t)) throw Error("bessel_j0: argument must be finite");
  t = std::fabs(t);
  if (t <= 8.0) {
    const long double q = static_cast<long double>(t) / 2.0L;
    long double sum = 1.0L, term = 1.0L;
    for (int m = 1; m <= 64; m++) {
      term *= -(q * q) / (static_cast<long double>(m) * m);
      sum += term;
      if (std::fabs(static_cast<double>(term)) < 1e-20) break;
    }
    return static_cast<double>(sum);
  }
  const int n = static_cast<int>(std::ceil(0.75 * t)) + 30;
  const long double lt = static_cast<long double>(t);
  const long double pi = 3.14159265358979323846264338327950288L;
  long double sum = 0.0L;
  for (int k = 0; k < n; k++) {
    const long double theta = pi * (static_cast<long double>(k) + 0.5L) / n;
    sum += std::cos(lt * std::sin(theta));
  }
  return static_cast<double>(sum / n);
}

}  // namespace slablu

#endif  // SLABLU_BESSEL_HPP
