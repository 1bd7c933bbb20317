// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "dr3d/tensor.hpp"

namespace dr3d::testutil {

// Central-difference derivative of f at x along one coordinate.
inline double fd(const std::function<double(double)>& f, double x,
                 double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

inline double rel_err(double got, double want) {
  const double denom = std::max({std::abs(got), std::abs(want), 1e-8});
  return std::abs(got - want) / denom;
}

// Gradient check: perturbs *slot and compares analytic to central-difference.
// Skips near-zero pairs below `floor` where relative error is meaningless.
inline bool check_grad(double* slot, double analytic,
                       const std::function<double()>& loss, double h = 1e-5,
                       double tol = 1e-3, double floor_ = 1e-9) {
  const double saved = *slot;
  *slot = saved + h;
  const double lp = loss();
  *slot = saved - h;
  const double lm = loss();
  *slot = saved;
  const double numeric = (lp - lm) / (2.0 * h);
  if (std::abs(numeric) < floor_ && std::abs(analytic) < floor_) return true;
  return rel_err(analytic, numeric) < tol;
}

}  // namespace dr3d::testutil
