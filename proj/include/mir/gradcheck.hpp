#pragma once

#include <functional>

#include "mir/tensor.hpp"

namespace mir {

struct GradCheckReport {
  double max_rel_err = 0.0;
  i64 worst_coord = -1;
  // false when the function value, analytic gradient, or a difference
  // quotient turned non-finite; bad_coord names the offending coordinate
  // (-1 means the base evaluation itself).
  bool finite = true;
  i64 bad_coord = -1;

  bool ok(double tol) const { return finite && max_rel_err < tol; }
};

// Central-difference verification of reverse-mode gradients, 64-bit only.
// f must build its graph from x on every call and return a scalar tensor.
// Reports max over coordinates of |analytic - central| / max(1, |central|).
GradCheckReport grad_check(const std::function<TensorD(TensorD&)>& f, TensorD x,
                           double step = 1e-5);

}  // namespace mir
