#include "mir/gradcheck.hpp"

#include <cmath>

namespace mir {

GradCheckReport grad_check(const std::function<TensorD(TensorD&)>& f, TensorD x, double step) {
  if (step < 1e-6 || step > 1e-4) {
    throw ShapeError(strfmt("grad_check: step %g outside [1e-6, 1e-4]", step));
  }
  GradCheckReport rep;
  const i64 n = x.size();

  std::vector<double> analytic(static_cast<std::size_t>(n));
  {
    Tape<double> tape;
    TapeScope<double> scope(tape);
    x.set_requires_grad(true);
    x.zero_grad();
    TensorD y = f(x);
    if (y.size() != 1) throw ShapeError("grad_check: f must return a scalar");
    if (!std::isfinite(y.item())) {
      rep.finite = false;
      rep.bad_coord = -1;
      return rep;
    }
    tape.backward(y);
    const auto& g = x.grad();
    for (i64 i = 0; i < n; ++i) {
      analytic[static_cast<std::size_t>(i)] = g[static_cast<std::size_t>(i)];
      if (!std::isfinite(g[static_cast<std::size_t>(i)])) {
        rep.finite = false;
        rep.bad_coord = i;
        return rep;
      }
    }
    x.set_requires_grad(false);
  }

  for (i64 i = 0; i < n; ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + step;
    const double yp = f(x).item();
    x.data()[i] = saved - step;
    const double ym = f(x).item();
    x.data()[i] = saved;
    const double cd = (yp - ym) / (2.0 * step);
    if (!std::isfinite(cd)) {
      rep.finite = false;
      rep.bad_coord = i;
      return rep;
    }
    const double err =
        std::abs(analytic[static_cast<std::size_t>(i)] - cd) / std::max(1.0, std::abs(cd));
    if (err > rep.max_rel_err) {
      rep.max_rel_err = err;
      rep.worst_coord = i;
    }
  }
  return rep;
}

}  // namespace mir
