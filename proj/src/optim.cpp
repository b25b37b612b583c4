#include "mir/optim.hpp"

#include <cmath>

namespace mir::optim {

template <typename T>
StepReport adam_step(std::vector<std::pair<std::string, Tensor<T>>>& params, AdamState<T>& state,
                     const AdamConfig& cfg) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign((std::size_t)params[i].second.size(), T(0));
      state.v[i].assign((std::size_t)params[i].second.size(), T(0));
    }
  }
  if (state.m.size() != params.size()) {
    throw ShapeError("adam_step: parameter list does not match optimizer state");
  }
  StepReport report;
  for (auto& [name, p] : params) {
    const std::vector<T>* g = p.grad_if();
    if (!g) continue;
    for (T gi : *g) {
      if (!std::isfinite((double)gi)) {
        report.applied = false;
        report.skipped_param = name;
        return report;
      }
    }
  }
  state.step += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, (double)state.step);
  const double c2 = 1.0 - std::pow(cfg.beta2, (double)state.step);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = params[i].second;
    if ((i64)state.m[i].size() != p.size()) {
      throw ShapeError(strfmt("adam_step: state size mismatch for %s", params[i].first.c_str()));
    }
    const std::vector<T>* g = p.grad_if();
    for (i64 k = 0; k < p.size(); ++k) {
      const double gk = g ? (double)(*g)[(std::size_t)k] : 0.0;
      const double m = cfg.beta1 * (double)state.m[i][(std::size_t)k] + (1.0 - cfg.beta1) * gk;
      const double v = cfg.beta2 * (double)state.v[i][(std::size_t)k] + (1.0 - cfg.beta2) * gk * gk;
      state.m[i][(std::size_t)k] = (T)m;
      state.v[i][(std::size_t)k] = (T)v;
      const double update = cfg.lr * (m / c1) / (std::sqrt(v / c2) + cfg.eps);
      p.data()[k] = (T)((double)p.data()[k] - update);
    }
  }
  return report;
}

template StepReport adam_step<float>(std::vector<std::pair<std::string, Tensor<float>>>&,
                                     AdamState<float>&, const AdamConfig&);
template StepReport adam_step<double>(std::vector<std::pair<std::string, Tensor<double>>>&,
                                      AdamState<double>&, const AdamConfig&);

}  // namespace mir::optim
