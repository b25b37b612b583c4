#pragma once

#include <cmath>
#include <cstring>

#include "mir/rng.hpp"
#include "mir/tensor.hpp"

namespace mir::testing {

template <typename T>
Tensor<T> random_tensor(const Shape& shape, u64 seed, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t = Tensor<T>::zeros(shape);
  CounterRng rng(StreamKey{seed, fnv1a("test-fill"), 0, 0});
  for (i64 i = 0; i < t.size(); ++i) t.data()[i] = (T)rng.uniform(lo, hi);
  return t;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.size() != b.size()) return 1e300;
  double worst = 0.0;
  for (i64 i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs((double)a.data()[i] - (double)b.data()[i]));
  }
  return worst;
}

template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), sizeof(T) * (std::size_t)a.size()) == 0;
}

template <typename T>
double dot(const Tensor<T>& a, const Tensor<T>& b) {
  double acc = 0.0;
  for (i64 i = 0; i < a.size(); ++i) acc += (double)a.data()[i] * (double)b.data()[i];
  return acc;
}

template <typename T>
double l2(const Tensor<T>& a) {
  return std::sqrt(dot(a, a));
}

}  // namespace mir::testing
