#include "mir/tensor.hpp"

#include <algorithm>

namespace mir {

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  const i64 n = numel(shape);
  if (n < 0) throw ShapeError("negative extent in shape " + shape_str(shape));
  auto s = std::make_shared<TensorStorage<T>>();
  s->shape = std::move(shape);
  s->data.assign(static_cast<std::size_t>(n), T(0));
  s->requires_grad = requires_grad;
  return Tensor(std::move(s));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.vec().begin(), t.vec().end(), value);
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::from(Shape shape, std::vector<T> values, bool requires_grad) {
  const i64 n = numel(shape);
  if (n != static_cast<i64>(values.size())) {
    throw ShapeError(strfmt("data length %zd does not match shape %s", values.size(),
                            shape_str(shape).c_str()));
  }
  auto s = std::make_shared<TensorStorage<T>>();
  s->shape = std::move(shape);
  s->data = std::move(values);
  s->requires_grad = requires_grad;
  return Tensor(std::move(s));
}

template <typename T>
Tensor<T> Tensor<T>::scalar(T value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw ShapeError("item() requires a scalar, got shape " + shape_str(shape()));
  return s_->data[0];
}

template <typename T>
std::vector<T>& Tensor<T>::grad() {
  if (s_->grad.size() != s_->data.size()) s_->grad.assign(s_->data.size(), T(0));
  return s_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (!s_->grad.empty()) std::fill(s_->grad.begin(), s_->grad.end(), T(0));
}

template <typename T>
void Tensor<T>::add_grad(const T* g, i64 n) {
  if (n != size()) throw ShapeError("gradient length mismatch");
  auto& acc = grad();
  for (i64 i = 0; i < n; ++i) acc[static_cast<std::size_t>(i)] += g[i];
}

template <typename T>
Tensor<T> Tensor<T>::clone_data() const {
  return Tensor<T>::from(shape(), vec());
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& root) {
  if (root.size() != 1) {
    throw ShapeError("backward requires a scalar root, got shape " + shape_str(root.shape()));
  }
  // Clear intermediate gradients so each pass computes d(root)/d(leaf)
  // exactly once; leaves are untouched here and therefore accumulate.
  for (auto& node : nodes_) {
    if (node.out->grad.size() != node.out->data.size()) {
      node.out->grad.assign(node.out->data.size(), T(0));
    } else {
      std::fill(node.out->grad.begin(), node.out->grad.end(), T(0));
    }
  }
  auto root_storage = root.storage();
  if (root_storage->grad.size() != root_storage->data.size()) {
    root_storage->grad.assign(root_storage->data.size(), T(0));
  }
  root_storage->grad[0] = T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward();
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace mir
