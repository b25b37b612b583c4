#pragma once

#include <functional>
#include <memory>

#include "mir/common.hpp"

namespace mir {

template <typename T>
struct TensorStorage {
  Shape shape;
  std::vector<T> data;
  bool requires_grad = false;
  std::vector<T> grad;  // sized lazily; same length as data once touched
};

// Shared-storage handle over a dense row-major array. Copying a Tensor
// aliases the same storage; ops always allocate fresh outputs.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<T> values, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return s_ != nullptr; }
  const Shape& shape() const { return s_->shape; }
  int ndim() const { return static_cast<int>(s_->shape.size()); }
  i64 dim(int axis) const { return s_->shape[static_cast<std::size_t>(axis)]; }
  i64 size() const { return static_cast<i64>(s_->data.size()); }

  T* data() { return s_->data.data(); }
  const T* data() const { return s_->data.data(); }
  std::vector<T>& vec() { return s_->data; }
  const std::vector<T>& vec() const { return s_->data; }
  T item() const;

  bool requires_grad() const { return s_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    s_->requires_grad = v;
    return *this;
  }

  // Gradient buffer, allocated (zeroed) on first access.
  std::vector<T>& grad();
  const std::vector<T>* grad_if() const { return s_->grad.empty() ? nullptr : &s_->grad; }
  void zero_grad();
  void add_grad(const T* g, i64 n);

  // Deep copy of data (requires_grad off, no grad).
  Tensor clone_data() const;

  std::shared_ptr<TensorStorage<T>> storage() const { return s_; }

 private:
  explicit Tensor(std::shared_ptr<TensorStorage<T>> s) : s_(std::move(s)) {}
  std::shared_ptr<TensorStorage<T>> s_;
};

// Records one backward hook per produced tensor, in execution order.
// backward(root) replays the hooks in reverse. Output-tensor gradients are
// cleared before each pass; gradients of leaves (tensors never produced by
// a recorded op) accumulate across passes until zero_grad.
template <typename T>
class Tape {
 public:
  struct Node {
    std::shared_ptr<TensorStorage<T>> out;
    std::function<void()> backward;
  };

  void record(const Tensor<T>& out, std::function<void()> fn) {
    nodes_.push_back(Node{out.storage(), std::move(fn)});
  }

  void backward(const Tensor<T>& root);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  static Tape*& active() {
    thread_local Tape* tape = nullptr;
    return tape;
  }

 private:
  std::vector<Node> nodes_;
};

// RAII activation of a tape on the current thread.
template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape) : prev_(Tape<T>::active()) { Tape<T>::active() = &tape; }
  ~TapeScope() { Tape<T>::active() = prev_; }
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* prev_;
};

template <typename T>
inline bool recording() {
  return Tape<T>::active() != nullptr;
}

template <typename T>
void backward(Tape<T>& tape, const Tensor<T>& root) {
  tape.backward(root);
}

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace mir
