#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kasr/errors.hpp"

namespace kasr {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Kind of the operation that produced a tensor.
enum class OpKind : std::uint8_t {
  Conv2d,
  MaxPool2d,
  LeakyRelu,
  DepthToSpace,
  SpaceToDepth,
  Add,
  Sub,
  Mul,
  ScalarMul,
  AddScalar,
  Abs,
  Square,
  Sqrt,
  Mean,
  Sum,
  MinAll,
  MaxAll,
  Clamp,
  ConcatChannels,
  FlipH,
  FlipV,
  Rot90,
  Reshape,
  Sobel,
  MinMaxNormalize,
  BceWithLogits,
  Custom,
};

std::string_view op_name(OpKind kind);

template <typename T>
class BasicTensor;

/// One node of the reverse-mode graph. `backward` receives the gradient of the
/// output and adds the contributions of every input that requires a gradient.
template <typename T>
struct ComputationRecord {
  OpKind kind = OpKind::Custom;
  std::vector<BasicTensor<T>> inputs;
  std::function<void(std::span<const T> grad_out)> backward;
};

namespace detail {
template <typename T>
struct TensorStorage {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  std::shared_ptr<ComputationRecord<T>> record;
};
}  // namespace detail

/// Graph recording switch, per thread.
class GradMode {
 public:
  static bool enabled() noexcept;
  static void set_enabled(bool on) noexcept;
};

/// Disables graph recording for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(GradMode::enabled()) { GradMode::set_enabled(false); }
  ~NoGradGuard() { GradMode::set_enabled(previous_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Dense row-major tensor with shared handle semantics. Copying a tensor copies
/// the handle; `clone()` copies the values.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  BasicTensor(Shape shape, std::vector<T> data);

  static BasicTensor zeros(const Shape& shape) { return full(shape, T(0)); }
  static BasicTensor ones(const Shape& shape) { return full(shape, T(1)); }
  static BasicTensor full(const Shape& shape, T value);
  static BasicTensor scalar(T value) { return BasicTensor(Shape{1}, std::vector<T>{value}); }

  /// Builds the output of a differentiable operation. The record is attached
  /// only when grad mode is on and at least one input requires a gradient.
  static BasicTensor from_op(Shape shape, std::vector<T> data, OpKind kind,
                             std::vector<BasicTensor> inputs,
                             std::function<void(std::span<const T>)> backward);

  bool defined() const noexcept { return static_cast<bool>(impl_); }
  const Shape& shape() const { return impl_->shape; }
  std::size_t ndim() const { return impl_->shape.size(); }
  std::size_t size(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const T> data() const { return impl_->data; }
  /// In-place access for parameter initialization and optimizer updates.
  std::span<T> mutable_data() { return impl_->data; }
  T item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  BasicTensor& set_requires_grad(bool on);

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  std::span<T> mutable_grad() { return impl_->grad; }
  /// Gradient accumulator, allocated as zeros on first use.
  std::span<T> grad_buffer() const;
  void clear_grad() { impl_->grad.clear(); }

  const std::shared_ptr<ComputationRecord<T>>& record() const { return impl_->record; }
  bool is_leaf() const { return !impl_->record; }
  bool same_as(const BasicTensor& other) const { return impl_ == other.impl_; }

  BasicTensor detach() const;
  BasicTensor clone() const { return detach(); }

  /// Reverse-mode sweep from this scalar. Gradients accumulate additively.
  void backward() const;

 private:
  std::shared_ptr<detail::TensorStorage<T>> impl_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace kasr
