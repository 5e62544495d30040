#include "kasr/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace kasr {

namespace {
thread_local bool g_grad_enabled = true;
}

bool GradMode::enabled() noexcept { return g_grad_enabled; }
void GradMode::set_enabled(bool on) noexcept { g_grad_enabled = on; }

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Conv2d: return "conv2d";
    case OpKind::MaxPool2d: return "maxpool2d";
    case OpKind::LeakyRelu: return "leaky_relu";
    case OpKind::DepthToSpace: return "depth_to_space";
    case OpKind::SpaceToDepth: return "space_to_depth";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::ScalarMul: return "scalar_mul";
    case OpKind::AddScalar: return "add_scalar";
    case OpKind::Abs: return "abs";
    case OpKind::Square: return "square";
    case OpKind::Sqrt: return "sqrt";
    case OpKind::Mean: return "mean";
    case OpKind::Sum: return "sum";
    case OpKind::MinAll: return "min_all";
    case OpKind::MaxAll: return "max_all";
    case OpKind::Clamp: return "clamp";
    case OpKind::ConcatChannels: return "concat_channels";
    case OpKind::FlipH: return "flip_h";
    case OpKind::FlipV: return "flip_v";
    case OpKind::Rot90: return "rot90";
    case OpKind::Reshape: return "reshape";
    case OpKind::Sobel: return "sobel_map";
    case OpKind::MinMaxNormalize: return "minmax_normalize";
    case OpKind::BceWithLogits: return "bce_with_logits";
    case OpKind::Custom: return "custom";
  }
  return "?";
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data) {
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == 0) {
      throw DimensionError("tensor", std::to_string(i), "dimension sizes must be positive, got " + shape_str(shape));
    }
  }
  if (shape.empty()) throw DimensionError("tensor", "rank", "rank-0 shapes are not supported; use {1} for scalars");
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("tensor", "data", "shape " + shape_str(shape) + " holds " +
                                               std::to_string(shape_numel(shape)) + " values, got " +
                                               std::to_string(data.size()));
  }
  impl_ = std::make_shared<detail::TensorStorage<T>>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(const Shape& shape, T value) {
  return BasicTensor(shape, std::vector<T>(shape_numel(shape), value));
}

template <typename T>
BasicTensor<T> BasicTensor<T>::from_op(Shape shape, std::vector<T> data, OpKind kind,
                                       std::vector<BasicTensor> inputs,
                                       std::function<void(std::span<const T>)> backward) {
  BasicTensor out(std::move(shape), std::move(data));
  if (!GradMode::enabled()) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const BasicTensor& t) { return t.defined() && t.requires_grad(); });
  if (!any) return out;
  auto rec = std::make_shared<ComputationRecord<T>>();
  rec->kind = kind;
  rec->inputs = std::move(inputs);
  rec->backward = std::move(backward);
  out.impl_->record = std::move(rec);
  out.impl_->requires_grad = true;
  return out;
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) {
    throw ContractError("item() requires a single-element tensor, got shape " + shape_str(shape()));
  }
  return impl_->data[0];
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::set_requires_grad(bool on) {
  if (!is_leaf()) throw ContractError("set_requires_grad() is only valid on leaf tensors");
  impl_->requires_grad = on;
  if (!on) impl_->grad.clear();
  return *this;
}

template <typename T>
std::span<T> BasicTensor<T>::grad_buffer() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->data.size(), T(0));
  return impl_->grad;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
  return BasicTensor(impl_->shape, impl_->data);
}

template <typename T>
void BasicTensor<T>::backward() const {
  if (numel() != 1) {
    throw ContractError("backward() requires a scalar loss, got shape " + shape_str(shape()));
  }
  if (!requires_grad()) return;

  // Iterative post-order DFS gives a topological order (inputs before outputs).
  using Storage = detail::TensorStorage<T>;
  std::vector<Storage*> order;
  std::unordered_set<Storage*> visited;
  std::vector<std::pair<Storage*, std::size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    const auto& rec = node->record;
    if (rec && next < rec->inputs.size()) {
      Storage* child = rec->inputs[next++].impl_.get();
      if (child && child->requires_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
      continue;
    }
    order.push_back(node);
    stack.pop_back();
  }

  grad_buffer()[0] += T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Storage* node = *it;
    if (node->record && !node->grad.empty()) {
      node->record->backward(std::span<const T>(node->grad));
    }
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace kasr
