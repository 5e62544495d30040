#include <cmath>
#include <string>

#include "kasr/kernels.hpp"
#include "kasr/ops.hpp"

namespace kasr {

template <typename T>
void expect_image_batch(const BasicTensor<T>& t, const char* op) {
  if (!t.defined() || t.ndim() != 4) {
    throw DimensionError(op, "rank",
                         "expected a batch x channel x height x width tensor, got shape " +
                             (t.defined() ? shape_str(t.shape()) : std::string("<undefined>")));
  }
}

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                      std::size_t stride, std::size_t padding) {
  expect_image_batch(input, "conv2d");
  if (weight.ndim() != 4) throw DimensionError("conv2d", "weight", "weight must be 4D, got " + shape_str(weight.shape()));
  const Shape& is = input.shape();
  const Shape& ws = weight.shape();
  if (is[1] != ws[1]) {
    throw DimensionError("conv2d", "channels",
                         "input has " + std::to_string(is[1]) + " channels but weight expects " + std::to_string(ws[1]));
  }
  if (bias.ndim() != 1 || bias.size(0) != ws[0]) {
    throw DimensionError("conv2d", "bias",
                         "bias shape " + shape_str(bias.shape()) + " does not match " + std::to_string(ws[0]) +
                             " output channels");
  }
  const auto g = kernels::Conv2dGeometry::make(is[0], is[1], is[2], is[3], ws[0], ws[2], ws[3], stride, padding);
  std::vector<T> out(g.batch * g.out_c * g.out_plane());
  kernels::conv2d_forward<T>(g, input.data(), weight.data(), bias.data(), out);
  return BasicTensor<T>::from_op(
      Shape{g.batch, g.out_c, g.out_h, g.out_w}, std::move(out), OpKind::Conv2d, {input, weight, bias},
      [input, weight, bias, g](std::span<const T> grad) {
        std::span<T> gi = input.requires_grad() ? input.grad_buffer() : std::span<T>{};
        std::span<T> gw = weight.requires_grad() ? weight.grad_buffer() : std::span<T>{};
        std::span<T> gb = bias.requires_grad() ? bias.grad_buffer() : std::span<T>{};
        kernels::conv2d_backward<T>(g, input.data(), weight.data(), grad, gi, gw, gb);
      });
}

template <typename T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& input, std::size_t window, std::size_t stride) {
  expect_image_batch(input, "maxpool2d");
  const Shape& s = input.shape();
  const auto g = kernels::PoolGeometry::make(s[0] * s[1], s[2], s[3], window, stride);
  const std::size_t n = g.planes * g.out_h * g.out_w;
  std::vector<T> out(n);
  std::vector<std::size_t> argmax(n);
  kernels::maxpool_forward<T>(g, input.data(), out, argmax);
  return BasicTensor<T>::from_op(Shape{s[0], s[1], g.out_h, g.out_w}, std::move(out), OpKind::MaxPool2d, {input},
                                 [input, argmax = std::move(argmax)](std::span<const T> grad) {
                                   auto gi = input.grad_buffer();
                                   for (std::size_t o = 0; o < grad.size(); ++o) gi[argmax[o]] += grad[o];
                                 });
}

template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& input, T slope) {
  if (!std::isfinite(slope)) throw ContractError("leaky_relu: slope must be finite");
  const auto x = input.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T(0) ? x[i] : slope * x[i];
  return BasicTensor<T>::from_op(input.shape(), std::move(out), OpKind::LeakyRelu, {input},
                                 [input, slope](std::span<const T> grad) {
                                   auto gi = input.grad_buffer();
                                   const auto xs = input.data();
                                   for (std::size_t i = 0; i < grad.size(); ++i) {
                                     gi[i] += xs[i] > T(0) ? grad[i] : slope * grad[i];
                                   }
                                 });
}

template <typename T>
BasicTensor<T> bce_with_logits(const BasicTensor<T>& logits, T target) {
  if (!(target >= T(0) && target <= T(1))) throw ContractError("bce_with_logits: target must lie in [0,1]");
  const auto z = logits.data();
  double acc = 0.0;
  for (T zi : z) {
    const double zd = zi;
    acc += std::max(zd, 0.0) - zd * target + std::log1p(std::exp(-std::abs(zd)));
  }
  const double n = static_cast<double>(z.size());
  return BasicTensor<T>::from_op(Shape{1}, {static_cast<T>(acc / n)}, OpKind::BceWithLogits, {logits},
                                 [logits, target, n](std::span<const T> grad) {
                                   auto gi = logits.grad_buffer();
                                   const auto zs = logits.data();
                                   const double g = grad[0] / n;
                                   for (std::size_t i = 0; i < zs.size(); ++i) {
                                     const double zd = zs[i];
                                     const double sig = zd >= 0 ? 1.0 / (1.0 + std::exp(-zd))
                                                                : std::exp(zd) / (1.0 + std::exp(zd));
                                     gi[i] += static_cast<T>(g * (sig - target));
                                   }
                                 });
}

#define KASR_INSTANTIATE_NN(T)                                                                                \
  template void expect_image_batch<T>(const BasicTensor<T>&, const char*);                                    \
  template BasicTensor<T> conv2d<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,      \
                                    std::size_t, std::size_t);                                                \
  template BasicTensor<T> maxpool2d<T>(const BasicTensor<T>&, std::size_t, std::size_t);                      \
  template BasicTensor<T> leaky_relu<T>(const BasicTensor<T>&, T);                                            \
  template BasicTensor<T> bce_with_logits<T>(const BasicTensor<T>&, T);

KASR_INSTANTIATE_NN(float)
KASR_INSTANTIATE_NN(double)

}  // namespace kasr
