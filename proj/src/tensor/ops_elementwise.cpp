#include <algorithm>
#include <cmath>
#include <string>

#include "kasr/ops.hpp"

namespace kasr {

namespace {

template <typename T>
void require_same_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    const std::size_t n = std::min(a.ndim(), b.ndim());
    std::size_t axis = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (a.size(i) != b.size(i)) {
        axis = i;
        break;
      }
    }
    throw DimensionError(op, axis == n ? std::string("rank") : std::to_string(axis),
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

// out[i] = in[index[i]]; the backward scatters-adds through the same map.
template <typename T>
BasicTensor<T> gather(const BasicTensor<T>& input, Shape out_shape, std::vector<std::size_t> index, OpKind kind) {
  const auto x = input.data();
  std::vector<T> out(index.size());
  for (std::size_t i = 0; i < index.size(); ++i) out[i] = x[index[i]];
  return BasicTensor<T>::from_op(std::move(out_shape), std::move(out), kind, {input},
                                 [input, index = std::move(index)](std::span<const T> grad) {
                                   auto gi = input.grad_buffer();
                                   for (std::size_t i = 0; i < grad.size(); ++i) gi[index[i]] += grad[i];
                                 });
}

template <typename T, typename Fwd, typename Bwd>
BasicTensor<T> unary(const BasicTensor<T>& a, OpKind kind, Fwd fwd, Bwd dfdx) {
  const auto x = a.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  return BasicTensor<T>::from_op(a.shape(), std::move(out), kind, {a}, [a, dfdx](std::span<const T> grad) {
    auto gi = a.grad_buffer();
    const auto xs = a.data();
    for (std::size_t i = 0; i < grad.size(); ++i) gi[i] += grad[i] * dfdx(xs[i]);
  });
}

template <typename T>
std::size_t first_extremum(std::span<const T> x, bool want_max) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < x.size(); ++i) {
    if (want_max ? x[i] > x[best] : x[i] < x[best]) best = i;
  }
  return best;
}

}  // namespace

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "add");
  const auto x = a.data();
  const auto y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return BasicTensor<T>::from_op(a.shape(), std::move(out), OpKind::Add, {a, b}, [a, b](std::span<const T> grad) {
    if (a.requires_grad()) {
      auto ga = a.grad_buffer();
      for (std::size_t i = 0; i < grad.size(); ++i) ga[i] += grad[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad_buffer();
      for (std::size_t i = 0; i < grad.size(); ++i) gb[i] += grad[i];
    }
  });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "sub");
  const auto x = a.data();
  const auto y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - y[i];
  return BasicTensor<T>::from_op(a.shape(), std::move(out), OpKind::Sub, {a, b}, [a, b](std::span<const T> grad) {
    if (a.requires_grad()) {
      auto ga = a.grad_buffer();
      for (std::size_t i = 0; i < grad.size(); ++i) ga[i] += grad[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad_buffer();
      for (std::size_t i = 0; i < grad.size(); ++i) gb[i] -= grad[i];
    }
  });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "mul");
  const auto x = a.data();
  const auto y = b.data();
  std::vector<T> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return BasicTensor<T>::from_op(a.shape(), std::move(out), OpKind::Mul, {a, b}, [a, b](std::span<const T> grad) {
    if (a.requires_grad()) {
      auto ga = a.grad_buffer();
      const auto ys = b.data();
      for (std::size_t i = 0; i < grad.size(); ++i) ga[i] += grad[i] * ys[i];
    }
    if (b.requires_grad()) {
      auto gb = b.grad_buffer();
      const auto xs = a.data();
      for (std::size_t i = 0; i < grad.size(); ++i) gb[i] += grad[i] * xs[i];
    }
  });
}

template <typename T>
BasicTensor<T> scalar_mul(const BasicTensor<T>& a, T s) {
  return unary(a, OpKind::ScalarMul, [s](T v) { return s * v; }, [s](T) { return s; });
}

template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& a, T s) {
  return unary(a, OpKind::AddScalar, [s](T v) { return v + s; }, [](T) { return T(1); });
}

template <typename T>
BasicTensor<T> abs(const BasicTensor<T>& a) {
  return unary(
      a, OpKind::Abs, [](T v) { return std::abs(v); },
      [](T v) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

template <typename T>
BasicTensor<T> square(const BasicTensor<T>& a) {
  return unary(a, OpKind::Square, [](T v) { return v * v; }, [](T v) { return T(2) * v; });
}

template <typename T>
BasicTensor<T> sqrt(const BasicTensor<T>& a) {
  const T eps = static_cast<T>(kSqrtEpsilon);
  return unary(
      a, OpKind::Sqrt, [eps](T v) { return std::sqrt(v + eps); },
      [eps](T v) { return T(0.5) / std::sqrt(v + eps); });
}

template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& a) {
  double acc = 0.0;
  for (T v : a.data()) acc += v;
  return BasicTensor<T>::from_op(Shape{1}, {static_cast<T>(acc)}, OpKind::Sum, {a}, [a](std::span<const T> grad) {
    auto gi = a.grad_buffer();
    for (auto& g : gi) g += grad[0];
  });
}

template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& a) {
  double acc = 0.0;
  for (T v : a.data()) acc += v;
  const double n = static_cast<double>(a.numel());
  return BasicTensor<T>::from_op(Shape{1}, {static_cast<T>(acc / n)}, OpKind::Mean, {a},
                                 [a, n](std::span<const T> grad) {
                                   auto gi = a.grad_buffer();
                                   const T g = static_cast<T>(grad[0] / n);
                                   for (auto& v : gi) v += g;
                                 });
}

template <typename T>
BasicTensor<T> min_all(const BasicTensor<T>& a) {
  const std::size_t at = first_extremum(a.data(), false);
  return BasicTensor<T>::from_op(Shape{1}, {a.data()[at]}, OpKind::MinAll, {a},
                                 [a, at](std::span<const T> grad) { a.grad_buffer()[at] += grad[0]; });
}

template <typename T>
BasicTensor<T> max_all(const BasicTensor<T>& a) {
  const std::size_t at = first_extremum(a.data(), true);
  return BasicTensor<T>::from_op(Shape{1}, {a.data()[at]}, OpKind::MaxAll, {a},
                                 [a, at](std::span<const T> grad) { a.grad_buffer()[at] += grad[0]; });
}

template <typename T>
BasicTensor<T> clamp(const BasicTensor<T>& a, T lo, T hi) {
  if (!(lo <= hi)) throw ContractError("clamp: lower bound exceeds upper bound");
  return unary(
      a, OpKind::Clamp, [lo, hi](T v) { return std::clamp(v, lo, hi); },
      [lo, hi](T v) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <typename T>
BasicTensor<T> concat_channels(const std::vector<BasicTensor<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_channels: no inputs");
  for (const auto& p : parts) expect_image_batch(p, "concat_channels");
  const Shape& s0 = parts[0].shape();
  std::size_t channels = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    for (std::size_t ax : {0, 2, 3}) {
      if (s[ax] != s0[ax]) {
        throw DimensionError("concat_channels", std::to_string(ax), shape_str(s0) + " vs " + shape_str(s));
      }
    }
    channels += s[1];
  }
  const std::size_t plane = s0[2] * s0[3];
  std::vector<T> out(s0[0] * channels * plane);
  std::vector<std::size_t> offsets;
  std::size_t c_off = 0;
  for (const auto& p : parts) {
    offsets.push_back(c_off);
    const std::size_t pc = p.size(1);
    for (std::size_t b = 0; b < s0[0]; ++b) {
      std::copy_n(p.data().begin() + static_cast<std::ptrdiff_t>(b * pc * plane), pc * plane,
                  out.begin() + static_cast<std::ptrdiff_t>((b * channels + c_off) * plane));
    }
    c_off += pc;
  }
  return BasicTensor<T>::from_op(Shape{s0[0], channels, s0[2], s0[3]}, std::move(out), OpKind::ConcatChannels,
                                 parts, [parts, offsets, channels, plane](std::span<const T> grad) {
                                   for (std::size_t k = 0; k < parts.size(); ++k) {
                                     if (!parts[k].requires_grad()) continue;
                                     auto gi = parts[k].grad_buffer();
                                     const std::size_t pc = parts[k].size(1);
                                     const std::size_t batch = parts[k].size(0);
                                     for (std::size_t b = 0; b < batch; ++b) {
                                       for (std::size_t i = 0; i < pc * plane; ++i) {
                                         gi[b * pc * plane + i] += grad[(b * channels + offsets[k]) * plane + i];
                                       }
                                     }
                                   }
                                 });
}

template <typename T>
BasicTensor<T> flip_h(const BasicTensor<T>& a) {
  if (a.ndim() < 2) throw DimensionError("flip_h", "rank", "need at least 2 axes");
  const std::size_t w = a.size(a.ndim() - 1);
  std::vector<std::size_t> idx(a.numel());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const std::size_t x = i % w;
    idx[i] = i - x + (w - 1 - x);
  }
  return gather(a, a.shape(), std::move(idx), OpKind::FlipH);
}

template <typename T>
BasicTensor<T> flip_v(const BasicTensor<T>& a) {
  if (a.ndim() < 2) throw DimensionError("flip_v", "rank", "need at least 2 axes");
  const std::size_t w = a.size(a.ndim() - 1);
  const std::size_t h = a.size(a.ndim() - 2);
  std::vector<std::size_t> idx(a.numel());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const std::size_t x = i % w;
    const std::size_t y = (i / w) % h;
    const std::size_t base = i - x - y * w;
    idx[i] = base + (h - 1 - y) * w + x;
  }
  return gather(a, a.shape(), std::move(idx), OpKind::FlipV);
}

template <typename T>
BasicTensor<T> rot90(const BasicTensor<T>& a, int k) {
  if (a.ndim() < 2) throw DimensionError("rot90", "rank", "need at least 2 axes");
  const int turns = ((k % 4) + 4) % 4;
  const std::size_t h = a.size(a.ndim() - 2);
  const std::size_t w = a.size(a.ndim() - 1);
  Shape out_shape = a.shape();
  if (turns % 2 == 1) std::swap(out_shape[a.ndim() - 2], out_shape[a.ndim() - 1]);
  const std::size_t oh = out_shape[a.ndim() - 2];
  const std::size_t ow = out_shape[a.ndim() - 1];
  std::vector<std::size_t> idx(a.numel());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const std::size_t x = i % ow;
    const std::size_t y = (i / ow) % oh;
    const std::size_t base = (i / (ow * oh)) * (h * w);
    std::size_t sy = 0, sx = 0;
    // Counter-clockwise: out(y, x) = in(x, w-1-y) for one turn.
    switch (turns) {
      case 0: sy = y; sx = x; break;
      case 1: sy = x; sx = w - 1 - y; break;
      case 2: sy = h - 1 - y; sx = w - 1 - x; break;
      case 3: sy = h - 1 - x; sx = y; break;
    }
    idx[i] = base + sy * w + sx;
  }
  return gather(a, std::move(out_shape), std::move(idx), OpKind::Rot90);
}

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& a, const Shape& shape) {
  if (shape_numel(shape) != a.numel()) {
    throw DimensionError("reshape", "numel", shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  std::vector<std::size_t> idx(a.numel());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return gather(a, shape, std::move(idx), OpKind::Reshape);
}

template <typename T>
BasicTensor<T> depth_to_space(const BasicTensor<T>& input, std::size_t block) {
  expect_image_batch(input, "depth_to_space");
  if (block == 0) throw ContractError("depth_to_space: block must be positive");
  const Shape& s = input.shape();
  const std::size_t rr = block * block;
  if (s[1] % rr != 0) {
    throw DimensionError("depth_to_space", "channels",
                         std::to_string(s[1]) + " channels not divisible by block^2 = " + std::to_string(rr));
  }
  const std::size_t oc = s[1] / rr, oh = s[2] * block, ow = s[3] * block;
  std::vector<std::size_t> idx(input.numel());
  std::size_t o = 0;
  for (std::size_t b = 0; b < s[0]; ++b) {
    for (std::size_t c = 0; c < oc; ++c) {
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x, ++o) {
          const std::size_t ic = c * rr + (y % block) * block + (x % block);
          idx[o] = ((b * s[1] + ic) * s[2] + y / block) * s[3] + x / block;
        }
      }
    }
  }
  return gather(input, Shape{s[0], oc, oh, ow}, std::move(idx), OpKind::DepthToSpace);
}

template <typename T>
BasicTensor<T> space_to_depth(const BasicTensor<T>& input, std::size_t block) {
  expect_image_batch(input, "space_to_depth");
  if (block == 0) throw ContractError("space_to_depth: block must be positive");
  const Shape& s = input.shape();
  if (s[2] % block != 0 || s[3] % block != 0) {
    throw DimensionError("space_to_depth", s[2] % block ? "height" : "width",
                         shape_str(s) + " not divisible by block " + std::to_string(block));
  }
  const std::size_t rr = block * block;
  const std::size_t oc = s[1] * rr, oh = s[2] / block, ow = s[3] / block;
  std::vector<std::size_t> idx(input.numel());
  std::size_t o = 0;
  for (std::size_t b = 0; b < s[0]; ++b) {
    for (std::size_t c = 0; c < oc; ++c) {
      const std::size_t src_c = c / rr;
      const std::size_t i = (c % rr) / block;
      const std::size_t j = c % block;
      for (std::size_t y = 0; y < oh; ++y) {
        for (std::size_t x = 0; x < ow; ++x, ++o) {
          idx[o] = ((b * s[1] + src_c) * s[2] + y * block + i) * s[3] + x * block + j;
        }
      }
    }
  }
  return gather(input, Shape{s[0], oc, oh, ow}, std::move(idx), OpKind::SpaceToDepth);
}

#define KASR_INSTANTIATE_EW(T)                                                                   \
  template BasicTensor<T> add<T>(const BasicTensor<T>&, const BasicTensor<T>&);                  \
  template BasicTensor<T> sub<T>(const BasicTensor<T>&, const BasicTensor<T>&);                  \
  template BasicTensor<T> mul<T>(const BasicTensor<T>&, const BasicTensor<T>&);                  \
  template BasicTensor<T> scalar_mul<T>(const BasicTensor<T>&, T);                               \
  template BasicTensor<T> add_scalar<T>(const BasicTensor<T>&, T);                               \
  template BasicTensor<T> abs<T>(const BasicTensor<T>&);                                         \
  template BasicTensor<T> square<T>(const BasicTensor<T>&);                                      \
  template BasicTensor<T> sqrt<T>(const BasicTensor<T>&);                                        \
  template BasicTensor<T> sum<T>(const BasicTensor<T>&);                                         \
  template BasicTensor<T> mean<T>(const BasicTensor<T>&);                                        \
  template BasicTensor<T> min_all<T>(const BasicTensor<T>&);                                     \
  template BasicTensor<T> max_all<T>(const BasicTensor<T>&);                                     \
  template BasicTensor<T> clamp<T>(const BasicTensor<T>&, T, T);                                 \
  template BasicTensor<T> concat_channels<T>(const std::vector<BasicTensor<T>>&);                \
  template BasicTensor<T> flip_h<T>(const BasicTensor<T>&);                                      \
  template BasicTensor<T> flip_v<T>(const BasicTensor<T>&);                                      \
  template BasicTensor<T> rot90<T>(const BasicTensor<T>&, int);                                  \
  template BasicTensor<T> reshape<T>(const BasicTensor<T>&, const Shape&);                       \
  template BasicTensor<T> depth_to_space<T>(const BasicTensor<T>&, std::size_t);                 \
  template BasicTensor<T> space_to_depth<T>(const BasicTensor<T>&, std::size_t);

KASR_INSTANTIATE_EW(float)
KASR_INSTANTIATE_EW(double)

}  // namespace kasr
