#pragma once

// Differentiable tensor operations. Image-shaped arguments use the
// batch x channel x height x width layout. Binary ops require equal shapes;
// the only broadcasting is against a scalar.

#include <vector>

#include "kasr/tensor.hpp"

namespace kasr {

/// Throws DimensionError unless `t` is 4D.
template <typename T>
void expect_image_batch(const BasicTensor<T>& t, const char* op);

template <typename T>
BasicTensor<T> conv2d(const BasicTensor<T>& input, const BasicTensor<T>& weight, const BasicTensor<T>& bias,
                      std::size_t stride = 1, std::size_t padding = 0);

/// Gradient goes to the first maximal element of each window (row-major).
template <typename T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& input, std::size_t window, std::size_t stride);

template <typename T>
BasicTensor<T> leaky_relu(const BasicTensor<T>& input, T slope = T(0.2));

/// (B, C*r*r, H, W) -> (B, C, H*r, W*r); channel c*r*r + i*r + j lands at (y*r+i, x*r+j).
template <typename T>
BasicTensor<T> depth_to_space(const BasicTensor<T>& input, std::size_t block);

/// Exact inverse of depth_to_space.
template <typename T>
BasicTensor<T> space_to_depth(const BasicTensor<T>& input, std::size_t block);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> scalar_mul(const BasicTensor<T>& a, T s);
template <typename T>
BasicTensor<T> add_scalar(const BasicTensor<T>& a, T s);
template <typename T>
BasicTensor<T> abs(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> square(const BasicTensor<T>& a);

inline constexpr double kSqrtEpsilon = 1e-12;

/// sqrt(a + 1e-12).
template <typename T>
BasicTensor<T> sqrt(const BasicTensor<T>& a);

/// Reductions accumulate in double and return shape {1}.
template <typename T>
BasicTensor<T> sum(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> mean(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> min_all(const BasicTensor<T>& a);
template <typename T>
BasicTensor<T> max_all(const BasicTensor<T>& a);

/// Gradient passes where lo <= x <= hi.
template <typename T>
BasicTensor<T> clamp(const BasicTensor<T>& a, T lo, T hi);

template <typename T>
BasicTensor<T> concat_channels(const std::vector<BasicTensor<T>>& parts);

/// Mirror along width.
template <typename T>
BasicTensor<T> flip_h(const BasicTensor<T>& a);
/// Mirror along height.
template <typename T>
BasicTensor<T> flip_v(const BasicTensor<T>& a);
/// Counter-clockwise rotation by k quarter turns over the last two axes.
template <typename T>
BasicTensor<T> rot90(const BasicTensor<T>& a, int k = 1);

template <typename T>
BasicTensor<T> reshape(const BasicTensor<T>& a, const Shape& shape);

/// Mean binary cross-entropy of logits against a constant target in [0,1],
/// evaluated in the overflow-free form max(z,0) - z*t + log1p(exp(-|z|)).
template <typename T>
BasicTensor<T> bce_with_logits(const BasicTensor<T>& logits, T target);

}  // namespace kasr
