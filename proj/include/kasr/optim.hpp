#pragma once

#include <cstdint>
#include <vector>

#include "kasr/tensor.hpp"

namespace kasr {

/// Adam moments, kept in double. Sized on the first step.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;
  std::uint64_t skipped = 0;  // steps refused because of non-finite gradients
};

/// One bias-corrected Adam update of `params` with explicit gradients.
/// Returns false (and leaves everything but `skipped` untouched) when a
/// gradient is non-finite.
template <typename T>
bool adam_step(std::vector<BasicTensor<T>>& params, const std::vector<std::vector<T>>& grads, AdamState& state,
               double lr);

/// Same, reading each parameter's accumulated gradient (missing = zero).
template <typename T>
bool adam_step(std::vector<BasicTensor<T>>& params, AdamState& state, double lr);

/// Rescales the accumulated gradients so their joint L2 norm is at most
/// `max_norm`. Returns the norm before clipping (NaN/inf are left alone).
template <typename T>
double clip_grad_norm(std::vector<BasicTensor<T>>& params, double max_norm);

}  // namespace kasr
