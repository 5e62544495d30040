#include <cmath>
#include <string>

#include "kasr/optim.hpp"

namespace kasr {

namespace {

template <typename T>
bool all_finite(const std::vector<std::vector<T>>& grads) {
  for (const auto& g : grads) {
    for (T x : g) {
      if (!std::isfinite(x)) return false;
    }
  }
  return true;
}

}  // namespace

template <typename T>
bool adam_step(std::vector<BasicTensor<T>>& params, const std::vector<std::vector<T>>& grads, AdamState& state,
               double lr) {
  if (params.size() != grads.size()) {
    throw ContractError("adam_step: " + std::to_string(params.size()) + " parameters but " +
                        std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].numel() != grads[i].size()) {
      throw ContractError("adam_step: gradient " + std::to_string(i) + " has " + std::to_string(grads[i].size()) +
                          " elements, parameter has " + std::to_string(params[i].numel()));
    }
  }
  if (state.m.empty() && state.t == 0) {
    for (const auto& p : params) {
      state.m.emplace_back(p.numel(), 0.0);
      state.v.emplace_back(p.numel(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ContractError("adam_step: state belongs to a different parameter set");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i].numel()) throw ContractError("adam_step: moment shape mismatch");
  }
  if (!all_finite(grads)) {
    ++state.skipped;
    return false;
  }

  ++state.t;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = grads[i][j];
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] = static_cast<T>(static_cast<double>(p[j]) - lr * mhat / (std::sqrt(vhat) + state.eps));
    }
  }
  return true;
}

template <typename T>
bool adam_step(std::vector<BasicTensor<T>>& params, AdamState& state, double lr) {
  std::vector<std::vector<T>> grads;
  grads.reserve(params.size());
  for (const auto& p : params) {
    if (p.has_grad()) {
      grads.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      grads.emplace_back(p.numel(), T(0));
    }
  }
  return adam_step(params, grads, state, lr);
}

template <typename T>
double clip_grad_norm(std::vector<BasicTensor<T>>& params, double max_norm) {
  double sq = 0.0;
  for (const auto& p : params) {
    for (T g : p.grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm) || norm <= max_norm) return norm;
  const double factor = max_norm / norm;
  for (auto& p : params) {
    for (T& g : p.mutable_grad()) g = static_cast<T>(g * factor);
  }
  return norm;
}

template bool adam_step<float>(std::vector<Tensor>&, const std::vector<std::vector<float>>&, AdamState&, double);
template bool adam_step<double>(std::vector<Tensor64>&, const std::vector<std::vector<double>>&, AdamState&, double);
template bool adam_step<float>(std::vector<Tensor>&, AdamState&, double);
template bool adam_step<double>(std::vector<Tensor64>&, AdamState&, double);
template double clip_grad_norm<float>(std::vector<Tensor>&, double);
template double clip_grad_norm<double>(std::vector<Tensor64>&, double);

}  // namespace kasr
