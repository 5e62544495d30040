#pragma once

#include <utility>

#include "kasr/nets.hpp"
#include "kasr/tensor.hpp"

namespace kasr {

/// Weights of the SR and degradation objectives.
struct LossConfig {
  int p = 1;            // 1: mean absolute error, 2: mean squared error
  double omega = 0.5;   // HFSO weight in the SR loss
  double beta = 1.0;    // adversarial SR-error weight in the KANS loss
  double gamma = 0.5;   // discriminator term weight in the KANS loss
  bool detach_hf_mask = false;  // treat the SR edge mask as a constant weight map

  void validate() const;
};

/// mean(|a - b|^p) for p in {1, 2}.
template <typename T>
BasicTensor<T> pnorm_mean(const BasicTensor<T>& a, const BasicTensor<T>& b, int p);

template <typename T>
BasicTensor<T> loss_rec(const BasicTensor<T>& sr, const BasicTensor<T>& hr, const LossConfig& cfg);

/// Edge-weighted reconstruction: compares minmax(sobel(x)) * x for SR and HR.
template <typename T>
BasicTensor<T> loss_hfso(const BasicTensor<T>& sr, const BasicTensor<T>& hr, const LossConfig& cfg);

template <typename T>
BasicTensor<T> loss_sr(const BasicTensor<T>& sr, const BasicTensor<T>& hr, const LossConfig& cfg);

/// BCE(d(real), 1) + BCE(d(fake), 0), with `fake` detached.
template <typename T>
BasicTensor<T> disc_critic_loss(const BasicNetwork<T>& d, const BasicTensor<T>& real_lr,
                                const BasicTensor<T>& fake_lr);

/// Non-saturating generator term BCE(d(fake), 1); gradient reaches the
/// generator only through `fake_lr`.
template <typename T>
BasicTensor<T> disc_generator_loss(const BasicNetwork<T>& d, const BasicTensor<T>& fake_lr);

/// Returns (critic loss, generator term) for the current discriminator.
template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> loss_disc(const BasicNetwork<T>& d, const BasicTensor<T>& real_lr,
                                                    const BasicTensor<T>& fake_lr);

/// pnorm(fake_lr, real_lr) - beta * pnorm(sr, hr) + gamma * gen_term.
template <typename T>
BasicTensor<T> loss_kans(const BasicTensor<T>& fake_lr, const BasicTensor<T>& real_lr, const BasicTensor<T>& sr,
                         const BasicTensor<T>& hr, const BasicTensor<T>& gen_term, const LossConfig& cfg);

}  // namespace kasr
