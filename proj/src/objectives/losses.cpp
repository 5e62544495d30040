#include <string>

#include "kasr/image_ops.hpp"
#include "kasr/objectives.hpp"
#include "kasr/ops.hpp"

namespace kasr {

void LossConfig::validate() const {
  if (p != 1 && p != 2) throw ContractError("loss p-norm must be 1 or 2, got " + std::to_string(p));
  if (!(omega >= 0.0) || !(beta >= 0.0) || !(gamma >= 0.0)) {
    throw ContractError("loss weights omega, beta, gamma must be non-negative");
  }
}

template <typename T>
BasicTensor<T> pnorm_mean(const BasicTensor<T>& a, const BasicTensor<T>& b, int p) {
  if (p != 1 && p != 2) throw ContractError("pnorm_mean: p must be 1 or 2, got " + std::to_string(p));
  const BasicTensor<T> diff = sub(a, b);
  return mean(p == 1 ? abs(diff) : square(diff));
}

template <typename T>
BasicTensor<T> loss_rec(const BasicTensor<T>& sr, const BasicTensor<T>& hr, const LossConfig& cfg) {
  return pnorm_mean(sr, hr, cfg.p);
}

template <typename T>
BasicTensor<T> loss_hfso(const BasicTensor<T>& sr, const BasicTensor<T>& hr, const LossConfig& cfg) {
  const BasicTensor<T> hr_const = hr.requires_grad() ? hr.detach() : hr;
  const BasicTensor<T> hr_mask = minmax_normalize(sobel_map(hr_const));
  BasicTensor<T> sr_mask = minmax_normalize(sobel_map(sr));
  if (cfg.detach_hf_mask) sr_mask = sr_mask.detach();
  return pnorm_mean(mul(hr_mask, hr_const), mul(sr_mask, sr), cfg.p);
}

template <typename T>
BasicTensor<T> loss_sr(const BasicTensor<T>& sr, const BasicTensor<T>& hr, const LossConfig& cfg) {
  const BasicTensor<T> rec = loss_rec(sr, hr, cfg);
  if (cfg.omega == 0.0) return rec;
  return add(rec, scalar_mul(loss_hfso(sr, hr, cfg), static_cast<T>(cfg.omega)));
}

template <typename T>
BasicTensor<T> disc_critic_loss(const BasicNetwork<T>& d, const BasicTensor<T>& real_lr,
                                const BasicTensor<T>& fake_lr) {
  if (real_lr.shape() != fake_lr.shape()) {
    throw DimensionError("loss_disc", "input", shape_str(real_lr.shape()) + " vs " + shape_str(fake_lr.shape()));
  }
  const BasicTensor<T> real_term = bce_with_logits(d.forward(real_lr), T(1));
  const BasicTensor<T> fake_term = bce_with_logits(d.forward(fake_lr.detach()), T(0));
  return add(real_term, fake_term);
}

template <typename T>
BasicTensor<T> disc_generator_loss(const BasicNetwork<T>& d, const BasicTensor<T>& fake_lr) {
  return bce_with_logits(d.forward(fake_lr), T(1));
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> loss_disc(const BasicNetwork<T>& d, const BasicTensor<T>& real_lr,
                                                    const BasicTensor<T>& fake_lr) {
  return {disc_critic_loss(d, real_lr, fake_lr), disc_generator_loss(d, fake_lr)};
}

template <typename T>
BasicTensor<T> loss_kans(const BasicTensor<T>& fake_lr, const BasicTensor<T>& real_lr, const BasicTensor<T>& sr,
                         const BasicTensor<T>& hr, const BasicTensor<T>& gen_term, const LossConfig& cfg) {
  BasicTensor<T> total = pnorm_mean(fake_lr, real_lr, cfg.p);
  if (cfg.beta != 0.0) total = sub(total, scalar_mul(pnorm_mean(sr, hr, cfg.p), static_cast<T>(cfg.beta)));
  if (cfg.gamma != 0.0) total = add(total, scalar_mul(gen_term, static_cast<T>(cfg.gamma)));
  return total;
}

#define KASR_INSTANTIATE_LOSSES(T)                                                                               \
  template BasicTensor<T> pnorm_mean<T>(const BasicTensor<T>&, const BasicTensor<T>&, int);                      \
  template BasicTensor<T> loss_rec<T>(const BasicTensor<T>&, const BasicTensor<T>&, const LossConfig&);          \
  template BasicTensor<T> loss_hfso<T>(const BasicTensor<T>&, const BasicTensor<T>&, const LossConfig&);         \
  template BasicTensor<T> loss_sr<T>(const BasicTensor<T>&, const BasicTensor<T>&, const LossConfig&);           \
  template BasicTensor<T> disc_critic_loss<T>(const BasicNetwork<T>&, const BasicTensor<T>&,                     \
                                              const BasicTensor<T>&);                                            \
  template BasicTensor<T> disc_generator_loss<T>(const BasicNetwork<T>&, const BasicTensor<T>&);                 \
  template std::pair<BasicTensor<T>, BasicTensor<T>> loss_disc<T>(const BasicNetwork<T>&, const BasicTensor<T>&, \
                                                                  const BasicTensor<T>&);                        \
  template BasicTensor<T> loss_kans<T>(const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&,      \
                                       const BasicTensor<T>&, const BasicTensor<T>&, const LossConfig&);

KASR_INSTANTIATE_LOSSES(float)
KASR_INSTANTIATE_LOSSES(double)

}  // namespace kasr
