#include <string>

#include "kasr/image_ops.hpp"
#include "kasr/ops.hpp"

namespace kasr {

template <typename T>
BasicTensor<T> apply_dihedral(const BasicTensor<T>& img, Dihedral d) {
  const BasicTensor<T> flipped = d.flip ? flip_h(img) : img;
  return d.rotations % 4 == 0 ? flipped : rot90(flipped, d.rotations);
}

template <typename T>
BasicTensor<T> invert_dihedral(const BasicTensor<T>& img, Dihedral d) {
  const BasicTensor<T> unrotated = d.rotations % 4 == 0 ? img : rot90(img, -d.rotations);
  return d.flip ? flip_h(unrotated) : unrotated;
}

template BasicTensor<float> apply_dihedral<float>(const BasicTensor<float>&, Dihedral);
template BasicTensor<double> apply_dihedral<double>(const BasicTensor<double>&, Dihedral);
template BasicTensor<float> invert_dihedral<float>(const BasicTensor<float>&, Dihedral);
template BasicTensor<double> invert_dihedral<double>(const BasicTensor<double>&, Dihedral);

AugmentedPair augment_pair(const Tensor& lr, const Tensor& hr, std::mt19937_64& rng) {
  expect_image_batch(lr, "augment_pair");
  expect_image_batch(hr, "augment_pair");
  const bool aligned = hr.size(2) % lr.size(2) == 0 && hr.size(3) % lr.size(3) == 0 &&
                       hr.size(2) / lr.size(2) == hr.size(3) / lr.size(3);
  if (!aligned) {
    throw DimensionError("augment_pair", "height",
                         "HR " + shape_str(hr.shape()) + " is not an integer multiple of LR " + shape_str(lr.shape()));
  }
  std::uniform_int_distribution<int> pick(0, 7);
  const Dihedral d = Dihedral::from_index(pick(rng));
  return {apply_dihedral(lr, d), apply_dihedral(hr, d), d};
}

Tensor self_ensemble(const ImageModel& model, const Tensor& lr) {
  expect_image_batch(lr, "self_ensemble");
  NoGradGuard no_grad;
  std::vector<double> acc;
  Shape out_shape;
  for (int t = 0; t < 8; ++t) {
    const Dihedral d = Dihedral::from_index(t);
    const Tensor out = invert_dihedral(model(apply_dihedral(lr, d)), d);
    if (t == 0) {
      out_shape = out.shape();
      acc.assign(out.numel(), 0.0);
    } else if (out.shape() != out_shape) {
      throw DimensionError("self_ensemble", "output",
                           "model output " + shape_str(out.shape()) + " differs across transforms from " +
                               shape_str(out_shape));
    }
    const auto v = out.data();
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += v[i];
  }
  std::vector<float> avg(acc.size());
  for (std::size_t i = 0; i < acc.size(); ++i) avg[i] = static_cast<float>(acc[i] / 8.0);
  return Tensor(out_shape, std::move(avg));
}

}  // namespace kasr
