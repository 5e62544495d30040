#include <cmath>
#include <cstring>
#include <random>
#include <string>

#include "kasr/nets.hpp"
#include "kasr/ops.hpp"

namespace kasr {

const char* net_kind_name(NetKind kind) {
  switch (kind) {
    case NetKind::Kans: return "kans";
    case NetKind::Sr: return "sr";
    case NetKind::Discriminator: return "discriminator";
  }
  return "?";
}

NetKind parse_net_kind(const std::string& name) {
  if (name == "kans") return NetKind::Kans;
  if (name == "sr") return NetKind::Sr;
  if (name == "discriminator") return NetKind::Discriminator;
  throw ContractError("unknown network kind '" + name + "'");
}

namespace {

template <typename T>
Layer<T> conv_layer(std::string name, std::size_t in_c, std::size_t out_c, std::size_t kernel,
                    std::size_t stride = 1, std::size_t pad = 1) {
  Layer<T> l;
  l.kind = LayerKind::Conv;
  l.name = std::move(name);
  l.in_c = in_c;
  l.out_c = out_c;
  l.kernel = kernel;
  l.stride = stride;
  l.pad = pad;
  l.weight = BasicTensor<T>::zeros({out_c, in_c, kernel, kernel});
  l.bias = BasicTensor<T>::zeros({out_c});
  l.weight.set_requires_grad(true);
  l.bias.set_requires_grad(true);
  return l;
}

template <typename T>
Layer<T> act_layer(std::string name, double slope) {
  Layer<T> l;
  l.kind = LayerKind::LeakyRelu;
  l.name = std::move(name);
  l.slope = static_cast<T>(slope);
  return l;
}

template <typename T>
Layer<T> pool_layer(std::string name, std::size_t window) {
  Layer<T> l;
  l.kind = LayerKind::MaxPool;
  l.name = std::move(name);
  l.kernel = window;
  l.stride = window;
  return l;
}

template <typename T>
Layer<T> shuffle_layer(std::string name, std::size_t block) {
  Layer<T> l;
  l.kind = LayerKind::DepthToSpace;
  l.name = std::move(name);
  l.block = block;
  return l;
}

template <typename T>
Layer<T> skip_layer(LayerKind kind, std::size_t slot) {
  Layer<T> l;
  l.kind = kind;
  l.name = (kind == LayerKind::SaveSkip ? "save" : "add") + std::to_string(slot);
  l.slot = slot;
  return l;
}

}  // namespace

template <typename T>
BasicNetwork<T>::BasicNetwork(std::string name, NetSpec spec, std::vector<Layer<T>> layers)
    : name_(std::move(name)), spec_(spec), layers_(std::move(layers)) {
  for (const auto& l : layers_) {
    if (l.kind == LayerKind::SaveSkip || l.kind == LayerKind::AddSkip) slots_ = std::max(slots_, l.slot + 1);
  }
}

template <typename T>
BasicTensor<T> BasicNetwork<T>::forward(const BasicTensor<T>& x) const {
  expect_image_batch(x, "network forward");
  if (spec_.kind == NetKind::Kans) {
    // Pooling would floor silently; the result must line up with the LR grid.
    for (std::size_t ax : {2u, 3u}) {
      if (x.size(ax) % spec_.scale != 0) {
        throw DimensionError(name_, ax == 2 ? "height" : "width",
                             std::to_string(x.size(ax)) + " is not divisible by scale " +
                                 std::to_string(spec_.scale));
      }
    }
  }
  std::vector<BasicTensor<T>> saved(slots_);
  BasicTensor<T> h = x;
  for (const auto& l : layers_) {
    switch (l.kind) {
      case LayerKind::Conv: h = conv2d(h, l.weight, l.bias, l.stride, l.pad); break;
      case LayerKind::LeakyRelu: h = leaky_relu(h, l.slope); break;
      case LayerKind::MaxPool: h = maxpool2d(h, l.kernel, l.stride); break;
      case LayerKind::DepthToSpace: h = depth_to_space(h, l.block); break;
      case LayerKind::SaveSkip: saved[l.slot] = h; break;
      case LayerKind::AddSkip: h = add(h, saved[l.slot]); break;
    }
  }
  return h;
}

template <typename T>
std::vector<typename BasicNetwork<T>::Parameter> BasicNetwork<T>::parameters() const {
  std::vector<Parameter> out;
  for (const auto& l : layers_) {
    if (l.kind != LayerKind::Conv) continue;
    out.push_back({l.name + ".weight", l.weight});
    out.push_back({l.name + ".bias", l.bias});
  }
  return out;
}

template <typename T>
std::size_t BasicNetwork<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

template <typename T>
void BasicNetwork<T>::set_trainable(bool on) {
  for (auto& p : parameters()) p.tensor.set_requires_grad(on);
}

template <typename T>
void BasicNetwork<T>::clear_grads() {
  for (auto& p : parameters()) p.tensor.clear_grad();
}

template <typename T>
BasicNetwork<T> BasicNetwork<T>::clone() const {
  BasicNetwork copy = *this;
  for (auto& l : copy.layers_) {
    if (l.kind != LayerKind::Conv) continue;
    const bool trainable = l.weight.requires_grad();
    l.weight = l.weight.detach();
    l.bias = l.bias.detach();
    l.weight.set_requires_grad(trainable);
    l.bias.set_requires_grad(trainable);
  }
  return copy;
}

template <typename T>
BasicNetwork<T> build_kans_net(std::size_t scale, std::size_t hidden, double slope) {
  if (scale < 1 || scale > 4) {
    throw ContractError("build_kans_net: scale must be one of 1, 2, 3, 4; got " + std::to_string(scale));
  }
  if (hidden == 0) throw ContractError("build_kans_net: hidden must be at least 1");
  std::vector<Layer<T>> layers;
  layers.push_back(conv_layer<T>("conv1", 3, hidden, 3));
  layers.push_back(act_layer<T>("act1", slope));
  layers.push_back(conv_layer<T>("conv2", hidden, hidden, 3));
  layers.push_back(act_layer<T>("act2", slope));
  if (scale == 3) {
    layers.push_back(pool_layer<T>("pool1", 3));
  } else {
    for (std::size_t s = scale, i = 1; s > 1; s /= 2, ++i) layers.push_back(pool_layer<T>("pool" + std::to_string(i), 2));
  }
  layers.push_back(conv_layer<T>("conv3", hidden, 3, 3));
  return BasicNetwork<T>("kans", NetSpec{NetKind::Kans, scale, hidden, 0, slope}, std::move(layers));
}

template <typename T>
BasicNetwork<T> build_sr_net(std::size_t scale, std::size_t features, std::size_t blocks, double slope) {
  if (scale < 2 || scale > 4) {
    throw ContractError("build_sr_net: scale must be one of 2, 3, 4; got " + std::to_string(scale));
  }
  if (features == 0) throw ContractError("build_sr_net: features must be at least 1");
  std::vector<Layer<T>> layers;
  layers.push_back(conv_layer<T>("head", 3, features, 3));
  layers.push_back(skip_layer<T>(LayerKind::SaveSkip, 0));
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::string p = "block" + std::to_string(b);
    layers.push_back(skip_layer<T>(LayerKind::SaveSkip, 1));
    layers.push_back(conv_layer<T>(p + ".conv1", features, features, 3));
    layers.push_back(act_layer<T>(p + ".act", slope));
    layers.push_back(conv_layer<T>(p + ".conv2", features, features, 3));
    layers.push_back(skip_layer<T>(LayerKind::AddSkip, 1));
  }
  layers.push_back(skip_layer<T>(LayerKind::AddSkip, 0));
  if (scale == 4) {
    layers.push_back(conv_layer<T>("up1", features, features * 4, 3));
    layers.push_back(shuffle_layer<T>("shuffle1", 2));
    layers.push_back(conv_layer<T>("up2", features, features * 4, 3));
    layers.push_back(shuffle_layer<T>("shuffle2", 2));
  } else {
    layers.push_back(conv_layer<T>("up1", features, features * scale * scale, 3));
    layers.push_back(shuffle_layer<T>("shuffle1", scale));
  }
  layers.push_back(conv_layer<T>("tail", features, 3, 3));
  return BasicNetwork<T>("sr", NetSpec{NetKind::Sr, scale, features, blocks, slope}, std::move(layers));
}

template <typename T>
BasicNetwork<T> build_discriminator(std::size_t base, double slope) {
  if (base == 0) throw ContractError("build_discriminator: base must be at least 1");
  std::vector<Layer<T>> layers;
  layers.push_back(conv_layer<T>("conv1", 3, base, 4, 2, 1));
  layers.push_back(act_layer<T>("act1", slope));
  layers.push_back(conv_layer<T>("conv2", base, 2 * base, 4, 2, 1));
  layers.push_back(act_layer<T>("act2", slope));
  layers.push_back(conv_layer<T>("conv3", 2 * base, 1, 3, 1, 1));
  return BasicNetwork<T>("discriminator", NetSpec{NetKind::Discriminator, 1, base, 0, slope}, std::move(layers));
}

template <typename T>
BasicNetwork<T> build_network(const NetSpec& spec) {
  switch (spec.kind) {
    case NetKind::Kans: return build_kans_net<T>(spec.scale, spec.width, spec.slope);
    case NetKind::Sr: return build_sr_net<T>(spec.scale, spec.width, spec.blocks, spec.slope);
    case NetKind::Discriminator: return build_discriminator<T>(spec.width, spec.slope);
  }
  throw ContractError("build_network: unknown kind");
}

template <typename T>
void init_params(BasicNetwork<T>& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (auto& l : net.layers()) {
    if (l.kind != LayerKind::Conv) continue;
    const double bound = std::sqrt(1.0 / static_cast<double>(l.in_c * l.kernel * l.kernel));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& w : l.weight.mutable_data()) w = static_cast<T>(dist(rng));
    for (auto& b : l.bias.mutable_data()) b = T(0);
  }
}

template <typename T>
void zero_layer(BasicNetwork<T>& net, const std::string& layer) {
  for (auto& l : net.layers()) {
    if (l.kind == LayerKind::Conv && l.name == layer) {
      for (auto& w : l.weight.mutable_data()) w = T(0);
      for (auto& b : l.bias.mutable_data()) b = T(0);
      return;
    }
  }
  throw ContractError("zero_layer: no conv layer named '" + layer + "' in " + net.name());
}

template <typename T>
std::uint64_t parameter_checksum(const BasicNetwork<T>& net) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : net.parameters()) {
    for (T v : p.tensor.data()) {
      unsigned char bytes[sizeof(T)];
      std::memcpy(bytes, &v, sizeof(T));
      for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
      }
    }
  }
  return h;
}

Tensor self_ensemble(const Network& net, const Tensor& lr) {
  return self_ensemble(ImageModel([&net](const Tensor& x) { return net.forward(x); }), lr);
}

#define KASR_INSTANTIATE_NETS(T)                                                            \
  template class BasicNetwork<T>;                                                           \
  template BasicNetwork<T> build_kans_net<T>(std::size_t, std::size_t, double);             \
  template BasicNetwork<T> build_sr_net<T>(std::size_t, std::size_t, std::size_t, double);  \
  template BasicNetwork<T> build_discriminator<T>(std::size_t, double);                     \
  template BasicNetwork<T> build_network<T>(const NetSpec&);                                \
  template void init_params<T>(BasicNetwork<T>&, std::uint64_t);                           \
  template void zero_layer<T>(BasicNetwork<T>&, const std::string&);                        \
  template std::uint64_t parameter_checksum<T>(const BasicNetwork<T>&);

KASR_INSTANTIATE_NETS(float)
KASR_INSTANTIATE_NETS(double)

}  // namespace kasr
