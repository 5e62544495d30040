#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kasr/image_ops.hpp"
#include "kasr/tensor.hpp"

namespace kasr {

enum class NetKind : std::uint8_t { Kans, Sr, Discriminator };

const char* net_kind_name(NetKind kind);
NetKind parse_net_kind(const std::string& name);

/// Builder arguments; enough to rebuild a network's topology.
struct NetSpec {
  NetKind kind = NetKind::Sr;
  std::size_t scale = 2;
  std::size_t width = 32;   // hidden channels / features / discriminator base
  std::size_t blocks = 4;   // residual blocks, SR net only
  double slope = 0.2;       // LeakyReLU negative slope
};

enum class LayerKind : std::uint8_t { Conv, LeakyRelu, MaxPool, DepthToSpace, SaveSkip, AddSkip };

template <typename T>
struct Layer {
  LayerKind kind = LayerKind::Conv;
  std::string name;
  // Conv
  std::size_t in_c = 0, out_c = 0, kernel = 0, stride = 1, pad = 0;
  BasicTensor<T> weight, bias;
  // LeakyRelu
  T slope = T(0.2);
  // MaxPool (kernel/stride reuse the conv fields), DepthToSpace
  std::size_t block = 1;
  // SaveSkip / AddSkip
  std::size_t slot = 0;
};

/// Ordered layer list. Skip connections are expressed by SaveSkip/AddSkip
/// markers that stash and add back an activation by slot.
template <typename T>
class BasicNetwork {
 public:
  struct Parameter {
    std::string name;
    BasicTensor<T> tensor;
  };

  BasicNetwork() = default;
  BasicNetwork(std::string name, NetSpec spec, std::vector<Layer<T>> layers);

  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }
  const NetSpec& spec() const { return spec_; }
  std::size_t scale() const { return spec_.scale; }
  const std::vector<Layer<T>>& layers() const { return layers_; }
  std::vector<Layer<T>>& layers() { return layers_; }

  BasicTensor<T> forward(const BasicTensor<T>& x) const;
  BasicTensor<T> operator()(const BasicTensor<T>& x) const { return forward(x); }

  /// Parameters in layer order as "<layer>.weight" / "<layer>.bias".
  std::vector<Parameter> parameters() const;
  std::size_t parameter_count() const;
  void set_trainable(bool on);
  void clear_grads();

  /// Deep copy of the parameter values.
  BasicNetwork clone() const;

 private:
  std::string name_;
  NetSpec spec_;
  std::vector<Layer<T>> layers_;
  std::size_t slots_ = 0;
};

using Network = BasicNetwork<float>;
using Network64 = BasicNetwork<double>;

/// conv(3,h) lrelu conv(h,h) lrelu [maxpool stages] conv(h,3); output is input / scale.
template <typename T = float>
BasicNetwork<T> build_kans_net(std::size_t scale, std::size_t hidden = 32, double slope = 0.2);

/// Micro-EDSR: head, residual blocks, global skip, sub-pixel upsampler, tail.
template <typename T = float>
BasicNetwork<T> build_sr_net(std::size_t scale, std::size_t features = 32, std::size_t blocks = 4,
                             double slope = 0.2);

/// Patch discriminator producing a logit map at 1/4 resolution.
template <typename T = float>
BasicNetwork<T> build_discriminator(std::size_t base = 32, double slope = 0.2);

template <typename T = float>
BasicNetwork<T> build_network(const NetSpec& spec);

/// Uniform(-b, b) weights with b = sqrt(1 / fan_in), zero biases.
template <typename T>
void init_params(BasicNetwork<T>& net, std::uint64_t seed);

/// Zeroes the weights and biases of the named conv layer.
template <typename T>
void zero_layer(BasicNetwork<T>& net, const std::string& layer);

/// FNV-1a over the raw parameter bytes; used for isolation checks.
template <typename T>
std::uint64_t parameter_checksum(const BasicNetwork<T>& net);

/// Geometric self-ensemble through a network, without recording a graph.
Tensor self_ensemble(const Network& net, const Tensor& lr);

// Checkpoint file:
//   "KASR" | u32 version | u32 header_len | header JSON | u32 entry_count |
//   entries: u32 name_len | name | u8 dtype (0 = f32) | u32 ndim | u32 dims... | raw values
// All integers and values little-endian. The JSON header holds the config
// echo and the builder arguments of every network.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointContents {
  std::vector<Network> nets;
  std::string config_json;  // the serialized training configuration
};

void save_checkpoint(const std::vector<const Network*>& nets, const std::string& config_json,
                     const std::filesystem::path& path);
CheckpointContents load_checkpoint(const std::filesystem::path& path);

/// Bytes the checkpoint of `nets` occupies for the given header JSON length.
std::size_t checkpoint_size(const std::vector<const Network*>& nets, std::size_t header_len);

/// The JSON header save_checkpoint writes for `nets`.
std::string checkpoint_header(const std::vector<const Network*>& nets, const std::string& config_json);

}  // namespace kasr
