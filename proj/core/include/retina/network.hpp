#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "retina/tensor.hpp"

namespace retina {

enum class WeightInit {
  /// N(0, 0.01) for every weight.
  kGaussian,
  /// He-normal for backbone, pyramid and hidden head layers; N(0, 0.01) for
  /// the two output convolutions.
  kHeBackbone,
};

struct NetworkConfig {
  int input_channels = 3;
  /// One entry per stride-2 stage; stage i has stride 2^(i+1).
  std::vector<int> stem_channels{8, 16, 32, 64};
  int fpn_channels = 32;
  int head_depth = 2;
  int num_anchors_per_cell = 9;
  int num_classes = 1;
  float prior_prob = 0.01f;
  WeightInit init = WeightInit::kGaussian;
  float init_std = 0.01f;

  void validate() const;
  bool operator==(const NetworkConfig&) const = default;
};

/// Ordered, uniquely named tensors. Used for parameters, gradients and
/// optimizer moments alike.
template <typename T>
struct NamedTensors {
  std::vector<std::string> names;
  std::vector<BasicTensor<T>> tensors;

  std::size_t size() const noexcept { return tensors.size(); }
  /// Index of `name`, or size() when absent.
  std::size_t find(const std::string& name) const;
  NamedTensors zeros_like() const;
  std::size_t parameter_count() const;

  template <typename U>
  NamedTensors<U> cast() const {
    NamedTensors<U> out;
    out.names = names;
    for (const auto& t : tensors) out.tensors.push_back(t.template cast<U>());
    return out;
  }

  bool operator==(const NamedTensors&) const = default;
};

using Parameters = NamedTensors<float>;

template <typename T>
struct HeadOutputs {
  /// Per pyramid level, [A*K, H_l, W_l]; channel a*K + k.
  std::vector<BasicTensor<T>> cls;
  /// Per pyramid level, [A*4, H_l, W_l]; channel a*4 + j.
  std::vector<BasicTensor<T>> box;
};

/// Activations retained by forward() for the backward pass.
template <typename T>
struct ForwardRecord {
  BasicTensor<T> image;
  std::vector<BasicTensor<T>> stages;     // post-ReLU stem outputs
  std::vector<BasicTensor<T>> merged;     // lateral + upsampled top-down
  std::vector<BasicTensor<T>> features;   // smoothed pyramid features
  std::vector<std::vector<BasicTensor<T>>> cls_hidden;  // [level][depth]
  std::vector<std::vector<BasicTensor<T>>> box_hidden;
};

/// FPN-lite detector: a stride-2 conv stem, 1x1 laterals with a nearest
/// upsample top-down path, one 3x3 smoothing conv per level and two
/// subnets whose parameters are shared across levels.
class TinyNet {
 public:
  /// `level_strides` are the anchor pyramid strides, ascending; each must be
  /// a stem stage stride and consecutive levels must differ by a factor 2.
  TinyNet(NetworkConfig config, std::vector<int> level_strides);

  const NetworkConfig& config() const noexcept { return config_; }
  const std::vector<int>& level_strides() const noexcept { return level_strides_; }
  std::size_t num_levels() const noexcept { return level_strides_.size(); }

  /// Names and shapes of every parameter in canonical order.
  const std::vector<std::string>& parameter_names() const noexcept { return names_; }
  const std::vector<Shape>& parameter_shapes() const noexcept { return shapes_; }

  Parameters initialize(std::uint64_t seed) const;

  /// Throws InvalidInput naming the first tensor whose name or shape differs.
  template <typename T>
  void check_parameters(const NamedTensors<T>& params) const;

  template <typename T>
  HeadOutputs<T> forward(const NamedTensors<T>& params, const BasicTensor<T>& image,
                         ForwardRecord<T>* record = nullptr) const;

  /// Reverse-mode gradients for every parameter. Shared subnet gradients
  /// are summed over levels in level order.
  template <typename T>
  NamedTensors<T> backward(const NamedTensors<T>& params, const ForwardRecord<T>& record,
                           const HeadOutputs<T>& grads) const;

 private:
  struct Conv {
    std::size_t weight;
    std::size_t bias;
    int stride;
  };

  std::size_t add_conv(const std::string& prefix, int c_out, int c_in, int kernel, int stride);

  NetworkConfig config_;
  std::vector<int> level_strides_;
  std::vector<std::size_t> level_stage_;  // stem stage feeding each level
  std::vector<std::string> names_;
  std::vector<Shape> shapes_;
  std::vector<Conv> convs_;
  std::vector<std::size_t> stem_, lateral_, smooth_, cls_hidden_, box_hidden_;
  std::size_t cls_out_ = 0;
  std::size_t box_out_ = 0;
};

}  // namespace retina
