#include "retina/network.hpp"

#include <cmath>
#include <string>

#include "retina/layers.hpp"
#include "retina/rng.hpp"

namespace retina {

void NetworkConfig::validate() const {
  if (input_channels <= 0) throw InvalidInput("network: input_channels must be positive");
  if (stem_channels.empty()) throw InvalidInput("network: stem_channels must be non-empty");
  for (int c : stem_channels) {
    if (c <= 0) throw InvalidInput("network: stem channel counts must be positive");
  }
  if (fpn_channels <= 0) throw InvalidInput("network: fpn_channels must be positive");
  if (head_depth < 0) throw InvalidInput("network: head_depth must be >= 0");
  if (num_anchors_per_cell <= 0) throw InvalidInput("network: num_anchors_per_cell must be positive");
  if (num_classes <= 0) throw InvalidInput("network: num_classes must be positive");
  if (!(prior_prob > 0.f && prior_prob < 1.f)) {
    throw InvalidInput("network: prior_prob must be in (0, 1)");
  }
  if (!(init_std > 0.f)) throw InvalidInput("network: init_std must be positive");
}

template <typename T>
std::size_t NamedTensors<T>::find(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  return names.size();
}

template <typename T>
NamedTensors<T> NamedTensors<T>::zeros_like() const {
  NamedTensors out;
  out.names = names;
  for (const auto& t : tensors) out.tensors.emplace_back(t.shape());
  return out;
}

template <typename T>
std::size_t NamedTensors<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

template struct NamedTensors<float>;
template struct NamedTensors<double>;

TinyNet::TinyNet(NetworkConfig config, std::vector<int> level_strides)
    : config_(std::move(config)), level_strides_(std::move(level_strides)) {
  config_.validate();
  if (level_strides_.empty()) throw InvalidInput("network: at least one pyramid level required");
  if (level_strides_.size() > config_.stem_channels.size()) {
    throw InvalidInput("network: fewer stem stages than pyramid levels");
  }
  for (std::size_t l = 0; l < level_strides_.size(); ++l) {
    const int stride = level_strides_[l];
    std::size_t stage = config_.stem_channels.size();
    for (std::size_t s = 0; s < config_.stem_channels.size(); ++s) {
      if ((2 << s) == stride) stage = s;
    }
    if (stage == config_.stem_channels.size()) {
      throw InvalidInput("network: anchor stride " + std::to_string(stride) +
                         " does not match any stem stage stride");
    }
    if (l > 0 && stride != 2 * level_strides_[l - 1]) {
      throw InvalidInput("network: consecutive pyramid strides must differ by a factor of 2");
    }
    level_stage_.push_back(stage);
  }

  const std::size_t num_stages = level_stage_.back() + 1;
  int c_in = config_.input_channels;
  for (std::size_t s = 0; s < num_stages; ++s) {
    stem_.push_back(add_conv("stem." + std::to_string(s), config_.stem_channels[s], c_in, 3, 2));
    c_in = config_.stem_channels[s];
  }
  const int f = config_.fpn_channels;
  for (std::size_t l = 0; l < level_strides_.size(); ++l) {
    lateral_.push_back(add_conv("lateral." + std::to_string(l), f,
                                config_.stem_channels[level_stage_[l]], 1, 1));
  }
  for (std::size_t l = 0; l < level_strides_.size(); ++l) {
    smooth_.push_back(add_conv("smooth." + std::to_string(l), f, f, 3, 1));
  }
  for (int d = 0; d < config_.head_depth; ++d) {
    cls_hidden_.push_back(add_conv("cls_subnet." + std::to_string(d), f, f, 3, 1));
  }
  cls_out_ = add_conv("cls_subnet.out", config_.num_anchors_per_cell * config_.num_classes, f, 3, 1);
  for (int d = 0; d < config_.head_depth; ++d) {
    box_hidden_.push_back(add_conv("box_subnet." + std::to_string(d), f, f, 3, 1));
  }
  box_out_ = add_conv("box_subnet.out", config_.num_anchors_per_cell * 4, f, 3, 1);
}

std::size_t TinyNet::add_conv(const std::string& prefix, int c_out, int c_in, int kernel,
                              int stride) {
  const std::size_t w = names_.size();
  names_.push_back(prefix + ".weight");
  shapes_.push_back({static_cast<std::size_t>(c_out), static_cast<std::size_t>(c_in),
                     static_cast<std::size_t>(kernel), static_cast<std::size_t>(kernel)});
  names_.push_back(prefix + ".bias");
  shapes_.push_back({static_cast<std::size_t>(c_out)});
  convs_.push_back({w, w + 1, stride});
  return convs_.size() - 1;
}

Parameters TinyNet::initialize(std::uint64_t seed) const {
  Parameters params;
  params.names = names_;
  Rng rng(derive_seed(seed, 0x1417));
  for (std::size_t i = 0; i < names_.size(); ++i) params.tensors.emplace_back(shapes_[i]);

  for (std::size_t c = 0; c < convs_.size(); ++c) {
    auto& w = params.tensors[convs_[c].weight];
    const bool output_layer = c == cls_out_ || c == box_out_;
    double std = config_.init_std;
    if (config_.init == WeightInit::kHeBackbone && !output_layer) {
      const auto fan_in = static_cast<double>(w.dim(1) * w.dim(2) * w.dim(3));
      std = std::sqrt(2.0 / fan_in);
    }
    for (auto& v : w.data()) v = static_cast<float>(std * rng.normal());
  }
  const double pi = config_.prior_prob;
  params.tensors[convs_[cls_out_].bias].fill(static_cast<float>(-std::log((1.0 - pi) / pi)));
  return params;
}

template <typename T>
void TinyNet::check_parameters(const NamedTensors<T>& params) const {
  if (params.names.size() != params.tensors.size()) {
    throw InvalidInput("parameter set has mismatched name and tensor counts");
  }
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (i >= params.size()) throw InvalidInput("missing parameter tensor '" + names_[i] + "'");
    if (params.names[i] != names_[i]) {
      throw InvalidInput("parameter tensor '" + params.names[i] + "' found where '" + names_[i] +
                         "' was expected");
    }
    if (params.tensors[i].shape() != shapes_[i]) {
      throw InvalidInput("parameter tensor '" + names_[i] + "' has shape " +
                         shape_to_string(params.tensors[i].shape()) + ", expected " +
                         shape_to_string(shapes_[i]));
    }
  }
  if (params.size() > names_.size()) {
    throw InvalidInput("unexpected parameter tensor '" + params.names[names_.size()] + "'");
  }
}

template <typename T>
HeadOutputs<T> TinyNet::forward(const NamedTensors<T>& params, const BasicTensor<T>& image,
                                ForwardRecord<T>* record) const {
  check_parameters(params);
  if (image.rank() != 3 || image.dim(0) != static_cast<std::size_t>(config_.input_channels)) {
    throw InvalidInput("network: image must be [" + std::to_string(config_.input_channels) +
                       ",H,W], got " + shape_to_string(image.shape()));
  }
  const auto max_stride = static_cast<std::size_t>(level_strides_.back());
  if (image.dim(1) % max_stride || image.dim(2) % max_stride) {
    throw InvalidInput("network: image size " + shape_to_string(image.shape()) +
                       " is not divisible by the largest stride " + std::to_string(max_stride));
  }
  const auto conv = [&](std::size_t c, const BasicTensor<T>& x) {
    return conv2d_forward(x, params.tensors[convs_[c].weight], params.tensors[convs_[c].bias],
                          convs_[c].stride);
  };

  ForwardRecord<T> local;
  ForwardRecord<T>& rec = record ? *record : local;
  rec = ForwardRecord<T>{};
  rec.image = image;

  const BasicTensor<T>* x = &image;
  for (std::size_t s = 0; s < stem_.size(); ++s) {
    rec.stages.push_back(relu(conv(stem_[s], *x)));
    x = &rec.stages.back();
  }

  const std::size_t levels = level_strides_.size();
  rec.merged.resize(levels);
  for (std::size_t l = levels; l-- > 0;) {
    auto lat = conv(lateral_[l], rec.stages[level_stage_[l]]);
    rec.merged[l] = l + 1 == levels ? std::move(lat)
                                    : elementwise_add(lat, upsample_nearest_x2(rec.merged[l + 1]));
  }

  HeadOutputs<T> out;
  for (std::size_t l = 0; l < levels; ++l) {
    rec.features.push_back(conv(smooth_[l], rec.merged[l]));
    const BasicTensor<T>& feat = rec.features.back();

    std::vector<BasicTensor<T>> hidden;
    const BasicTensor<T>* h = &feat;
    for (std::size_t c : cls_hidden_) {
      hidden.push_back(relu(conv(c, *h)));
      h = &hidden.back();
    }
    out.cls.push_back(conv(cls_out_, *h));
    rec.cls_hidden.push_back(std::move(hidden));

    hidden.clear();
    h = &feat;
    for (std::size_t c : box_hidden_) {
      hidden.push_back(relu(conv(c, *h)));
      h = &hidden.back();
    }
    out.box.push_back(conv(box_out_, *h));
    rec.box_hidden.push_back(std::move(hidden));
  }
  return out;
}

template <typename T>
NamedTensors<T> TinyNet::backward(const NamedTensors<T>& params, const ForwardRecord<T>& rec,
                                  const HeadOutputs<T>& grads) const {
  check_parameters(params);
  const std::size_t levels = level_strides_.size();
  if (grads.cls.size() != levels || grads.box.size() != levels || rec.features.size() != levels) {
    throw InvalidInput("network backward: expected one gradient per pyramid level");
  }
  NamedTensors<T> g = params.zeros_like();

  const auto conv_back = [&](std::size_t c, const BasicTensor<T>& input,
                             const BasicTensor<T>& grad_out, bool need_input) {
    BasicTensor<T> grad_in;
    if (need_input) grad_in = BasicTensor<T>(input.shape());
    conv2d_backward_accumulate(input, params.tensors[convs_[c].weight], convs_[c].stride,
                               grad_out, need_input ? &grad_in : nullptr,
                               g.tensors[convs_[c].weight], g.tensors[convs_[c].bias]);
    return grad_in;
  };

  // Subnet tower: output conv, then hidden layers in reverse.
  const auto subnet_back = [&](std::size_t out_conv, const std::vector<std::size_t>& hidden_convs,
                               const std::vector<BasicTensor<T>>& hidden,
                               const BasicTensor<T>& feat, const BasicTensor<T>& grad_out) {
    const BasicTensor<T>& last = hidden.empty() ? feat : hidden.back();
    BasicTensor<T> gh = conv_back(out_conv, last, grad_out, true);
    for (std::size_t d = hidden.size(); d-- > 0;) {
      gh = relu_backward(hidden[d], gh);
      const BasicTensor<T>& in = d == 0 ? feat : hidden[d - 1];
      gh = conv_back(hidden_convs[d], in, gh, true);
    }
    return gh;
  };

  std::vector<BasicTensor<T>> grad_merged(levels);
  for (std::size_t l = 0; l < levels; ++l) {
    if (grads.cls[l].shape() !=
            Shape{params.tensors[convs_[cls_out_].weight].dim(0), rec.features[l].dim(1),
                  rec.features[l].dim(2)} ||
        grads.box[l].shape() != Shape{params.tensors[convs_[box_out_].weight].dim(0),
                                      rec.features[l].dim(1), rec.features[l].dim(2)}) {
      throw InvalidInput("network backward: head gradient shape mismatch at level " +
                         std::to_string(l));
    }
    BasicTensor<T> gf = subnet_back(cls_out_, cls_hidden_, rec.cls_hidden[l], rec.features[l],
                                     grads.cls[l]);
    BasicTensor<T> gbox = subnet_back(box_out_, box_hidden_, rec.box_hidden[l], rec.features[l],
                                      grads.box[l]);
    for (std::size_t i = 0; i < gf.size(); ++i) gf[i] += gbox[i];
    grad_merged[l] = conv_back(smooth_[l], rec.merged[l], gf, true);
  }

  // Top-down path, finest level first so each merged gradient is complete
  // before it is pushed to the next coarser level.
  std::vector<BasicTensor<T>> grad_stage(stem_.size());
  for (std::size_t l = 0; l < levels; ++l) {
    if (l + 1 < levels) {
      const auto up = upsample_nearest_x2_backward(grad_merged[l]);
      for (std::size_t i = 0; i < up.size(); ++i) grad_merged[l + 1][i] += up[i];
    }
    const std::size_t s = level_stage_[l];
    auto gs = conv_back(lateral_[l], rec.stages[s], grad_merged[l], true);
    if (grad_stage[s].empty()) {
      grad_stage[s] = std::move(gs);
    } else {
      for (std::size_t i = 0; i < gs.size(); ++i) grad_stage[s][i] += gs[i];
    }
  }

  for (std::size_t s = stem_.size(); s-- > 0;) {
    if (grad_stage[s].empty()) grad_stage[s] = BasicTensor<T>(rec.stages[s].shape());
    const auto gpre = relu_backward(rec.stages[s], grad_stage[s]);
    const BasicTensor<T>& in = s == 0 ? rec.image : rec.stages[s - 1];
    auto gin = conv_back(stem_[s], in, gpre, s > 0);
    if (s > 0) {
      if (grad_stage[s - 1].empty()) {
        grad_stage[s - 1] = std::move(gin);
      } else {
        for (std::size_t i = 0; i < gin.size(); ++i) grad_stage[s - 1][i] += gin[i];
      }
    }
  }
  return g;
}

#define RETINA_INSTANTIATE_NET(T)                                                            \
  template void TinyNet::check_parameters(const NamedTensors<T>&) const;                     \
  template HeadOutputs<T> TinyNet::forward(const NamedTensors<T>&, const BasicTensor<T>&,    \
                                           ForwardRecord<T>*) const;                         \
  template NamedTensors<T> TinyNet::backward(const NamedTensors<T>&, const ForwardRecord<T>&, \
                                             const HeadOutputs<T>&) const;

RETINA_INSTANTIATE_NET(float)
RETINA_INSTANTIATE_NET(double)

#undef RETINA_INSTANTIATE_NET

}  // namespace retina
