#pragma once

#include <cstdint>

#include "retina/network.hpp"

namespace retina {

struct AdamConfig {
  float lr = 0.001f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

struct AdamState {
  Parameters m;
  Parameters v;
  std::uint64_t step = 0;

  static AdamState zeros_like(const Parameters& params);
  bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam update. Every gradient is checked before any
/// parameter is touched; a non-finite entry throws NumericError naming the
/// parameter and step, leaving params and state unchanged.
void adam_step(Parameters& params, const Parameters& grads, AdamState& state,
               const AdamConfig& config);

}  // namespace retina
