#include "retina/optimizer.hpp"

#include <cmath>
#include <string>

namespace retina {

AdamState AdamState::zeros_like(const Parameters& params) {
  AdamState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  return s;
}

void adam_step(Parameters& params, const Parameters& grads, AdamState& state,
               const AdamConfig& config) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw InvalidInput("adam_step: parameter, gradient and state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads.tensors[i].shape() != params.tensors[i].shape() ||
        state.m.tensors[i].shape() != params.tensors[i].shape() ||
        state.v.tensors[i].shape() != params.tensors[i].shape()) {
      throw InvalidInput("adam_step: shape mismatch for '" + params.names[i] + "'");
    }
    if (!all_finite(grads.tensors[i])) {
      throw NumericError("adam_step: non-finite gradient in '" + params.names[i] +
                         "' at step " + std::to_string(state.step + 1));
    }
  }

  const std::uint64_t t = state.step + 1;
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params.tensors[i].data();
    auto g = grads.tensors[i].data();
    auto m = state.m.tensors[i].data();
    auto v = state.v.tensors[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = g[j];
      const double mj = b1 * m[j] + (1.0 - b1) * gj;
      const double vj = b2 * v[j] + (1.0 - b2) * gj * gj;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      const double mhat = mj / c1;
      const double vhat = vj / c2;
      p[j] = static_cast<float>(p[j] - config.lr * mhat / (std::sqrt(vhat) + config.eps));
    }
  }
  state.step = t;
}

}  // namespace retina
