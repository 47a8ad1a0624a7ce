#pragma once

#include "retina/tensor.hpp"

namespace retina {

/// Square-kernel cross-correlation with zero padding kernel/2 (so 3x3 uses
/// padding 1). Output is [C_out, ceil(H/stride), ceil(W/stride)]; stride 2
/// samples even input positions.
template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                              const BasicTensor<T>& bias, int stride);

template <typename T>
struct ConvGradients {
  BasicTensor<T> input;
  BasicTensor<T> weights;
  BasicTensor<T> bias;
};

template <typename T>
ConvGradients<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                                 int stride, const BasicTensor<T>& grad_out);

/// Accumulating variant used by the network: adds into the given buffers.
/// `grad_input` may be null when the input gradient is not needed.
template <typename T>
void conv2d_backward_accumulate(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                                int stride, const BasicTensor<T>& grad_out,
                                BasicTensor<T>* grad_input, BasicTensor<T>& grad_weights,
                                BasicTensor<T>& grad_bias);

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x);

/// Gates `grad_out` by input > 0; the gradient at exactly 0 is 0.
template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> upsample_nearest_x2(const BasicTensor<T>& x);

/// Sums each 2x2 output block back into its source cell.
template <typename T>
BasicTensor<T> upsample_nearest_x2_backward(const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> elementwise_add(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
struct AddGradients {
  BasicTensor<T> a;
  BasicTensor<T> b;
};

template <typename T>
AddGradients<T> elementwise_add_backward(const BasicTensor<T>& grad_out);

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x);

}  // namespace retina
