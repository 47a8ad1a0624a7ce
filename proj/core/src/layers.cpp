#include "retina/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace retina {

std::string shape_to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

struct ConvGeometry {
  std::size_t c_in, h, w;
  std::size_t c_out, k;
  std::size_t ho, wo;
  std::ptrdiff_t pad;
  std::size_t stride;
};

template <typename T>
ConvGeometry conv_geometry(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                           int stride) {
  if (input.rank() != 3) throw InvalidInput("conv2d: input must be [C,H,W]");
  if (weights.rank() != 4 || weights.dim(2) != weights.dim(3) || weights.dim(2) % 2 == 0) {
    throw InvalidInput("conv2d: weights must be [C_out,C_in,k,k] with odd k");
  }
  if (weights.dim(1) != input.dim(0)) {
    throw InvalidInput("conv2d: channel mismatch, input has " + std::to_string(input.dim(0)) +
                       " channels but weights expect " + std::to_string(weights.dim(1)));
  }
  if (stride != 1 && stride != 2) throw InvalidInput("conv2d: stride must be 1 or 2");
  ConvGeometry g{};
  g.c_in = input.dim(0);
  g.h = input.dim(1);
  g.w = input.dim(2);
  g.c_out = weights.dim(0);
  g.k = weights.dim(2);
  g.stride = static_cast<std::size_t>(stride);
  g.ho = (g.h + g.stride - 1) / g.stride;
  g.wo = (g.w + g.stride - 1) / g.stride;
  g.pad = static_cast<std::ptrdiff_t>(g.k / 2);
  return g;
}

/// Output index range [lo, hi) whose tap at kernel offset `kk` lands inside
/// an input axis of length `n`.
struct Range {
  std::size_t lo, hi;
};

Range valid_range(std::size_t out_len, std::size_t n, std::size_t kk, std::ptrdiff_t pad,
                  std::size_t stride) {
  const auto s = static_cast<std::ptrdiff_t>(stride);
  const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kk) - pad;
  // need o*s + off >= 0 and o*s + off <= n-1
  std::ptrdiff_t lo = off >= 0 ? 0 : (-off + s - 1) / s;
  std::ptrdiff_t hi = (static_cast<std::ptrdiff_t>(n) - 1 - off);
  hi = hi < 0 ? 0 : hi / s + 1;
  hi = std::min<std::ptrdiff_t>(hi, static_cast<std::ptrdiff_t>(out_len));
  if (lo > hi) lo = hi;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace

template <typename T>
BasicTensor<T> conv2d_forward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                              const BasicTensor<T>& bias, int stride) {
  const auto g = conv_geometry(input, weights, stride);
  if (bias.rank() != 1 || bias.dim(0) != g.c_out) {
    throw InvalidInput("conv2d: bias must be [C_out]");
  }
  BasicTensor<T> out({g.c_out, g.ho, g.wo});
  const T* in = input.data().data();
  const T* wt = weights.data().data();
  T* o = out.data().data();
  const std::size_t plane_in = g.h * g.w;
  const std::size_t plane_out = g.ho * g.wo;

  for (std::size_t co = 0; co < g.c_out; ++co) {
    T* op = o + co * plane_out;
    std::fill(op, op + plane_out, bias[co]);
    for (std::size_t ci = 0; ci < g.c_in; ++ci) {
      const T* ip = in + ci * plane_in;
      const T* wp = wt + (co * g.c_in + ci) * g.k * g.k;
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        const Range ry = valid_range(g.ho, g.h, ky, g.pad, g.stride);
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          const T wv = wp[ky * g.k + kx];
          const Range rx = valid_range(g.wo, g.w, kx, g.pad, g.stride);
          const std::ptrdiff_t xoff = static_cast<std::ptrdiff_t>(kx) - g.pad;
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            const std::size_t iy = oy * g.stride + ky - static_cast<std::size_t>(g.pad);
            const T* row = ip + iy * g.w;
            T* orow = op + oy * g.wo;
            if (g.stride == 1) {
              for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
                orow[ox] += wv * row[static_cast<std::ptrdiff_t>(ox) + xoff];
              }
            } else {
              for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
                orow[ox] += wv * row[static_cast<std::ptrdiff_t>(2 * ox) + xoff];
              }
            }
          }
        }
      }
    }
  }
  return out;
}

template <typename T>
void conv2d_backward_accumulate(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                                int stride, const BasicTensor<T>& grad_out,
                                BasicTensor<T>* grad_input, BasicTensor<T>& grad_weights,
                                BasicTensor<T>& grad_bias) {
  const auto g = conv_geometry(input, weights, stride);
  if (grad_out.shape() != Shape{g.c_out, g.ho, g.wo}) {
    throw InvalidInput("conv2d_backward: grad_out shape " + shape_to_string(grad_out.shape()) +
                       " does not match forward output " +
                       shape_to_string({g.c_out, g.ho, g.wo}));
  }
  if (grad_weights.shape() != weights.shape() || grad_bias.shape() != Shape{g.c_out}) {
    throw InvalidInput("conv2d_backward: gradient buffers have the wrong shape");
  }
  if (grad_input && grad_input->shape() != input.shape()) {
    throw InvalidInput("conv2d_backward: grad_input buffer has the wrong shape");
  }
  const T* in = input.data().data();
  const T* wt = weights.data().data();
  const T* go = grad_out.data().data();
  T* gw = grad_weights.data().data();
  T* gi = grad_input ? grad_input->data().data() : nullptr;
  const std::size_t plane_in = g.h * g.w;
  const std::size_t plane_out = g.ho * g.wo;

  for (std::size_t co = 0; co < g.c_out; ++co) {
    const T* gp = go + co * plane_out;
    T acc{0};
    for (std::size_t i = 0; i < plane_out; ++i) acc += gp[i];
    grad_bias[co] += acc;
    for (std::size_t ci = 0; ci < g.c_in; ++ci) {
      const T* ip = in + ci * plane_in;
      T* gip = gi ? gi + ci * plane_in : nullptr;
      const std::size_t wbase = (co * g.c_in + ci) * g.k * g.k;
      for (std::size_t ky = 0; ky < g.k; ++ky) {
        const Range ry = valid_range(g.ho, g.h, ky, g.pad, g.stride);
        for (std::size_t kx = 0; kx < g.k; ++kx) {
          const Range rx = valid_range(g.wo, g.w, kx, g.pad, g.stride);
          const std::ptrdiff_t xoff = static_cast<std::ptrdiff_t>(kx) - g.pad;
          const T wv = wt[wbase + ky * g.k + kx];
          T wacc{0};
          for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
            const std::size_t iy = oy * g.stride + ky - static_cast<std::size_t>(g.pad);
            const T* row = ip + iy * g.w;
            const T* grow = gp + oy * g.wo;
            T* girow = gip ? gip + iy * g.w : nullptr;
            for (std::size_t ox = rx.lo; ox < rx.hi; ++ox) {
              const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.stride) + xoff;
              wacc += grow[ox] * row[ix];
              if (girow) girow[ix] += wv * grow[ox];
            }
          }
          gw[wbase + ky * g.k + kx] += wacc;
        }
      }
    }
  }
}

template <typename T>
ConvGradients<T> conv2d_backward(const BasicTensor<T>& input, const BasicTensor<T>& weights,
                                 int stride, const BasicTensor<T>& grad_out) {
  ConvGradients<T> out{BasicTensor<T>(input.shape()), BasicTensor<T>(weights.shape()),
                       BasicTensor<T>(weights.rank() == 4 ? Shape{weights.dim(0)} : Shape{0})};
  conv2d_backward_accumulate(input, weights, stride, grad_out, &out.input, out.weights, out.bias);
  return out;
}

template <typename T>
BasicTensor<T> relu(const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T{0} ? x[i] : T{0};
  return out;
}

template <typename T>
BasicTensor<T> relu_backward(const BasicTensor<T>& input, const BasicTensor<T>& grad_out) {
  require_same_shape(input, grad_out, "relu_backward");
  BasicTensor<T> out(input.shape());
  for (std::size_t i = 0; i < input.size(); ++i) out[i] = input[i] > T{0} ? grad_out[i] : T{0};
  return out;
}

template <typename T>
BasicTensor<T> upsample_nearest_x2(const BasicTensor<T>& x) {
  if (x.rank() != 3) throw InvalidInput("upsample_nearest_x2: input must be [C,H,W]");
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  BasicTensor<T> out({c, 2 * h, 2 * w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < 2 * h; ++y) {
      for (std::size_t xx = 0; xx < 2 * w; ++xx) out.at(ch, y, xx) = x.at(ch, y / 2, xx / 2);
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> upsample_nearest_x2_backward(const BasicTensor<T>& grad_out) {
  if (grad_out.rank() != 3 || grad_out.dim(1) % 2 || grad_out.dim(2) % 2) {
    throw InvalidInput("upsample_nearest_x2_backward: grad must be [C,2H,2W]");
  }
  const std::size_t c = grad_out.dim(0), h = grad_out.dim(1) / 2, w = grad_out.dim(2) / 2;
  BasicTensor<T> out({c, h, w});
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        out.at(ch, y, x) = grad_out.at(ch, 2 * y, 2 * x) + grad_out.at(ch, 2 * y, 2 * x + 1) +
                           grad_out.at(ch, 2 * y + 1, 2 * x) +
                           grad_out.at(ch, 2 * y + 1, 2 * x + 1);
      }
    }
  }
  return out;
}

template <typename T>
BasicTensor<T> elementwise_add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  require_same_shape(a, b, "elementwise_add");
  BasicTensor<T> out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
AddGradients<T> elementwise_add_backward(const BasicTensor<T>& grad_out) {
  return {grad_out, grad_out};
}

template <typename T>
BasicTensor<T> sigmoid(const BasicTensor<T>& x) {
  BasicTensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T v = x[i];
    if (v >= T{0}) {
      out[i] = T{1} / (T{1} + std::exp(-v));
    } else {
      const T e = std::exp(v);
      out[i] = e / (T{1} + e);
    }
  }
  return out;
}

#define RETINA_INSTANTIATE_LAYERS(T)                                                          \
  template BasicTensor<T> conv2d_forward(const BasicTensor<T>&, const BasicTensor<T>&,        \
                                         const BasicTensor<T>&, int);                         \
  template ConvGradients<T> conv2d_backward(const BasicTensor<T>&, const BasicTensor<T>&, int, \
                                            const BasicTensor<T>&);                           \
  template void conv2d_backward_accumulate(const BasicTensor<T>&, const BasicTensor<T>&, int, \
                                           const BasicTensor<T>&, BasicTensor<T>*,            \
                                           BasicTensor<T>&, BasicTensor<T>&);                 \
  template BasicTensor<T> relu(const BasicTensor<T>&);                                        \
  template BasicTensor<T> relu_backward(const BasicTensor<T>&, const BasicTensor<T>&);        \
  template BasicTensor<T> upsample_nearest_x2(const BasicTensor<T>&);                         \
  template BasicTensor<T> upsample_nearest_x2_backward(const BasicTensor<T>&);                \
  template BasicTensor<T> elementwise_add(const BasicTensor<T>&, const BasicTensor<T>&);      \
  template AddGradients<T> elementwise_add_backward(const BasicTensor<T>&);                   \
  template BasicTensor<T> sigmoid(const BasicTensor<T>&);

RETINA_INSTANTIATE_LAYERS(float)
RETINA_INSTANTIATE_LAYERS(double)

#undef RETINA_INSTANTIATE_LAYERS

}  // namespace retina
