#pragma once

// Layer descriptions, shape algebra and the forward/backward kernels for each layer kind.
// Convolutions are valid (unpadded) cross-correlations with full connectivity across input maps,
// lowered to GEMM through an im2col buffer.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "vpg/core.hpp"
#include "vpg/nn/tensor.hpp"

#ifndef VPG_IM2COL_BUDGET
#define VPG_IM2COL_BUDGET (1u << 16)
#endif

namespace vpg::nn {

enum class LayerKind { Conv, MaxPool, Dropout, Flatten, Dense, Softmax };
enum class Activation { None, Elu };

constexpr std::string_view to_string(LayerKind k) noexcept {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Dropout: return "dropout";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Dense: return "dense";
    case LayerKind::Softmax: return "softmax";
  }
  return "?";
}

struct Extent2 {
  std::size_t h = 1, w = 1;
  bool operator==(const Extent2&) const = default;
};

/// One stage of a network.
///  - Conv: `out_maps` kernels of size `kernel`, `stride`, optional activation.
///  - MaxPool: `kernel`, `stride`.
///  - Dropout: `rate` in [0, 1).
///  - Flatten: `out_maps` is the required flattened width (0 accepts any).
///  - Dense: affine map to `out_maps` features, optional activation.
///  - Softmax: when `out_maps` > 0 an affine map to `out_maps` logits precedes normalisation.
struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  Extent2 kernel{};
  Extent2 stride{};
  std::size_t out_maps = 0;
  double rate = 0.0;
  Activation activation = Activation::None;

  bool has_params() const noexcept {
    return kind == LayerKind::Conv || kind == LayerKind::Dense || (kind == LayerKind::Softmax && out_maps > 0);
  }
  bool operator==(const LayerSpec&) const = default;

  static LayerSpec conv(std::size_t maps, Extent2 k, Extent2 s = {1, 1}, Activation a = Activation::Elu) {
    return {LayerKind::Conv, k, s, maps, 0.0, a};
  }
  static LayerSpec maxpool(Extent2 k, Extent2 s) { return {LayerKind::MaxPool, k, s, 0, 0.0, Activation::None}; }
  static LayerSpec dropout(double rate) { return {LayerKind::Dropout, {}, {}, 0, rate, Activation::None}; }
  static LayerSpec flatten(std::size_t width = 0) { return {LayerKind::Flatten, {}, {}, width, 0.0, Activation::None}; }
  static LayerSpec dense(std::size_t out, Activation a = Activation::None) {
    return {LayerKind::Dense, {}, {}, out, 0.0, a};
  }
  static LayerSpec softmax(std::size_t classes = 0) { return {LayerKind::Softmax, {}, {}, classes, 0.0, Activation::None}; }
};

/// floor((in - k) / s) + 1, or nullopt when the kernel does not fit.
constexpr std::optional<std::size_t> valid_out_len(std::size_t in, std::size_t k, std::size_t s) noexcept {
  if (k == 0 || s == 0 || k > in) return std::nullopt;
  return (in - k) / s + 1;
}

inline void check_layer_spec(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::Conv:
    case LayerKind::MaxPool:
      require(l.kernel.h > 0 && l.kernel.w > 0 && l.stride.h > 0 && l.stride.w > 0, Errc::InvalidArgument,
              "kernel and stride must be positive");
      if (l.kind == LayerKind::Conv) require(l.out_maps > 0, Errc::InvalidArgument, "conv needs out_maps > 0");
      break;
    case LayerKind::Dropout:
      require(l.rate >= 0.0 && l.rate < 1.0, Errc::InvalidArgument, "dropout rate must be in [0, 1)");
      break;
    case LayerKind::Dense: require(l.out_maps > 0, Errc::InvalidArgument, "dense needs out_maps > 0"); break;
    case LayerKind::Flatten:
    case LayerKind::Softmax: break;
  }
}

/// Output shape of one stage; throws ShapeMismatch (or KernelTooLarge for convolution/pooling).
inline Shape4 layer_output_shape(const LayerSpec& l, const Shape4& in) {
  check_layer_spec(l);
  switch (l.kind) {
    case LayerKind::Conv:
    case LayerKind::MaxPool: {
      const auto oh = valid_out_len(in.h, l.kernel.h, l.stride.h);
      const auto ow = valid_out_len(in.w, l.kernel.w, l.stride.w);
      require(oh && ow, Errc::KernelTooLarge,
              "kernel " + std::to_string(l.kernel.h) + "x" + std::to_string(l.kernel.w) + " exceeds input " + in.str());
      return {in.n, l.kind == LayerKind::Conv ? l.out_maps : in.c, *oh, *ow};
    }
    case LayerKind::Dropout: return in;
    case LayerKind::Flatten:
      require(l.out_maps == 0 || in.per_sample() == l.out_maps, Errc::ShapeMismatch,
              "flattened width " + std::to_string(in.per_sample()) + " != required " + std::to_string(l.out_maps));
      return {in.n, in.per_sample(), 1, 1};
    case LayerKind::Dense:
      require(in.h == 1 && in.w == 1, Errc::ShapeMismatch, "dense input must be flattened");
      return {in.n, l.out_maps, 1, 1};
    case LayerKind::Softmax:
      require(in.h == 1 && in.w == 1, Errc::ShapeMismatch, "softmax input must be flattened");
      return {in.n, l.out_maps > 0 ? l.out_maps : in.c, 1, 1};
  }
  return in;
}

/// Number of weights and biases for a stage given its input shape.
inline std::pair<std::size_t, std::size_t> param_counts(const LayerSpec& l, const Shape4& in) {
  switch (l.kind) {
    case LayerKind::Conv: return {l.out_maps * in.c * l.kernel.h * l.kernel.w, l.out_maps};
    case LayerKind::Dense: return {l.out_maps * in.per_sample(), l.out_maps};
    case LayerKind::Softmax:
      if (l.out_maps > 0) return {l.out_maps * in.per_sample(), l.out_maps};
      return {0, 0};
    default: return {0, 0};
  }
}

// ---------------------------------------------------------------------------
// Kernels

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMatrix<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

namespace detail {

// Lowers output columns [n0, n1) of a valid convolution into a K x (n1 - n0) row-major block:
// cols[(ci*kh + i)*kw + j][n - n0] = in[ci][y*sh + i][x*sw + j] with n = y*ow + x.
template <class T>
void im2col(const T* in, std::size_t c, std::size_t h, std::size_t w, Extent2 k, Extent2 s, std::size_t ow,
            std::size_t n0, std::size_t n1, T* cols) {
  const std::size_t len = n1 - n0;
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t i = 0; i < k.h; ++i)
      for (std::size_t j = 0; j < k.w; ++j) {
        T* dst = cols + ((ci * k.h + i) * k.w + j) * len;
        for (std::size_t n = n0; n < n1;) {
          const std::size_t y = n / ow, x0 = n % ow, cnt = std::min(ow - x0, n1 - n);
          const T* src = in + (ci * h + y * s.h + i) * w + x0 * s.w + j;
          if (s.w == 1) {
            std::copy_n(src, cnt, dst);
          } else {
            for (std::size_t x = 0; x < cnt; ++x) dst[x] = src[x * s.w];
          }
          dst += cnt;
          n += cnt;
        }
      }
}

// Adjoint of im2col: scatters a K x (n1 - n0) block back onto the input gradient.
template <class T>
void col2im_add(const T* cols, std::size_t c, std::size_t h, std::size_t w, Extent2 k, Extent2 s, std::size_t ow,
                std::size_t n0, std::size_t n1, T* out) {
  const std::size_t len = n1 - n0;
  for (std::size_t ci = 0; ci < c; ++ci)
    for (std::size_t i = 0; i < k.h; ++i)
      for (std::size_t j = 0; j < k.w; ++j) {
        const T* src = cols + ((ci * k.h + i) * k.w + j) * len;
        for (std::size_t n = n0; n < n1;) {
          const std::size_t y = n / ow, x0 = n % ow, cnt = std::min(ow - x0, n1 - n);
          T* dst = out + (ci * h + y * s.h + i) * w + x0 * s.w + j;
          for (std::size_t x = 0; x < cnt; ++x) dst[x * s.w] += src[x];
          src += cnt;
          n += cnt;
        }
      }
}

// Output columns per im2col block, sized so one block stays cache resident.
inline std::size_t column_block(std::size_t K, std::size_t N) {
  constexpr std::size_t budget = VPG_IM2COL_BUDGET;
  return std::clamp<std::size_t>(budget / std::max<std::size_t>(K, 1), 64, std::max<std::size_t>(N, 1));
}

}  // namespace detail

/// Valid cross-correlation. `weights` is laid out (out_maps, in_maps, kh, kw).
template <class T>
Tensor4<T> conv_valid_forward(const Tensor4<T>& input, std::span<const T> weights, std::span<const T> bias,
                              std::size_t out_maps, Extent2 kernel, Extent2 stride, std::vector<T>& scratch) {
  const auto& in = input.shape;
  const auto oh = valid_out_len(in.h, kernel.h, stride.h);
  const auto ow = valid_out_len(in.w, kernel.w, stride.w);
  require(oh && ow, Errc::KernelTooLarge, "convolution kernel exceeds input " + in.str());
  const std::size_t K = in.c * kernel.h * kernel.w;
  require(weights.size() == out_maps * K && bias.size() == out_maps, Errc::ShapeMismatch,
          "convolution parameter sizes do not match");

  Tensor4<T> out(Shape4{in.n, out_maps, *oh, *ow});
  const std::size_t N = *oh * *ow;
  const std::size_t block = detail::column_block(K, N);
  scratch.resize(K * block);
  const auto M = static_cast<Eigen::Index>(out_maps);
  ConstMatMap<T> W(weights.data(), M, static_cast<Eigen::Index>(K));
  Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b(bias.data(), M);
  using Strided = Eigen::Map<RowMatrix<T>, 0, Eigen::OuterStride<>>;
  for (std::size_t n = 0; n < in.n; ++n) {
    for (std::size_t n0 = 0; n0 < N; n0 += block) {
      const std::size_t n1 = std::min(N, n0 + block);
      const auto len = static_cast<Eigen::Index>(n1 - n0);
      detail::im2col(input.sample(n).data(), in.c, in.h, in.w, kernel, stride, *ow, n0, n1, scratch.data());
      ConstMatMap<T> cols(scratch.data(), static_cast<Eigen::Index>(K), len);
      Strided y(out.sample(n).data() + n0, M, len, Eigen::OuterStride<>(static_cast<Eigen::Index>(N)));
      y.noalias() = W * cols;
      y.colwise() += b;
    }
  }
  return out;
}

template <class T>
Tensor4<T> conv_valid_forward(const Tensor4<T>& input, std::span<const T> weights, std::span<const T> bias,
                              std::size_t out_maps, Extent2 kernel, Extent2 stride = {1, 1}) {
  std::vector<T> scratch;
  return conv_valid_forward(input, weights, bias, out_maps, kernel, stride, scratch);
}

/// Accumulates weight/bias gradients; writes the input gradient when `grad_input` is non-null.
template <class T>
void conv_valid_backward(const Tensor4<T>& input, std::span<const T> weights, const Tensor4<T>& grad_out,
                         Extent2 kernel, Extent2 stride, std::span<T> grad_w, std::span<T> grad_b,
                         Tensor4<T>* grad_input, std::vector<T>& scratch, std::vector<T>& scratch2) {
  const auto& in = input.shape;
  const std::size_t out_maps = grad_out.shape.c, ow = grad_out.shape.w;
  const std::size_t K = in.c * kernel.h * kernel.w, N = grad_out.shape.h * ow;
  const std::size_t block = detail::column_block(K, N);
  const auto M = static_cast<Eigen::Index>(out_maps);
  const auto Ki = static_cast<Eigen::Index>(K);
  scratch.resize(K * block);
  ConstMatMap<T> W(weights.data(), M, Ki);
  MatMap<T> gW(grad_w.data(), M, Ki);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> gb(grad_b.data(), M);
  if (grad_input) {
    *grad_input = Tensor4<T>(in);
    scratch2.resize(K * block);
  }
  using ConstStrided = Eigen::Map<const RowMatrix<T>, 0, Eigen::OuterStride<>>;
  for (std::size_t n = 0; n < in.n; ++n) {
    ConstMatMap<T> dy_full(grad_out.sample(n).data(), M, static_cast<Eigen::Index>(N));
    // Plain loop: Eigen's row reduction peels by address, which made sums depend on allocation.
    for (Eigen::Index m = 0; m < M; ++m) {
      T acc = T(0);
      for (Eigen::Index t = 0; t < dy_full.cols(); ++t) acc += dy_full(m, t);
      gb[m] += acc;
    }
    for (std::size_t n0 = 0; n0 < N; n0 += block) {
      const std::size_t n1 = std::min(N, n0 + block);
      const auto len = static_cast<Eigen::Index>(n1 - n0);
      detail::im2col(input.sample(n).data(), in.c, in.h, in.w, kernel, stride, ow, n0, n1, scratch.data());
      ConstMatMap<T> cols(scratch.data(), Ki, len);
      ConstStrided dy(grad_out.sample(n).data() + n0, M, len, Eigen::OuterStride<>(static_cast<Eigen::Index>(N)));
      gW.noalias() += dy * cols.transpose();
      if (grad_input) {
        MatMap<T> dcols(scratch2.data(), Ki, len);
        dcols.noalias() = W.transpose() * dy;
        detail::col2im_add(scratch2.data(), in.c, in.h, in.w, kernel, stride, ow, n0, n1,
                           grad_input->sample(n).data());
      }
    }
  }
}

/// Max over each window; `argmax` receives the flat input index of the first maximum.
template <class T>
Tensor4<T> maxpool_forward(const Tensor4<T>& input, Extent2 kernel, Extent2 stride,
                           std::vector<std::uint32_t>* argmax = nullptr) {
  const auto& in = input.shape;
  const auto oh = valid_out_len(in.h, kernel.h, stride.h);
  const auto ow = valid_out_len(in.w, kernel.w, stride.w);
  require(oh && ow, Errc::KernelTooLarge, "pooling kernel exceeds input " + in.str());
  Tensor4<T> out(Shape4{in.n, in.c, *oh, *ow});
  if (argmax) argmax->resize(out.data.size());
  std::size_t o = 0;
  for (std::size_t n = 0; n < in.n; ++n)
    for (std::size_t c = 0; c < in.c; ++c) {
      const std::size_t plane = (n * in.c + c) * in.h * in.w;
      for (std::size_t y = 0; y < *oh; ++y)
        for (std::size_t x = 0; x < *ow; ++x, ++o) {
          std::size_t best = plane + (y * stride.h) * in.w + x * stride.w;
          for (std::size_t i = 0; i < kernel.h; ++i)
            for (std::size_t j = 0; j < kernel.w; ++j) {
              const std::size_t idx = plane + (y * stride.h + i) * in.w + x * stride.w + j;
              if (input.data[idx] > input.data[best]) best = idx;
            }
          out.data[o] = input.data[best];
          if (argmax) (*argmax)[o] = static_cast<std::uint32_t>(best);
        }
    }
  return out;
}

template <class T>
Tensor4<T> maxpool_backward(const Shape4& input_shape, const Tensor4<T>& grad_out,
                            const std::vector<std::uint32_t>& argmax) {
  Tensor4<T> g(input_shape);
  for (std::size_t o = 0; o < grad_out.data.size(); ++o) g.data[argmax[o]] += grad_out.data[o];
  return g;
}

template <class T>
void elu_inplace(std::span<T> v) {
  Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> a(v.data(), static_cast<Eigen::Index>(v.size()));
  a = (a > T(0)).select(a, a.min(T(0)).exp() - T(1));
}

/// dL/dx from dL/dy given the ELU output y (slope 1 for y > 0, y + 1 otherwise).
template <class T>
void elu_backward_inplace(std::span<const T> y, std::span<T> grad) {
  Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> a(y.data(), static_cast<Eigen::Index>(y.size()));
  Eigen::Map<Eigen::Array<T, Eigen::Dynamic, 1>> g(grad.data(), static_cast<Eigen::Index>(grad.size()));
  g *= (a > T(0)).select(T(1), a + T(1));
}

/// Inverted-dropout keep mask: each entry is 0 with probability `rate`, else 1/(1-rate).
template <class T>
std::vector<T> dropout_mask(std::size_t n, double rate, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const T keep = static_cast<T>(1.0 / (1.0 - rate));
  std::vector<T> mask(n);
  for (auto& m : mask) m = uniform01(rng) < rate ? T(0) : keep;
  return mask;
}

/// y = x W^T + b with x (n, in) and W (out, in).
template <class T>
Tensor4<T> dense_forward(const Tensor4<T>& input, std::span<const T> weights, std::span<const T> bias, std::size_t out) {
  const std::size_t n = input.shape.n, in = input.shape.per_sample();
  require(weights.size() == out * in && bias.size() == out, Errc::ShapeMismatch, "dense parameter sizes do not match");
  Tensor4<T> y(Shape4{n, out, 1, 1});
  ConstMatMap<T> X(input.data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in));
  ConstMatMap<T> W(weights.data(), static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  MatMap<T> Y(y.data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out));
  Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias.data(), static_cast<Eigen::Index>(out));
  Y.noalias() = X * W.transpose();
  Y.rowwise() += b;
  return y;
}

template <class T>
Tensor4<T> dense_backward(const Tensor4<T>& input, std::span<const T> weights, const Tensor4<T>& grad_out,
                          std::span<T> grad_w, std::span<T> grad_b) {
  const std::size_t n = input.shape.n, in = input.shape.per_sample(), out = grad_out.shape.c;
  ConstMatMap<T> X(input.data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in));
  ConstMatMap<T> W(weights.data(), static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  ConstMatMap<T> dY(grad_out.data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(out));
  MatMap<T> gW(grad_w.data(), static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
  Eigen::Map<Eigen::Matrix<T, 1, Eigen::Dynamic>> gb(grad_b.data(), static_cast<Eigen::Index>(out));
  gW.noalias() += dY.transpose() * X;
  gb += dY.colwise().sum();
  Tensor4<T> gx(input.shape);
  MatMap<T> dX(gx.data.data(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(in));
  dX.noalias() = dY * W;
  return gx;
}

/// Row-wise softmax over the feature axis, max-shifted.
template <class T>
void softmax_inplace(Tensor4<T>& t) {
  const std::size_t k = t.shape.per_sample();
  for (std::size_t n = 0; n < t.shape.n; ++n) {
    auto row = t.sample(n);
    const T mx = *std::max_element(row.begin(), row.end());
    T sum = 0;
    for (auto& v : row) {
      v = std::exp(v - mx);
      sum += v;
    }
    for (auto& v : row) v /= sum;
  }
}

}  // namespace vpg::nn
