#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "vpg/core.hpp"
#include "vpg/nn/layers.hpp"
#include "vpg/nn/tensor.hpp"

namespace vpg::nn {

/// Network description: input is (batch, 1, n_channels, input_time).
struct ModelSpec {
  std::size_t n_channels = 0;
  std::size_t input_time = 0;
  std::size_t n_classes = kDefaultClassCount;
  std::vector<LayerSpec> layers;

  Shape4 input_shape(std::size_t batch = 1) const { return {batch, 1, n_channels, input_time}; }
  bool operator==(const ModelSpec&) const = default;
};

/// ShapeMismatch raised while tracing shapes; `stage()` is the 1-based index of the failing layer.
class StageError : public Error {
 public:
  StageError(std::size_t stage, LayerKind kind, const std::string& what)
      : Error(Errc::ShapeMismatch, "stage " + std::to_string(stage) + " (" + std::string(to_string(kind)) + "): " + what),
        stage_(stage) {}
  std::size_t stage() const noexcept { return stage_; }

 private:
  std::size_t stage_;
};

/// Output shape after every stage for the given input shape.
inline std::vector<Shape4> stage_shapes(const ModelSpec& spec, Shape4 input) {
  std::vector<Shape4> out;
  Shape4 s = input;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    try {
      s = layer_output_shape(spec.layers[i], s);
    } catch (const Error& e) {
      throw StageError(i + 1, spec.layers[i].kind, e.what());
    }
    out.push_back(s);
  }
  return out;
}

/// Structural checks: last stage is a softmax producing n_classes, softmax appears only there.
inline void validate_model_spec(const ModelSpec& spec) {
  require(spec.n_channels >= 1 && spec.input_time >= 1, Errc::InvalidArgument, "model input must be non-empty");
  require(!spec.layers.empty() && spec.layers.back().kind == LayerKind::Softmax, Errc::InvalidArgument,
          "model must end with a softmax stage");
  for (std::size_t i = 0; i + 1 < spec.layers.size(); ++i)
    require(spec.layers[i].kind != LayerKind::Softmax, Errc::InvalidArgument, "softmax is only allowed as the last stage");
  const auto shapes = stage_shapes(spec, spec.input_shape());
  require(shapes.back().c == spec.n_classes, Errc::ShapeMismatch,
          "network produces " + std::to_string(shapes.back().c) + " outputs for " + std::to_string(spec.n_classes) +
              " classes");
}

template <class T>
struct LayerParams {
  std::vector<T> weight;
  std::vector<T> bias;
  bool operator==(const LayerParams&) const = default;
};

/// One entry per layer; parameter-free layers hold empty vectors.
template <class T>
using ParamSet = std::vector<LayerParams<T>>;

template <class T>
ParamSet<T> zeros_like(const ParamSet<T>& p) {
  ParamSet<T> z(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    z[i].weight.assign(p[i].weight.size(), T(0));
    z[i].bias.assign(p[i].bias.size(), T(0));
  }
  return z;
}

template <class T>
class Model {
 public:
  using value_type = T;

  Model() = default;

  /// Fan-in scaled uniform weights U(-sqrt(3/fan_in), sqrt(3/fan_in)), zero biases. Weights are drawn
  /// in double and rounded, so float and double models built from one seed agree to float precision.
  Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
    validate_model_spec(spec_);
    const auto shapes = stage_shapes(spec_, spec_.input_shape());
    params_.resize(spec_.layers.size());
    Shape4 in = spec_.input_shape();
    for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
      const auto& l = spec_.layers[i];
      const auto [nw, nb] = param_counts(l, in);
      if (nw > 0) {
        const std::size_t fan_in = nw / nb;  // one bias per output map
        const double bound = std::sqrt(3.0 / static_cast<double>(fan_in));
        std::mt19937_64 rng(derive_seed(seed, i));
        params_[i].weight.resize(nw);
        for (auto& w : params_[i].weight) w = static_cast<T>((2.0 * uniform01(rng) - 1.0) * bound);
        params_[i].bias.assign(nb, T(0));
      }
      in = shapes[i];
    }
  }

  const ModelSpec& spec() const noexcept { return spec_; }
  ParamSet<T>& params() noexcept { return params_; }
  const ParamSet<T>& params() const noexcept { return params_; }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.weight.size() + p.bias.size();
    return n;
  }

  template <class U>
  Model<U> cast() const {
    Model<U> m;
    m.spec_ = spec_;
    m.params_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      m.params_[i].weight.assign(params_[i].weight.begin(), params_[i].weight.end());
      m.params_[i].bias.assign(params_[i].bias.begin(), params_[i].bias.end());
    }
    return m;
  }

  /// Replaces all parameters; sizes must match the architecture.
  void set_params(ParamSet<T> p) {
    require(p.size() == params_.size(), Errc::ShapeMismatch, "parameter set has wrong layer count");
    for (std::size_t i = 0; i < p.size(); ++i)
      require(p[i].weight.size() == params_[i].weight.size() && p[i].bias.size() == params_[i].bias.size(),
              Errc::ShapeMismatch, "parameter block size mismatch at layer " + std::to_string(i + 1));
    params_ = std::move(p);
  }

 private:
  template <class>
  friend class Model;

  ModelSpec spec_;
  ParamSet<T> params_;
};

/// Intermediate state kept by a training-mode forward pass for backpropagation.
template <class T>
struct ForwardTrace {
  std::vector<Tensor4<T>> acts;  // acts[0] is the input, acts[i + 1] the output of layer i
  std::vector<std::vector<std::uint32_t>> argmax;
  std::vector<std::vector<T>> masks;
};

/// Class probabilities, shape (batch, n_classes, 1, 1). Dropout is active only when `train_mode`;
/// masks derive from `rng_seed`, so equal seeds reproduce equal outputs.
template <class T>
Tensor4<T> forward(const Model<T>& model, const Tensor4<T>& batch, bool train_mode, std::uint64_t rng_seed,
                   ForwardTrace<T>* trace = nullptr) {
  const auto& spec = model.spec();
  const auto expected = spec.input_shape(batch.shape.n);
  require(batch.shape == expected && batch.data.size() == expected.size(), Errc::ShapeMismatch,
          "batch shape " + batch.shape.str() + " does not match model input " + expected.str());
  Tensor4<T> held;
  if (trace) {
    trace->acts.clear();
    trace->acts.reserve(spec.layers.size() + 1);
    trace->acts.push_back(batch);
    trace->argmax.assign(spec.layers.size(), {});
    trace->masks.assign(spec.layers.size(), {});
  }
  const Tensor4<T>* cur = trace ? &trace->acts.back() : &batch;
  std::vector<T> scratch;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const auto& p = model.params()[i];
    Tensor4<T> x;
    switch (l.kind) {
      case LayerKind::Conv:
        x = conv_valid_forward<T>(*cur, p.weight, p.bias, l.out_maps, l.kernel, l.stride, scratch);
        if (l.activation == Activation::Elu) elu_inplace<T>(x.data);
        break;
      case LayerKind::MaxPool:
        x = maxpool_forward<T>(*cur, l.kernel, l.stride, trace ? &trace->argmax[i] : nullptr);
        break;
      case LayerKind::Dropout:
        x = *cur;
        if (train_mode && l.rate > 0.0) {
          auto mask = dropout_mask<T>(x.data.size(), l.rate, derive_seed(rng_seed, i));
          for (std::size_t k = 0; k < x.data.size(); ++k) x.data[k] *= mask[k];
          if (trace) trace->masks[i] = std::move(mask);
        }
        break;
      case LayerKind::Flatten:
        x = *cur;
        x.reshape(layer_output_shape(l, x.shape));
        break;
      case LayerKind::Dense:
        x = dense_forward<T>(*cur, p.weight, p.bias, l.out_maps);
        if (l.activation == Activation::Elu) elu_inplace<T>(x.data);
        break;
      case LayerKind::Softmax:
        x = l.out_maps > 0 ? dense_forward<T>(*cur, p.weight, p.bias, l.out_maps) : *cur;
        softmax_inplace(x);
        break;
    }
    if (trace) {
      trace->acts.push_back(std::move(x));
      cur = &trace->acts.back();
    } else {
      held = std::move(x);
      cur = &held;
    }
  }
  return *cur;
}

enum class Reduction { Mean, Sum };

template <class T>
struct LossAndGrad {
  double loss = 0.0;
  ParamSet<T> grads;
  Tensor4<T> probabilities;
};

/// Cross-entropy of `probs` against `labels` (mean or sum over the batch).
template <class T>
double cross_entropy(const Tensor4<T>& probs, std::span<const std::size_t> labels, Reduction red = Reduction::Mean) {
  double total = 0.0;
  for (std::size_t n = 0; n < probs.shape.n; ++n) {
    const double p = static_cast<double>(probs.at(n, labels[n], 0, 0));
    total -= std::log(std::max(p, std::numeric_limits<double>::min()));
  }
  return red == Reduction::Mean ? total / static_cast<double>(probs.shape.n) : total;
}

struct BackwardOptions {
  bool train_mode = true;
  std::uint64_t rng_seed = 0;
  Reduction reduction = Reduction::Mean;
};

/// Cross-entropy loss and its gradient with respect to every parameter.
template <class T>
LossAndGrad<T> backward(const Model<T>& model, const Tensor4<T>& batch, std::span<const std::size_t> labels,
                        BackwardOptions opt = {}) {
  const auto& spec = model.spec();
  require(labels.size() == batch.shape.n, Errc::ShapeMismatch, "one label per sample required");
  for (auto y : labels)
    require(y < spec.n_classes, Errc::LabelOutOfRange,
            "label " + std::to_string(y) + " outside " + std::to_string(spec.n_classes) + " classes");

  ForwardTrace<T> trace;
  LossAndGrad<T> res;
  res.probabilities = forward(model, batch, opt.train_mode, opt.rng_seed, &trace);
  res.loss = cross_entropy(res.probabilities, labels, opt.reduction);
  res.grads = zeros_like(model.params());

  const T scale = opt.reduction == Reduction::Mean ? T(1) / static_cast<T>(batch.shape.n) : T(1);
  Tensor4<T> g = res.probabilities;  // d loss / d logits = (p - onehot) * scale
  for (std::size_t n = 0; n < g.shape.n; ++n) {
    g.at(n, labels[n], 0, 0) -= T(1);
    for (auto& v : g.sample(n)) v *= scale;
  }

  std::vector<T> scratch, scratch2;
  for (std::size_t li = spec.layers.size(); li-- > 0;) {
    const auto& l = spec.layers[li];
    const auto& p = model.params()[li];
    auto& gp = res.grads[li];
    const Tensor4<T>& in = trace.acts[li];
    const Tensor4<T>& out = trace.acts[li + 1];
    switch (l.kind) {
      case LayerKind::Softmax:
        if (l.out_maps > 0) g = dense_backward<T>(in, p.weight, g, gp.weight, gp.bias);
        break;
      case LayerKind::Dense:
        if (l.activation == Activation::Elu) elu_backward_inplace<T>(out.data, g.data);
        g = dense_backward<T>(in, p.weight, g, gp.weight, gp.bias);
        break;
      case LayerKind::Flatten: g.reshape(in.shape); break;
      case LayerKind::MaxPool: g = maxpool_backward<T>(in.shape, g, trace.argmax[li]); break;
      case LayerKind::Dropout:
        if (!trace.masks[li].empty())
          for (std::size_t k = 0; k < g.data.size(); ++k) g.data[k] *= trace.masks[li][k];
        break;
      case LayerKind::Conv: {
        if (l.activation == Activation::Elu) elu_backward_inplace<T>(out.data, g.data);
        Tensor4<T> gin;
        conv_valid_backward<T>(in, p.weight, g, l.kernel, l.stride, gp.weight, gp.bias, li > 0 ? &gin : nullptr,
                               scratch, scratch2);
        g = std::move(gin);
        break;
      }
    }
  }
  return res;
}

/// Argmax class per sample.
template <class T>
std::vector<std::size_t> predict_classes(const Tensor4<T>& probs) {
  std::vector<std::size_t> out(probs.shape.n);
  for (std::size_t n = 0; n < probs.shape.n; ++n) {
    const auto row = probs.sample(n);
    out[n] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace vpg::nn
