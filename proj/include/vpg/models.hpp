#pragma once

// The proposed visual-imagery network:
//
//   stage  layer                          output (batch 1, C channels, 1251 samples)
//    1     conv 20 @ 1x60                 (1, 20, C, 1192)
//    2     conv 20 @ Cx1                  (1, 20, 1, 1192)
//    3     conv 40 @ 1x30                 (1, 40, 1, 1163)
//    4     conv 80 @ 1x15                 (1, 80, 1, 1149)
//    5     dropout 0.5                    (1, 80, 1, 1149)
//    6     maxpool 1x7 / 1x7              (1, 80, 1, 164)
//    7     conv 160 @ 1x15                (1, 160, 1, 150)
//    8     maxpool 1x5 / 1x5              (1, 160, 1, 30)
//    9     conv 320 @ 1x15                (1, 320, 1, 16)
//   10     maxpool 1x5 / 1x5              (1, 320, 1, 3)
//   11     flatten                        (1, 960)
//   12     dense 960->4 + softmax         (1, 4)
//
// Every convolution is followed by an ELU.

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "vpg/nn/model.hpp"

namespace vpg::models {

using nn::Extent2;
using nn::LayerSpec;
using nn::ModelSpec;

/// Time length produced by the first convolution of the proposed network.
inline constexpr std::size_t kFirstConvOutputLength = 1192;
inline constexpr std::size_t kFirstConvKernel = 60;
/// 1192 + 60 - 1
inline constexpr std::size_t kRequiredInputLength = kFirstConvOutputLength + kFirstConvKernel - 1;
inline constexpr std::size_t kFlattenWidth = 960;

inline ModelSpec proposed_net_spec(std::size_t n_channels, std::size_t n_classes = kDefaultClassCount) {
  require(n_channels >= 1, Errc::InvalidArgument, "n_channels must be >= 1");
  ModelSpec spec;
  spec.n_channels = n_channels;
  spec.input_time = kRequiredInputLength;
  spec.n_classes = n_classes;
  spec.layers = {
      LayerSpec::conv(20, {1, kFirstConvKernel}),
      LayerSpec::conv(20, {n_channels, 1}),
      LayerSpec::conv(40, {1, 30}),
      LayerSpec::conv(80, {1, 15}),
      LayerSpec::dropout(0.5),
      LayerSpec::maxpool({1, 7}, {1, 7}),
      LayerSpec::conv(160, {1, 15}),
      LayerSpec::maxpool({1, 5}, {1, 5}),
      LayerSpec::conv(320, {1, 15}),
      LayerSpec::maxpool({1, 5}, {1, 5}),
      LayerSpec::flatten(kFlattenWidth),
      LayerSpec::softmax(n_classes),
  };
  return spec;
}

template <class T = float>
nn::Model<T> build_proposed_net(std::size_t n_channels, std::uint64_t seed, std::size_t n_classes = kDefaultClassCount) {
  return nn::Model<T>(proposed_net_spec(n_channels, n_classes), seed);
}

/// Shape after every stage. 4-D for feature maps, 2-D (batch, features) after flattening.
/// A failing stage raises nn::StageError carrying its 1-based index.
inline std::vector<std::vector<std::size_t>> shape_trace(const ModelSpec& spec, const nn::Shape4& input) {
  std::vector<std::vector<std::size_t>> out;
  bool flat = false;
  for (std::size_t i = 0; const auto& s : nn::stage_shapes(spec, input)) {
    flat = flat || spec.layers[i++].kind == nn::LayerKind::Flatten;
    if (flat) {
      out.push_back({s.n, s.c});
    } else {
      out.push_back({s.n, s.c, s.h, s.w});
    }
  }
  return out;
}

template <class T>
std::vector<std::vector<std::size_t>> shape_trace(const nn::Model<T>& model, const nn::Shape4& input) {
  return shape_trace(model.spec(), input);
}

/// Input time length the network accepts, recovered from the first convolution's output length.
inline std::size_t required_input_length(const ModelSpec& spec) {
  require(!spec.layers.empty() && spec.layers.front().kind == nn::LayerKind::Conv, Errc::InvalidArgument,
          "network does not start with a convolution");
  const auto first = nn::stage_shapes(spec, spec.input_shape()).front();
  const auto& l = spec.layers.front();
  return (first.w - 1) * l.stride.w + l.kernel.w;
}

inline nlohmann::json to_json(const LayerSpec& l) {
  nlohmann::json j{{"kind", std::string(nn::to_string(l.kind))}};
  switch (l.kind) {
    case nn::LayerKind::Conv:
      j["out_maps"] = l.out_maps;
      j["kernel"] = {l.kernel.h, l.kernel.w};
      j["stride"] = {l.stride.h, l.stride.w};
      j["activation"] = l.activation == nn::Activation::Elu ? "elu" : "none";
      break;
    case nn::LayerKind::MaxPool:
      j["kernel"] = {l.kernel.h, l.kernel.w};
      j["stride"] = {l.stride.h, l.stride.w};
      break;
    case nn::LayerKind::Dropout: j["rate"] = l.rate; break;
    case nn::LayerKind::Flatten: j["width"] = l.out_maps; break;
    case nn::LayerKind::Dense:
      j["out_features"] = l.out_maps;
      j["activation"] = l.activation == nn::Activation::Elu ? "elu" : "none";
      break;
    case nn::LayerKind::Softmax: j["out_features"] = l.out_maps; break;
  }
  return j;
}

inline nlohmann::json to_json(const ModelSpec& spec) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : spec.layers) layers.push_back(to_json(l));
  return {{"n_channels", spec.n_channels},
          {"input_time", spec.input_time},
          {"n_classes", spec.n_classes},
          {"layers", std::move(layers)}};
}

}  // namespace vpg::models
