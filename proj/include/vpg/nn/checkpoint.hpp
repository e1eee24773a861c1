#pragma once

// Checkpoint layout (all integers u32 little-endian, all reals IEEE-754 binary32 little-endian):
//
//   header   "VPGMODEL" (8 bytes) | version (=1) | n_channels | input_time | n_classes | n_layers
//   layers   n_layers records of: kind | kernel_h | kernel_w | stride_h | stride_w | out_maps |
//            activation | rate (f32) | n_weights | n_biases
//   payload  for each layer in order: n_weights f32, then n_biases f32
//
// kind: 0 conv, 1 maxpool, 2 dropout, 3 flatten, 4 dense, 5 softmax. activation: 0 none, 1 elu.

#include <array>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "vpg/io.hpp"
#include "vpg/nn/model.hpp"

namespace vpg::nn {

inline constexpr std::array<char, 8> kCheckpointMagic{'V', 'P', 'G', 'M', 'O', 'D', 'E', 'L'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint64_t v) {
    require(v <= 0xFFFFFFFFull, Errc::InvalidCheckpoint, "value does not fit in 32 bits");
    put(vpg::detail::to_little_endian(static_cast<std::uint32_t>(v)));
  }
  void f32(double v) { put(vpg::detail::to_little_endian(std::bit_cast<std::uint32_t>(static_cast<float>(v)))); }
  void raw(const char* p, std::size_t n) { buf_.append(p, n); }
  const std::string& bytes() const noexcept { return buf_; }

 private:
  void put(std::uint32_t v) { buf_.append(reinterpret_cast<const char*>(&v), 4); }
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string bytes) : buf_(std::move(bytes)) {}
  std::uint32_t u32() { return vpg::detail::to_little_endian(take()); }
  float f32() { return std::bit_cast<float>(vpg::detail::to_little_endian(take())); }
  void expect(const char* p, std::size_t n) {
    require(pos_ + n <= buf_.size() && std::memcmp(buf_.data() + pos_, p, n) == 0, Errc::InvalidCheckpoint,
            "bad checkpoint magic");
    pos_ += n;
  }
  bool done() const noexcept { return pos_ == buf_.size(); }

 private:
  std::uint32_t take() {
    require(pos_ + 4 <= buf_.size(), Errc::InvalidCheckpoint, "checkpoint truncated");
    std::uint32_t v;
    std::memcpy(&v, buf_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  std::string buf_;
  std::size_t pos_ = 0;
};

}  // namespace detail

template <class T>
std::string encode_checkpoint(const Model<T>& model) {
  const auto& spec = model.spec();
  detail::ByteWriter w;
  w.raw(kCheckpointMagic.data(), kCheckpointMagic.size());
  w.u32(kCheckpointVersion);
  w.u32(spec.n_channels);
  w.u32(spec.input_time);
  w.u32(spec.n_classes);
  w.u32(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    w.u32(static_cast<std::uint32_t>(l.kind));
    w.u32(l.kernel.h);
    w.u32(l.kernel.w);
    w.u32(l.stride.h);
    w.u32(l.stride.w);
    w.u32(l.out_maps);
    w.u32(static_cast<std::uint32_t>(l.activation));
    w.f32(l.rate);
    w.u32(model.params()[i].weight.size());
    w.u32(model.params()[i].bias.size());
  }
  for (const auto& p : model.params()) {
    for (auto v : p.weight) w.f32(static_cast<double>(v));
    for (auto v : p.bias) w.f32(static_cast<double>(v));
  }
  return w.bytes();
}

template <class T = float>
Model<T> decode_checkpoint(std::string bytes) {
  detail::ByteReader r(std::move(bytes));
  r.expect(kCheckpointMagic.data(), kCheckpointMagic.size());
  const auto version = r.u32();
  require(version == kCheckpointVersion, Errc::InvalidCheckpoint, "unsupported checkpoint version " + std::to_string(version));
  ModelSpec spec;
  spec.n_channels = r.u32();
  spec.input_time = r.u32();
  spec.n_classes = r.u32();
  const auto n_layers = r.u32();
  std::vector<std::pair<std::size_t, std::size_t>> counts;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    LayerSpec l;
    const auto kind = r.u32();
    require(kind <= static_cast<std::uint32_t>(LayerKind::Softmax), Errc::InvalidCheckpoint, "unknown layer kind");
    l.kind = static_cast<LayerKind>(kind);
    l.kernel = {r.u32(), r.u32()};
    l.stride = {r.u32(), r.u32()};
    l.out_maps = r.u32();
    const auto act = r.u32();
    require(act <= static_cast<std::uint32_t>(Activation::Elu), Errc::InvalidCheckpoint, "unknown activation");
    l.activation = static_cast<Activation>(act);
    l.rate = r.f32();
    spec.layers.push_back(l);
    const auto n_weights = r.u32();
    const auto n_biases = r.u32();
    counts.emplace_back(n_weights, n_biases);
  }
  Model<T> model;
  try {
    model = Model<T>(spec, 0);
  } catch (const Error& e) {
    fail(Errc::InvalidCheckpoint, std::string("invalid architecture: ") + e.what());
  }
  ParamSet<T> params(n_layers);
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    require(counts[i].first == model.params()[i].weight.size() && counts[i].second == model.params()[i].bias.size(),
            Errc::InvalidCheckpoint, "parameter count mismatch at layer " + std::to_string(i + 1));
    params[i].weight.resize(counts[i].first);
    params[i].bias.resize(counts[i].second);
    for (auto& v : params[i].weight) v = static_cast<T>(r.f32());
    for (auto& v : params[i].bias) v = static_cast<T>(r.f32());
  }
  require(r.done(), Errc::InvalidCheckpoint, "trailing bytes after checkpoint payload");
  model.set_params(std::move(params));
  return model;
}

template <class T>
void save_checkpoint(const Model<T>& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(os), Errc::IoError, "cannot write " + path.string());
  const auto bytes = encode_checkpoint(model);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(static_cast<bool>(os), Errc::IoError, "write failed for " + path.string());
}

template <class T = float>
Model<T> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint<T>(vpg::detail::read_file(path));
}

}  // namespace vpg::nn
