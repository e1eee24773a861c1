#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vpg/error.hpp"

namespace vpg::nn {

/// (batch, feature maps, spatial, time). Dense activations use (batch, features, 1, 1).
struct Shape4 {
  std::size_t n = 0, c = 0, h = 0, w = 0;

  constexpr std::size_t size() const noexcept { return n * c * h * w; }
  constexpr std::size_t per_sample() const noexcept { return c * h * w; }
  bool operator==(const Shape4&) const = default;

  std::string str() const {
    return "(" + std::to_string(n) + ", " + std::to_string(c) + ", " + std::to_string(h) + ", " + std::to_string(w) + ")";
  }
};

template <class T>
struct Tensor4 {
  Shape4 shape;
  std::vector<T> data;

  Tensor4() = default;
  explicit Tensor4(Shape4 s, T fill = T(0)) : shape(s), data(s.size(), fill) {}
  Tensor4(Shape4 s, std::vector<T> values) : shape(s), data(std::move(values)) {
    require(data.size() == shape.size(), Errc::ShapeMismatch, "tensor data length does not match shape " + shape.str());
  }

  std::span<T> sample(std::size_t i) noexcept { return {data.data() + i * shape.per_sample(), shape.per_sample()}; }
  std::span<const T> sample(std::size_t i) const noexcept {
    return {data.data() + i * shape.per_sample(), shape.per_sample()};
  }
  T& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) noexcept {
    return data[((n * shape.c + c) * shape.h + h) * shape.w + w];
  }
  T at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const noexcept {
    return data[((n * shape.c + c) * shape.h + h) * shape.w + w];
  }

  void reshape(Shape4 s) {
    require(s.size() == data.size(), Errc::ShapeMismatch, "reshape changes element count");
    shape = s;
  }
};

}  // namespace vpg::nn
