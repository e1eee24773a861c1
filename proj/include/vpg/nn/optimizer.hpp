#pragma once

#include <cmath>
#include <cstdint>

#include "vpg/nn/model.hpp"

namespace vpg::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment state. Moments are allocated on the first step.
template <class T>
struct OptimizerState {
  AdamConfig config{};
  std::uint64_t step = 0;
  ParamSet<T> first_moment;
  ParamSet<T> second_moment;
};

namespace detail {

inline bool same_layout(const auto& a, const auto& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i].weight.size() != b[i].weight.size() || a[i].bias.size() != b[i].bias.size()) return false;
  return true;
}

template <class T>
void adam_update(std::vector<T>& p, const std::vector<T>& g, std::vector<T>& m, std::vector<T>& v, const AdamConfig& c,
                 double bias1, double bias2) {
  const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
  const T lr = static_cast<T>(c.learning_rate), eps = static_cast<T>(c.epsilon);
  const T inv_bias1 = static_cast<T>(1.0 / bias1), inv_bias2 = static_cast<T>(1.0 / bias2);
  for (std::size_t k = 0; k < p.size(); ++k) {
    m[k] = b1 * m[k] + (T(1) - b1) * g[k];
    v[k] = b2 * v[k] + (T(1) - b2) * g[k] * g[k];
    const T m_hat = m[k] * inv_bias1;
    const T v_hat = v[k] * inv_bias2;
    p[k] -= lr * m_hat / (std::sqrt(v_hat) + eps);
  }
}

}  // namespace detail

/// One bias-corrected Adam step.
template <class T>
void optimizer_step(ParamSet<T>& params, const ParamSet<T>& grads, OptimizerState<T>& state) {
  require(detail::same_layout(params, grads), Errc::ShapeMismatch, "gradient layout does not match parameters");
  if (state.step == 0 && state.first_moment.empty()) {
    state.first_moment = zeros_like(params);
    state.second_moment = zeros_like(params);
  }
  require(detail::same_layout(params, state.first_moment) && detail::same_layout(params, state.second_moment),
          Errc::ShapeMismatch, "optimizer state layout does not match parameters");
  ++state.step;
  const auto t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(state.config.beta1, t);
  const double bias2 = 1.0 - std::pow(state.config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    detail::adam_update(params[i].weight, grads[i].weight, state.first_moment[i].weight, state.second_moment[i].weight,
                        state.config, bias1, bias2);
    detail::adam_update(params[i].bias, grads[i].bias, state.first_moment[i].bias, state.second_moment[i].bias,
                        state.config, bias1, bias2);
  }
}

}  // namespace vpg::nn
