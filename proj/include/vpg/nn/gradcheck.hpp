#pragma once

#include <algorithm>
#include <cmath>

#include "vpg/nn/model.hpp"

namespace vpg::nn {

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_layer = 0;  // 1-based
  std::size_t worst_index = 0;  // flat index within weights then biases
  std::size_t checked = 0;
};

/// Compares backpropagated gradients with central differences of the mean cross-entropy for every
/// parameter: max |analytic - numeric| / max(|analytic|, |numeric|, 1e-12). Dropout uses the same
/// mask for every evaluation (fixed `rng_seed`).
template <class T>
GradCheckResult gradient_check(const Model<T>& model, const Tensor4<T>& batch, std::span<const std::size_t> labels,
                               double eps, bool train_mode = true, std::uint64_t rng_seed = 0) {
  require(eps > 0.0 && std::isfinite(eps), Errc::InvalidEpsilon, "finite-difference step must be positive");
  const BackwardOptions opt{train_mode, rng_seed, Reduction::Mean};
  const auto analytic = backward(model, batch, labels, opt).grads;

  Model<T> probe = model;
  auto loss_at = [&] { return cross_entropy(forward(probe, batch, train_mode, rng_seed), labels, Reduction::Mean); };

  GradCheckResult res;
  auto check_block = [&](std::size_t layer, std::vector<T>& block, const std::vector<T>& grad, std::size_t offset) {
    for (std::size_t k = 0; k < block.size(); ++k) {
      const T saved = block[k];
      block[k] = saved + static_cast<T>(eps);
      const double up = loss_at();
      block[k] = saved - static_cast<T>(eps);
      const double down = loss_at();
      block[k] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = static_cast<double>(grad[k]);
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-12});
      ++res.checked;
      if (rel > res.max_relative_error) {
        res.max_relative_error = rel;
        res.worst_layer = layer + 1;
        res.worst_index = offset + k;
      }
    }
  };
  for (std::size_t i = 0; i < probe.params().size(); ++i) {
    auto& p = probe.params()[i];
    check_block(i, p.weight, analytic[i].weight, 0);
    check_block(i, p.bias, analytic[i].bias, p.weight.size());
  }
  return res;
}

}  // namespace vpg::nn
