#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "vpg/nn/model.hpp"
#include "vpg/nn/optimizer.hpp"

namespace vpg::nn {

struct TrainConfig {
  AdamConfig adam{};
  std::size_t batch_size = 16;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;  // epochs without validation improvement before stopping
  std::uint64_t seed = 0;
};

struct TrainHistory {
  std::vector<double> train_loss;  // mean over batches, per epoch
  std::vector<double> val_loss;    // empty when no validation set
  std::size_t best_epoch = 0;      // 1-based; parameters are restored to this epoch
  std::size_t epochs_run = 0;
};

struct EpochReport {
  std::size_t epoch;
  double train_loss;
  double val_loss;  // NaN without validation
};

/// Copies the samples at `idx` into one batch tensor.
template <class T>
Tensor4<T> gather(const Tensor4<T>& x, std::span<const std::size_t> idx) {
  Tensor4<T> out(Shape4{idx.size(), x.shape.c, x.shape.h, x.shape.w});
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const auto src = x.sample(idx[k]);
    std::copy(src.begin(), src.end(), out.sample(k).begin());
  }
  return out;
}

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<std::size_t> predictions;
};

/// Inference-mode loss and accuracy in batches of `batch_size`.
template <class T>
EvalResult evaluate(const Model<T>& model, const Tensor4<T>& x, std::span<const std::size_t> y,
                    std::size_t batch_size = 64) {
  require(x.shape.n == y.size(), Errc::ShapeMismatch, "one label per sample required");
  EvalResult r;
  if (y.empty()) return r;
  std::size_t correct = 0;
  double loss = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < y.size(); start += batch_size) {
    idx.resize(std::min(batch_size, y.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto probs = forward(model, gather(x, idx), false, 0);
    loss += cross_entropy(probs, y.subspan(start, idx.size()), Reduction::Sum);
    for (std::size_t k = 0; const auto p : predict_classes(probs)) {
      r.predictions.push_back(p);
      correct += (p == y[start + k++]);
    }
  }
  r.loss = loss / static_cast<double>(y.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(y.size());
  return r;
}

/// Mini-batch Adam on mean cross-entropy. With a validation set, stops after `patience` epochs
/// without improvement and restores the best parameters. Single-threaded and seeded: the same
/// inputs and config give bit-identical results.
template <class T>
TrainHistory fit(Model<T>& model, const Tensor4<T>& x, std::span<const std::size_t> y, const Tensor4<T>* x_val,
                 std::span<const std::size_t> y_val, const TrainConfig& cfg,
                 const std::function<void(const EpochReport&)>& on_epoch = {}) {
  require(x.shape.n == y.size() && x.shape.n > 0, Errc::ShapeMismatch, "training set needs one label per sample");
  require(cfg.batch_size > 0, Errc::InvalidArgument, "batch size must be positive");
  const bool has_val = x_val != nullptr && x_val->shape.n > 0;

  TrainHistory hist;
  OptimizerState<T> opt;
  opt.config = cfg.adam;
  std::mt19937_64 shuffle_rng(derive_seed(cfg.seed, seed_stream("shuffle")));
  std::uint64_t dropout_counter = 0;
  const std::uint64_t dropout_root = derive_seed(cfg.seed, seed_stream("dropout"));

  std::vector<std::size_t> order(y.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<std::size_t> batch_idx, batch_y;
  double best = std::numeric_limits<double>::infinity();
  ParamSet<T> best_params = model.params();
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    portable_shuffle(order, shuffle_rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, order.size() - start);
      batch_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                       order.begin() + static_cast<std::ptrdiff_t>(start + n));
      batch_y.resize(n);
      for (std::size_t k = 0; k < n; ++k) batch_y[k] = y[batch_idx[k]];
      auto step = backward(model, gather(x, batch_idx), batch_y,
                           {true, derive_seed(dropout_root, dropout_counter++), Reduction::Mean});
      optimizer_step(model.params(), step.grads, opt);
      total += step.loss;
      ++batches;
    }
    hist.train_loss.push_back(total / static_cast<double>(batches));
    hist.epochs_run = epoch;

    double val = std::numeric_limits<double>::quiet_NaN();
    if (has_val) {
      val = evaluate(model, *x_val, y_val).loss;
      hist.val_loss.push_back(val);
      if (val < best) {
        best = val;
        best_params = model.params();
        hist.best_epoch = epoch;
        since_best = 0;
      } else {
        ++since_best;
      }
    } else {
      hist.best_epoch = epoch;
    }
    if (on_epoch) on_epoch({epoch, hist.train_loss.back(), val});
    if (has_val && since_best >= cfg.patience) break;
  }
  if (has_val) model.set_params(std::move(best_params));
  return hist;
}

}  // namespace vpg::nn
