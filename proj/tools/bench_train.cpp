// Times forward/backward of the proposed network on random data.

#include <chrono>
#include <cstdio>
#include <random>

#include "vpg/models.hpp"
#include "vpg/nn/optimizer.hpp"

int main(int argc, char** argv) {
  const std::size_t channels = argc > 1 ? std::stoul(argv[1]) : 16;
  const std::size_t batch = argc > 2 ? std::stoul(argv[2]) : 16;
  auto model = vpg::models::build_proposed_net<float>(channels, 1);
  vpg::nn::Tensor4<float> x(model.spec().input_shape(batch));
  std::mt19937_64 rng(3);
  for (auto& v : x.data) v = static_cast<float>(vpg::uniform01(rng));
  std::vector<std::size_t> y(batch);
  for (std::size_t i = 0; i < batch; ++i) y[i] = i % 4;

  vpg::nn::OptimizerState<float> opt;
  auto t0 = std::chrono::steady_clock::now();
  const int steps = 5;
  for (int s = 0; s < steps; ++s) {
    auto r = vpg::nn::backward(model, x, y, {true, static_cast<std::uint64_t>(s)});
    vpg::nn::optimizer_step(model.params(), r.grads, opt);
  }
  auto t1 = std::chrono::steady_clock::now();
  for (int s = 0; s < steps; ++s) (void)vpg::nn::forward(model, x, false, 0);
  auto t2 = std::chrono::steady_clock::now();
  const double train_ms = std::chrono::duration<double, std::milli>(t1 - t0).count() / (steps * batch);
  const double infer_ms = std::chrono::duration<double, std::milli>(t2 - t1).count() / (steps * batch);
  std::printf("params=%zu  train %.2f ms/sample  inference %.2f ms/sample\n", model.parameter_count(), train_ms,
              infer_ms);
}
