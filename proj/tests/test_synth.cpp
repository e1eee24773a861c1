#include <cmath>
#include <cstring>
#include <functional>

#include <gtest/gtest.h>

#include "vpg/synth.hpp"

using namespace vpg;
using namespace vpg::synth;

namespace {

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an exception";
  return Errc::InvalidArgument;
}

SynthConfig small_config(std::uint64_t seed) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_channels = 8;
  cfg.n_occipital = 3;
  cfg.vi_trials_per_class = 10;
  cfg.vp_trials_per_class = 10;
  return cfg;
}

// Correlation of every channel with the last one: invariant to the global sign of the source, so
// it separates classes whose patterns differ only up to sign.
std::vector<double> correlation_features(const Epoch& e) {
  const auto ref = e.row(e.channels - 1);
  std::vector<double> f;
  for (std::size_t c = 0; c + 1 < e.channels; ++c) {
    const auto row = e.row(c);
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t t = 0; t < e.samples; ++t) {
      sxy += row[t] * ref[t];
      sxx += row[t] * row[t];
      syy += ref[t] * ref[t];
    }
    f.push_back(sxy / std::sqrt(sxx * syy));
  }
  return f;
}

// Multinomial logistic regression fitted by full-batch gradient descent.
struct Softmax {
  std::size_t k, d;
  std::vector<double> w;  // k x (d + 1)

  Softmax(std::size_t classes, std::size_t dims) : k(classes), d(dims), w(classes * (dims + 1), 0.0) {}

  std::vector<double> probs(const std::vector<double>& x) const {
    std::vector<double> z(k);
    double mx = -1e300;
    for (std::size_t c = 0; c < k; ++c) {
      z[c] = w[c * (d + 1) + d];
      for (std::size_t j = 0; j < d; ++j) z[c] += w[c * (d + 1) + j] * x[j];
      mx = std::max(mx, z[c]);
    }
    double s = 0;
    for (auto& v : z) s += (v = std::exp(v - mx));
    for (auto& v : z) v /= s;
    return z;
  }

  void fit(const std::vector<std::vector<double>>& x, const std::vector<std::size_t>& y, int iters, double lr) {
    for (int it = 0; it < iters; ++it) {
      std::vector<double> g(w.size(), 0.0);
      for (std::size_t i = 0; i < x.size(); ++i) {
        const auto p = probs(x[i]);
        for (std::size_t c = 0; c < k; ++c) {
          const double r = p[c] - (c == y[i] ? 1.0 : 0.0);
          for (std::size_t j = 0; j < d; ++j) g[c * (d + 1) + j] += r * x[i][j];
          g[c * (d + 1) + d] += r;
        }
      }
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr * g[j] / static_cast<double>(x.size());
    }
  }

  std::size_t predict(const std::vector<double>& x) const {
    const auto p = probs(x);
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  }
};

}  // namespace

TEST(Synth, NoiselessTendencyIsExact) {
  auto cfg = small_config(1);
  cfg.noise_sigma = 0.0;
  const auto pair = generate_synthetic(cfg);
  EXPECT_EQ(verify_tendency(pair.vi, Sign::Positive), 1.0);
  EXPECT_EQ(verify_tendency(pair.vp, Sign::Negative), 1.0);
}

TEST(Synth, DefaultConfigTendencyAtLeast95Percent) {
  SynthConfig cfg;
  cfg.seed = 7;
  const auto pair = generate_synthetic(cfg);
  EXPECT_EQ(pair.vi.epochs.size(), 200u);
  EXPECT_EQ(pair.vp.epochs.size(), 400u);
  EXPECT_GE(verify_tendency(pair.vi, Sign::Positive), 0.95);
  EXPECT_GE(verify_tendency(pair.vp, Sign::Negative), 0.95);
}

TEST(Synth, BitIdenticalForSameSeed) {
  const auto a = generate_synthetic(small_config(3)), b = generate_synthetic(small_config(3));
  ASSERT_EQ(a.vi.epochs.size(), b.vi.epochs.size());
  for (std::size_t i = 0; i < a.vi.epochs.size(); ++i)
    EXPECT_EQ(std::memcmp(a.vi.epochs[i].data.data(), b.vi.epochs[i].data.data(), a.vi.epochs[i].data.size() * 4), 0);
  EXPECT_EQ(a.vp, b.vp);
  EXPECT_NE(generate_synthetic(small_config(4)).vi, a.vi);
}

TEST(Synth, SingleTrialRegenerates) {
  const auto cfg = small_config(5);
  const auto pair = generate_synthetic(cfg);
  const auto patterns = class_patterns(cfg);
  // Trials are ordered class by class, indices run across the whole dataset.
  EXPECT_EQ(generate_trial(cfg, patterns, TrialKind::Imagery, 2, 23), pair.vi.epochs[23]);
}

TEST(Synth, ShapesLabelsAndMontage) {
  const auto pair = generate_synthetic(small_config(2));
  EXPECT_EQ(pair.vi.montage.size(), 8u);
  EXPECT_EQ(pair.vi.montage.occipital_indices(), (std::vector<std::size_t>{5, 6, 7}));
  EXPECT_EQ(pair.vi.classes.size(), 4u);
  for (const auto& e : pair.vi.epochs) {
    EXPECT_EQ(e.kind, TrialKind::Imagery);
    EXPECT_EQ(e.samples, 1251u);
    EXPECT_LT(e.label, 4u);
  }
  for (const auto& e : pair.vp.epochs) EXPECT_EQ(e.kind, TrialKind::Perception);
}

TEST(Synth, PatternsAreDistinctUpToSign) {
  const auto p = class_patterns(SynthConfig{});
  for (std::size_t i = 0; i < p.size(); ++i)
    for (std::size_t j = i + 1; j < p.size(); ++j) EXPECT_GE(detail::pattern_distance(p[i], p[j]), 0.5);
}

TEST(Synth, InvalidConfig) {
  auto bad = [](std::function<void(SynthConfig&)> edit) {
    SynthConfig c;
    edit(c);
    return code_of([&] { generate_synthetic(c); });
  };
  EXPECT_EQ(bad([](auto& c) { c.n_channels = 0; }), Errc::InvalidConfig);
  EXPECT_EQ(bad([](auto& c) { c.n_occipital = 20; }), Errc::InvalidConfig);
  EXPECT_EQ(bad([](auto& c) { c.imagery_ramp = -0.1; }), Errc::InvalidConfig);
  EXPECT_EQ(bad([](auto& c) { c.perception_ramp = 0.1; }), Errc::InvalidConfig);
  EXPECT_EQ(bad([](auto& c) { c.noise_sigma = -1; }), Errc::InvalidConfig);
  EXPECT_EQ(bad([](auto& c) { c.alpha_center_hz = 200; }), Errc::InvalidConfig);
  EXPECT_EQ(bad([](auto& c) { c.imagery_ramp = 1.0; }), Errc::InvalidConfig);  // amplitude would cross zero
  EXPECT_EQ(bad([](auto& c) { c.patterns = {{1.0}}; }), Errc::InvalidConfig);
}

TEST(Synth, VerifyTendencyRejectsEmpty) {
  Dataset empty;
  empty.montage = Montage({"O1"});
  EXPECT_EQ(code_of([&] { verify_tendency(empty, Sign::Positive); }), Errc::EmptyDataset);
}

// A simple linear model on sign-invariant spatial features must beat chance clearly, both within
// imagery and when trained on perception only.
TEST(Synth, ClassesAreLinearlyLearnable) {
  SynthConfig cfg;
  cfg.seed = 11;
  cfg.vi_trials_per_class = 40;
  cfg.vp_trials_per_class = 40;
  const auto pair = generate_synthetic(cfg);
  std::vector<std::vector<double>> xi, xp;
  std::vector<std::size_t> yi, yp;
  for (const auto& e : pair.vi.epochs) xi.push_back(correlation_features(e)), yi.push_back(e.label);
  for (const auto& e : pair.vp.epochs) xp.push_back(correlation_features(e)), yp.push_back(e.label);

  // Even-indexed imagery trials train, odd-indexed ones test.
  std::vector<std::vector<double>> xtr, xte;
  std::vector<std::size_t> ytr, yte;
  for (std::size_t i = 0; i < xi.size(); ++i) {
    (i % 2 ? xte : xtr).push_back(xi[i]);
    (i % 2 ? yte : ytr).push_back(yi[i]);
  }
  auto accuracy = [&](const Softmax& m) {
    std::size_t ok = 0;
    for (std::size_t i = 0; i < xte.size(); ++i) ok += m.predict(xte[i]) == yte[i];
    return static_cast<double>(ok) / static_cast<double>(xte.size());
  };
  Softmax within(4, xi[0].size());
  within.fit(xtr, ytr, 400, 1.0);
  EXPECT_GE(accuracy(within), 0.45);

  Softmax transfer(4, xp[0].size());
  transfer.fit(xp, yp, 400, 1.0);
  EXPECT_GE(accuracy(transfer), 0.45);
}
