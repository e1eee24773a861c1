#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "vpg/dsp.hpp"
#include "vpg/transform.hpp"

using namespace vpg;
using namespace vpg::transform;

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

Epoch from_rows(std::vector<std::vector<float>> rows) {
  Epoch e(rows.size(), rows.front().size(), 250.0, 0, TrialKind::Perception);
  for (std::size_t c = 0; c < rows.size(); ++c) std::copy(rows[c].begin(), rows[c].end(), e.row(c).begin());
  return e;
}

}  // namespace

TEST(MinmaxNormalize, DirectExample) {
  const auto [out, rec] = minmax_normalize(from_rows({{2, 4, 6}}));
  EXPECT_EQ(out.data, (std::vector<float>{0.0f, 0.5f, 1.0f}));
  EXPECT_EQ(rec.mins, std::vector<double>{2.0});
  EXPECT_EQ(rec.maxs, std::vector<double>{6.0});
}

TEST(MinmaxNormalize, ConstantChannelIsDegenerate) {
  EXPECT_EQ(code_of([] { minmax_normalize(from_rows({{1, 2, 3}, {5, 5, 5}})); }), Errc::DegenerateRange);
  EXPECT_EQ(code_of([] { minmax_normalize(from_rows({{5, 5, 5}, {5, 5, 5}}), NormScope::PerTrial); }),
            Errc::DegenerateRange);
  // A constant channel is fine under per-trial scope as long as the trial varies.
  EXPECT_NO_THROW(minmax_normalize(from_rows({{1, 2, 3}, {5, 5, 5}}), NormScope::PerTrial));
}

TEST(MinmaxNormalize, RandomEpochsHitExactUnitRange) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto e = vpg::testing::random_epoch(8, 200, seed);
    const auto [out, rec] = minmax_normalize(e, NormScope::PerChannel);
    ASSERT_EQ(rec.mins.size(), 8u);
    for (std::size_t c = 0; c < 8; ++c) {
      const auto [lo, hi] = std::minmax_element(out.row(c).begin(), out.row(c).end());
      EXPECT_NEAR(*lo, 0.0, 1e-12);
      EXPECT_NEAR(*hi, 1.0, 1e-12);
    }
    const auto [t, trec] = minmax_normalize(e, NormScope::PerTrial);
    EXPECT_EQ(trec.mins.size(), 1u);
    const auto [lo, hi] = std::minmax_element(t.data.begin(), t.data.end());
    EXPECT_EQ(*lo, 0.0f);
    EXPECT_EQ(*hi, 1.0f);
  }
}

TEST(MinmaxNormalize, DenormalizeInverts) {
  const auto e = vpg::testing::random_epoch(4, 100, 3);
  for (auto scope : {NormScope::PerChannel, NormScope::PerTrial}) {
    const auto [n, rec] = minmax_normalize(e, scope);
    const auto back = denormalize(n, rec);
    for (std::size_t i = 0; i < e.data.size(); ++i) EXPECT_NEAR(back.data[i], e.data[i], 1e-5);
  }
}

TEST(MinmaxNormalize, ArgmaxPreserved) {
  const auto e = vpg::testing::random_epoch(6, 300, 21);
  const auto n = minmax_normalize(e).first;
  const auto r = reverse_modify(n);
  for (std::size_t c = 0; c < 6; ++c) {
    const auto arg = [](std::span<const float> s) { return std::max_element(s.begin(), s.end()) - s.begin(); };
    const auto argmin = [](std::span<const float> s) { return std::min_element(s.begin(), s.end()) - s.begin(); };
    EXPECT_EQ(arg(n.row(c)), arg(e.row(c)));
    EXPECT_EQ(argmin(r.row(c)), arg(e.row(c)));
  }
}

TEST(ReverseModify, Examples) {
  const auto x = from_rows({{0.0f, 0.5f, 1.0f}});
  EXPECT_EQ(reverse_modify(x, {ReversalReference::Zeros}).data, (std::vector<float>{0.0f, -0.5f, -1.0f}));
  EXPECT_EQ(reverse_modify(x, {ReversalReference::Ones}).data, (std::vector<float>{1.0f, 0.5f, 0.0f}));
}

TEST(ReverseModify, RangesAndErrors) {
  const auto n = minmax_normalize(vpg::testing::random_epoch(4, 200, 5)).first;
  const auto z = reverse_modify(n, {ReversalReference::Zeros});
  const auto [zlo, zhi] = std::minmax_element(z.data.begin(), z.data.end());
  EXPECT_EQ(*zlo, -1.0f);
  EXPECT_EQ(*zhi, 0.0f);
  const auto o = reverse_modify(n, {ReversalReference::Ones});
  const auto [olo, ohi] = std::minmax_element(o.data.begin(), o.data.end());
  EXPECT_EQ(*olo, 0.0f);
  EXPECT_EQ(*ohi, 1.0f);
  EXPECT_EQ(code_of([] { reverse_modify(from_rows({{0.0f, 1.5f}})); }), Errc::InputOutOfRange);
  EXPECT_EQ(code_of([] { reverse_modify(from_rows({{-0.1f, 0.5f}})); }), Errc::InputOutOfRange);
}

TEST(ReverseModify, CompositionMatchesPerSampleRecomputation) {
  std::mt19937_64 rng(17);
  std::vector<double> x(500);
  for (auto& v : x) v = 10.0 * standard_normal(rng);
  for (auto ref : {ReversalReference::Zeros, ReversalReference::Ones}) {
    auto y = x;
    const auto [lo, hi] = minmax_scale_inplace(std::span<double>(y));
    reverse_inplace(std::span<double>(y), ref);
    const double base = ref == ReversalReference::Zeros ? 0.0 : 1.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double expect = base - (x[i] - lo) / (hi - lo);
      EXPECT_LE(std::abs(y[i] - expect), std::abs(expect) * 1.2e-16 + 1e-300) << i;
    }
  }
}

// Welch band power removes each segment's mean and is quadratic in the signal, so the affine
// reversal leaves every channel's band-power trend unchanged.
TEST(ReverseModify, BandPowerTendencyIsUnchanged) {
  Epoch e(2, 1251, 250.0, 0, TrialKind::Perception);
  std::mt19937_64 rng(8);
  for (std::size_t t = 0; t < e.samples; ++t) {
    const double ts = static_cast<double>(t) / 250.0;
    e.at(0, t) = static_cast<float>((1.5 - 0.2 * ts) * std::sin(2 * 3.141592653589793 * 10.0 * ts) +
                                    0.3 * standard_normal(rng));
    e.at(1, t) = static_cast<float>((0.5 + 0.2 * ts) * std::sin(2 * 3.141592653589793 * 10.0 * ts) +
                                    0.3 * standard_normal(rng));
  }
  const auto n = minmax_normalize(e).first;
  const auto before = dsp::alpha_tendency(n).per_channel_slope;
  for (auto ref : {ReversalReference::Zeros, ReversalReference::Ones}) {
    const auto after = dsp::alpha_tendency(reverse_modify(n, {ref})).per_channel_slope;
    for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(after[c], before[c], 1e-6 * std::abs(before[c]));
  }
  EXPECT_LT(before[0], 0.0);
  EXPECT_GT(before[1], 0.0);
}

TEST(AssembleTrainingSet, RegimeCountsAndTags) {
  std::vector<Epoch> vi, vp;
  for (std::size_t i = 0; i < 16; ++i) vi.push_back(vpg::testing::random_epoch(3, 64, i, 250.0, i % 4));
  for (std::size_t i = 0; i < 200; ++i)
    vp.push_back(vpg::testing::random_epoch(3, 64, 1000 + i, 250.0, (i * 7) % 4, TrialKind::Perception));
  const auto vi_copy = vi;
  const auto vp_copy = vp;

  const auto only = assemble_training_set(vi, vp, Regime::ViOnly);
  EXPECT_EQ(only.epochs.size(), 16u);
  for (auto p : only.provenance) EXPECT_EQ(p, Provenance::Imagery);

  const auto both = assemble_training_set(vi, vp, Regime::ViPlusVp);
  EXPECT_EQ(both.epochs.size(), 216u);
  std::size_t modified = 0;
  for (std::size_t i = 0; i < both.epochs.size(); ++i) {
    if (both.provenance[i] != Provenance::ModifiedPerception) continue;
    ++modified;
    EXPECT_EQ(both.epochs[i].label, vp[both.source_index[i]].label);
    const auto [lo, hi] = std::minmax_element(both.epochs[i].data.begin(), both.epochs[i].data.end());
    EXPECT_EQ(*lo, -1.0f);
    EXPECT_EQ(*hi, 0.0f);
  }
  EXPECT_EQ(modified, 200u);
  EXPECT_EQ(vi, vi_copy);
  EXPECT_EQ(vp, vp_copy);
}

TEST(AssembleTrainingSet, Errors) {
  std::vector<Epoch> vi{vpg::testing::random_epoch(3, 64, 1)};
  std::vector<Epoch> bad_label{vpg::testing::random_epoch(3, 64, 2, 250.0, 7, TrialKind::Perception)};
  EXPECT_EQ(code_of([&] { assemble_training_set(vi, bad_label, Regime::ViPlusVp); }), Errc::MissingLabel);
  std::vector<Epoch> bad_shape{vpg::testing::random_epoch(2, 64, 2, 250.0, 0, TrialKind::Perception)};
  EXPECT_EQ(code_of([&] { assemble_training_set(vi, bad_shape, Regime::ViPlusVp); }), Errc::ShapeMismatch);
  // Perception is ignored entirely under ViOnly.
  EXPECT_NO_THROW(assemble_training_set(vi, bad_shape, Regime::ViOnly));
}
