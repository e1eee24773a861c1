#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "test_support.hpp"
#include "vpg/dsp.hpp"

using namespace vpg;
using namespace vpg::dsp;

namespace {

constexpr double kPi = std::numbers::pi;

// Roots of a(z) = z^n + a1 z^(n-1) + ... + an from the companion matrix.
std::vector<std::complex<double>> poles_by_companion(const std::vector<double>& a) {
  const auto n = static_cast<Eigen::Index>(a.size() - 1);
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) comp(0, j) = -a[static_cast<std::size_t>(j + 1)] / a[0];
  for (Eigen::Index i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
  Eigen::EigenSolver<Eigen::MatrixXd> es(comp);
  std::vector<std::complex<double>> out;
  for (Eigen::Index i = 0; i < n; ++i) out.push_back(es.eigenvalues()(i));
  return out;
}

// |H(e^jw)| by summing each polynomial term directly.
double gain_oracle(const FilterCoefficients& c, double f, double fs) {
  const double w = 2.0 * kPi * f / fs;
  std::complex<double> num = 0, den = 0;
  for (std::size_t k = 0; k < c.numerator.size(); ++k) num += c.numerator[k] * std::polar(1.0, -w * static_cast<double>(k));
  for (std::size_t k = 0; k < c.denominator.size(); ++k)
    den += c.denominator[k] * std::polar(1.0, -w * static_cast<double>(k));
  return std::abs(num / den);
}

double db(double g) { return 20.0 * std::log10(g); }

std::vector<double> sine(double f, double amp, double fs, std::size_t n, double phase = 0.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * kPi * f * static_cast<double>(i) / fs + phase);
  return x;
}

double rms_middle(const std::vector<double>& x) {
  double s = 0.0;
  const std::size_t a = x.size() / 4, b = 3 * x.size() / 4;
  for (std::size_t i = a; i < b; ++i) s += x[i] * x[i];
  return std::sqrt(s / static_cast<double>(b - a));
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an exception";
  return Errc::InvalidArgument;
}

Epoch ramp_epoch(double a0, double a1, double fs = 250.0, std::size_t n = 1251) {
  Epoch e(1, n, fs, 0, TrialKind::Imagery);
  for (std::size_t i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(n - 1);
    e.data[i] = static_cast<float>((a0 + (a1 - a0) * u) * std::sin(2.0 * kPi * 10.0 * static_cast<double>(i) / fs));
  }
  return e;
}

}  // namespace

TEST(DesignBandpass, PolesInsideUnitCircleByCompanionMatrix) {
  const auto c = design_bandpass({8.0, 13.0, 4, 250.0});
  EXPECT_EQ(c.denominator.size(), 9u);
  EXPECT_DOUBLE_EQ(c.denominator[0], 1.0);
  double max_mag = 0.0;
  for (auto p : poles_by_companion(c.denominator)) max_mag = std::max(max_mag, std::abs(p));
  EXPECT_LT(max_mag, 1.0);
  EXPECT_TRUE(is_stable(c.denominator));
}

TEST(DesignBandpass, StableOrRejectedAcrossSpecs) {
  // High orders on narrow low bands push poles so close to z = 1 that the expanded polynomial loses
  // them; those designs must be refused, never returned unstable.
  std::size_t accepted = 0;
  for (double fs : {250.0, 500.0, 1000.0})
    for (int order : {1, 2, 3, 4, 5})
      for (auto band : {Band{1.0, 4.0}, Band{8.0, 13.0}, Band{30.0, 45.0}}) {
        FilterCoefficients c;
        try {
          c = design_bandpass({band.low_hz, band.high_hz, order, fs});
        } catch (const Error& e) {
          EXPECT_EQ(e.code(), Errc::UnstableFilter);
          continue;
        }
        ++accepted;
        for (auto p : poles_by_companion(c.denominator)) EXPECT_LT(std::abs(p), 1.0) << fs << " " << order;
      }
  EXPECT_GE(accepted, 40u);
  // Alpha-band designs used in practice all succeed.
  for (double fs : {250.0, 500.0, 1000.0})
    for (int order : {2, 4}) EXPECT_NO_THROW(design_bandpass({8.0, 13.0, order, fs}));
}

TEST(DesignBandpass, MagnitudeResponseByIndependentEvaluation) {
  const auto c = design_bandpass({8.0, 13.0, 4, 250.0});
  EXPECT_LE(std::abs(db(gain_oracle(c, 10.5, 250.0))), 1.0);
  EXPECT_LE(db(gain_oracle(c, 2.0, 250.0)), -20.0);
  EXPECT_LE(db(gain_oracle(c, 30.0, 250.0)), -20.0);
  // Butterworth band edges sit at -3 dB.
  EXPECT_NEAR(db(gain_oracle(c, 8.0, 250.0)), -3.01, 0.05);
  EXPECT_NEAR(db(gain_oracle(c, 13.0, 250.0)), -3.01, 0.05);
  for (double f : {0.5, 5.0, 10.5, 20.0, 60.0})
    EXPECT_NEAR(std::abs(frequency_response(c, f, 250.0)), gain_oracle(c, f, 250.0),
                std::max(1e-9 * gain_oracle(c, f, 250.0), 1e-14));
}

TEST(StabilityCheck, KnownPolynomials) {
  EXPECT_NEAR(max_pole_magnitude(std::vector<double>{1.0, 0.0, -0.25}), 0.5, 1e-12);
  EXPECT_TRUE(is_stable(std::vector<double>{1.0, -0.9}));
  EXPECT_FALSE(is_stable(std::vector<double>{1.0, -1.1}));
  EXPECT_FALSE(is_stable(std::vector<double>{1.0, 0.0, 1.0}));  // poles on the unit circle
  // Expanded from distinct real roots, the largest just inside the circle.
  std::vector<double> a{1.0};
  for (double r : {0.995, 0.95, 0.9, -0.5, 0.2, -0.8}) {
    a.push_back(0.0);
    for (std::size_t i = a.size() - 1; i > 0; --i) a[i] -= r * a[i - 1];
  }
  EXPECT_NEAR(max_pole_magnitude(a), 0.995, 1e-9);
  EXPECT_TRUE(is_stable(a));
}

TEST(DesignBandpass, Errors) {
  EXPECT_EQ(code_of([] { design_bandpass({13.0, 8.0, 4, 250.0}); }), Errc::InvalidBand);
  EXPECT_EQ(code_of([] { design_bandpass({8.0, 8.0, 4, 250.0}); }), Errc::InvalidBand);
  EXPECT_EQ(code_of([] { design_bandpass({8.0, 130.0, 4, 250.0}); }), Errc::NyquistViolation);
  EXPECT_EQ(code_of([] { design_bandpass({8.0, 125.0, 4, 250.0}); }), Errc::NyquistViolation);
}

TEST(FilterSignal, SteadyStateGainMatchesResponse) {
  const auto c = design_bandpass({8.0, 13.0, 4, 250.0});
  for (double f : {2.0, 10.5, 30.0}) {
    const auto x = sine(f, 1.0, 250.0, 5000);
    const double one_pass = rms_middle(filter_signal(x, c, false)) / rms_middle(x);
    const double two_pass = rms_middle(filter_signal(x, c, true)) / rms_middle(x);
    const double g = gain_oracle(c, f, 250.0);
    EXPECT_NEAR(one_pass, g, 1e-3 + 0.01 * g) << f;
    EXPECT_NEAR(two_pass, g * g, 1e-3 + 0.01 * g * g) << f;
  }
  const auto pass = filter_signal(sine(10.5, 1.0, 250.0, 5000), c, true);
  EXPECT_LE(std::abs(db(rms_middle(pass) / std::sqrt(0.5))), 1.0);
}

TEST(FilterSignal, ZeroPhasePreservesPeakIndex) {
  const auto c = design_bandpass({8.0, 13.0, 4, 250.0});
  std::vector<double> x(1001, 0.0);
  for (int k = -20; k <= 20; ++k) x[500 + k] = std::exp(-0.5 * k * k / 16.0) * std::cos(2.0 * kPi * 10.0 * k / 250.0);
  const auto y = filter_signal(x, c, true);
  const auto peak = std::max_element(y.begin(), y.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
  EXPECT_EQ(peak - y.begin(), 500);
  // and symmetric about it, up to the edge transient that survives 500 samples of decay
  for (int k = 1; k < 200; ++k) EXPECT_NEAR(y[500 + k], y[500 - k], 1e-6);
}

TEST(FilterSignal, Linearity) {
  const auto c = design_bandpass({8.0, 13.0, 4, 250.0});
  std::mt19937_64 rng(4);
  std::vector<double> x(800), y(800), mix(800);
  for (std::size_t i = 0; i < 800; ++i) {
    x[i] = standard_normal(rng);
    y[i] = standard_normal(rng);
    mix[i] = 2.5 * x[i] - 0.75 * y[i];
  }
  for (bool zp : {false, true}) {
    const auto fx = filter_signal(x, c, zp), fy = filter_signal(y, c, zp), fm = filter_signal(mix, c, zp);
    for (std::size_t i = 0; i < 800; ++i) {
      const double expect = 2.5 * fx[i] - 0.75 * fy[i];
      // Eighth-order direct form amplifies rounding, hence the loose bound.
      EXPECT_NEAR(fm[i], expect, 1e-7 * std::max(1.0, std::abs(expect)));
    }
  }
}

TEST(FilterEpoch, ZeroEpochStaysZeroAndChannelsIndependent) {
  const auto c = design_bandpass({8.0, 13.0, 4, 250.0});
  Epoch z(3, 600, 250.0, 0, TrialKind::Imagery);
  for (float v : filter_epoch(z, c).data) EXPECT_EQ(v, 0.0f);

  auto e = vpg::testing::random_epoch(3, 600, 8);
  const auto f = filter_epoch(e, c);
  Epoch single(1, 600, 250.0, 0, TrialKind::Imagery);
  std::copy(e.row(1).begin(), e.row(1).end(), single.data.begin());
  const auto fs = filter_epoch(single, c);
  for (std::size_t t = 0; t < 600; ++t) EXPECT_EQ(f.at(1, t), fs.at(0, t));
}

TEST(FilterEpoch, UnstableCoefficientsRejected) {
  FilterCoefficients bad{{1.0}, {1.0, -1.5}};  // pole at 1.5
  EXPECT_FALSE(is_stable(bad.denominator));
  auto e = vpg::testing::random_epoch(1, 100, 1);
  EXPECT_EQ(code_of([&] { filter_epoch(e, bad); }), Errc::UnstableFilter);
}

TEST(Resample, DecimationArithmetic) {
  auto e = vpg::testing::random_epoch(2, 5004, 3, 1000.0);
  const auto r = resample(e, 250.0);
  EXPECT_EQ(r.samples, 1251u);
  EXPECT_EQ(r.fs_hz, 250.0);
  EXPECT_EQ(r.at(1, 10), e.at(1, 40));
  EXPECT_EQ(resample(vpg::testing::random_epoch(1, 5007, 3, 1000.0), 250.0).samples, 1251u);
}

TEST(Resample, IdentityAndErrors) {
  auto e = vpg::testing::random_epoch(2, 100, 3, 250.0);
  EXPECT_EQ(resample(e, 250.0), e);
  auto k = vpg::testing::random_epoch(1, 100, 3, 1000.0);
  EXPECT_EQ(code_of([&] { resample(k, 300.0); }), Errc::NonIntegerRatio);
  EXPECT_EQ(code_of([&] { resample(k, 2000.0); }), Errc::NonIntegerRatio);
}

TEST(Preprocess, ProducesModelLength) {
  auto e = vpg::testing::random_epoch(2, 5200, 5, 1000.0);
  const auto p = preprocess(e, {});
  EXPECT_EQ(p.samples, 1251u);
  EXPECT_EQ(p.fs_hz, 250.0);
  auto short_e = vpg::testing::random_epoch(2, 4000, 5, 1000.0);
  EXPECT_EQ(code_of([&] { preprocess(short_e, {}); }), Errc::EpochTooShort);
}

TEST(WelchBandPower, SineParseval) {
  for (double amp : {0.5, 1.0, 3.0}) {
    const auto x = sine(10.0, amp, 250.0, 2500, 0.3);
    const double p = welch_band_power(x, 250.0, kAlphaBand, 500, 0.5);
    EXPECT_NEAR(p, amp * amp / 2.0, 0.05 * amp * amp / 2.0);
  }
}

TEST(WelchBandPower, MatchesSingleFullLengthPeriodogram) {
  // Oracle: one Hann-windowed periodogram over the whole signal, evaluated by direct DFT.
  std::mt19937_64 rng(12);
  std::vector<double> x(500);
  for (auto& v : x) v = standard_normal(rng) + 0.3;
  const double fs = 250.0;
  const std::size_t n = x.size();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double wss = 0.0;
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    w[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n)));
    wss += w[i] * w[i];
  }
  double expect = 0.0;
  const double df = fs / static_cast<double>(n);
  for (std::size_t k = 1; k < n / 2; ++k) {
    const double f = static_cast<double>(k) * df;
    if (f < 8.0 || f > 13.0) continue;
    std::complex<double> acc = 0;
    for (std::size_t i = 0; i < n; ++i)
      acc += (x[i] - mean) * w[i] * std::polar(1.0, -2.0 * kPi * static_cast<double>(k * i) / static_cast<double>(n));
    expect += 2.0 * std::norm(acc) / (fs * wss) * df;
  }
  EXPECT_NEAR(welch_band_power(x, fs, kAlphaBand, n, 0.0), expect, 1e-9 * expect);
}

TEST(WelchBandPower, ZeroSignFlipAndScaling) {
  std::vector<double> z(1000, 0.0);
  EXPECT_EQ(welch_band_power(z, 250.0, kAlphaBand, 500), 0.0);
  std::mt19937_64 rng(2);
  std::vector<double> x(1000), neg(1000), big(1000);
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = standard_normal(rng);
    neg[i] = -x[i];
    big[i] = 3.0 * x[i];
  }
  const double p = welch_band_power(x, 250.0, kAlphaBand, 500);
  EXPECT_GT(p, 0.0);
  EXPECT_NEAR(welch_band_power(neg, 250.0, kAlphaBand, 500), p, 1e-12 * p);
  EXPECT_NEAR(welch_band_power(big, 250.0, kAlphaBand, 500), 9.0 * p, 0.01 * 9.0 * p);
}

TEST(WelchBandPower, Errors) {
  std::vector<double> x(500, 1.0);
  EXPECT_EQ(code_of([&] { welch_band_power(x, 250.0, {120.0, 130.0}, 250); }), Errc::BandOutOfRange);
  EXPECT_EQ(code_of([&] { welch_band_power(x, 250.0, {13.0, 8.0}, 250); }), Errc::BandOutOfRange);
  EXPECT_EQ(code_of([&] { welch_band_power(x, 250.0, kAlphaBand, 501); }), Errc::WindowTooLong);
}

TEST(AlphaTendency, RampSigns) {
  EXPECT_GT(alpha_tendency(ramp_epoch(1.0, 2.0)).per_channel_slope[0], 0.0);
  EXPECT_LT(alpha_tendency(ramp_epoch(2.0, 1.0)).per_channel_slope[0], 0.0);
}

TEST(AlphaTendency, RampSlopeMagnitude) {
  // Power A(t)^2/2 with A from 1 to 2 over 5 s: slope of the power's linear fit is close to
  // d/dt of (1 + t/5)^2 / 2 at mid-epoch, i.e. 0.3 per second.
  const auto r = alpha_tendency(ramp_epoch(1.0, 2.0));
  EXPECT_NEAR(r.per_channel_slope[0], 0.3, 0.03);
}

TEST(AlphaTendency, StationaryWithinThreeSigma) {
  std::mt19937_64 rng(99);
  std::vector<double> slopes;
  auto draw = [&](double amp) {
    Epoch e(1, 1251, 250.0, 0, TrialKind::Imagery);
    const double phase = 2.0 * kPi * uniform01(rng);
    for (std::size_t i = 0; i < e.samples; ++i)
      e.data[i] = static_cast<float>(amp * std::sin(2.0 * kPi * 10.0 * static_cast<double>(i) / 250.0 + phase) +
                                     0.5 * standard_normal(rng));
    return alpha_tendency(e).per_channel_slope[0];
  };
  for (int i = 0; i < 100; ++i) slopes.push_back(draw(1.5));
  double mean = 0.0, var = 0.0;
  for (double s : slopes) mean += s;
  mean /= 100.0;
  for (double s : slopes) var += (s - mean) * (s - mean);
  const double tau = 3.0 * std::sqrt(var / 99.0);
  EXPECT_LT(std::abs(mean), tau / std::sqrt(100.0) * 3.0);
  // A genuine ramp clears the stationarity tolerance by a wide margin.
  EXPECT_GT(alpha_tendency(ramp_epoch(1.0, 4.0)).per_channel_slope[0], 2.0 * tau);
}

TEST(AlphaTendency, ChannelIndependenceAndErrors) {
  auto e = vpg::testing::random_epoch(3, 1251, 7);
  const auto base = alpha_tendency(e).per_channel_slope;
  EXPECT_EQ(base.size(), 3u);
  const std::vector<std::size_t> perm{2, 0, 1};
  const auto p = alpha_tendency(e.pick_channels(perm)).per_channel_slope;
  EXPECT_EQ(p[1], base[0]);
  EXPECT_EQ(p[0], base[2]);
  auto short_e = vpg::testing::random_epoch(1, 499, 7);
  EXPECT_EQ(code_of([&] { alpha_tendency(short_e); }), Errc::EpochTooShort);
  EXPECT_NO_THROW(alpha_tendency(vpg::testing::random_epoch(1, 500, 7)));
}
