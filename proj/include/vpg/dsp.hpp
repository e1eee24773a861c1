#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "vpg/core.hpp"

namespace vpg::dsp {

struct Band {
  double low_hz = 8.0;
  double high_hz = 13.0;
  bool operator==(const Band&) const = default;
};

inline constexpr Band kAlphaBand{8.0, 13.0};

struct FilterSpec {
  double low_hz = 8.0;
  double high_hz = 13.0;
  int order = 4;
  double fs_hz = 250.0;
};

/// Transfer function b(z)/a(z) with a[0] == 1.
struct FilterCoefficients {
  std::vector<double> numerator;
  std::vector<double> denominator;
};

// ---------------------------------------------------------------------------
// Polynomial helpers

namespace detail {

inline std::vector<std::complex<double>> poly_from_roots(std::span<const std::complex<double>> roots) {
  std::vector<std::complex<double>> c{1.0};
  for (const auto& r : roots) {
    c.push_back(0.0);
    for (std::size_t i = c.size() - 1; i > 0; --i) c[i] -= r * c[i - 1];
  }
  return c;
}

inline std::vector<double> real_part(const std::vector<std::complex<double>>& c) {
  std::vector<double> out(c.size());
  for (std::size_t i = 0; i < c.size(); ++i) out[i] = c[i].real();
  return out;
}

}  // namespace detail

/// Largest root magnitude of a[0] z^n + ... + a[n], from the companion matrix eigenvalues.
inline double max_pole_magnitude(std::span<const double> a) {
  require(a.size() >= 1 && a[0] != 0.0, Errc::InvalidArgument, "polynomial needs a non-zero leading coefficient");
  const auto n = static_cast<Eigen::Index>(a.size() - 1);
  if (n == 0) return 0.0;
  Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) comp(0, j) = -a[static_cast<std::size_t>(j + 1)] / a[0];
  for (Eigen::Index i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
  return Eigen::EigenSolver<Eigen::MatrixXd>(comp, false).eigenvalues().cwiseAbs().maxCoeff();
}

/// True iff every root of `a` lies strictly inside the unit circle. The Schur-Cohn step-down test
/// alone can pass badly conditioned high-order polynomials, so the roots are also checked directly.
inline bool is_stable(std::span<const double> a) {
  if (a.empty() || a[0] == 0.0) return false;
  for (double v : a)
    if (!std::isfinite(v)) return false;
  if (max_pole_magnitude(a) >= 1.0) return false;
  std::vector<double> poly(a.begin(), a.end());
  for (double& v : poly) v /= a[0];
  for (std::size_t n = poly.size() - 1; n >= 1; --n) {
    const double k = poly[n];
    if (!std::isfinite(k) || std::abs(k) >= 1.0) return false;
    const double denom = 1.0 - k * k;
    std::vector<double> next(n);
    for (std::size_t i = 0; i < n; ++i) next[i] = (poly[i] - k * poly[n - i]) / denom;
    poly = std::move(next);
  }
  return true;
}

/// Butterworth band-pass via analog prototype, band transform and prewarped bilinear map.
/// The result has 2*order poles.
inline FilterCoefficients design_bandpass(const FilterSpec& spec) {
  require(spec.order >= 1, Errc::InvalidArgument, "filter order must be >= 1");
  require(spec.fs_hz > 0.0, Errc::InvalidArgument, "sampling rate must be positive");
  require(spec.low_hz > 0.0 && spec.low_hz < spec.high_hz, Errc::InvalidBand,
          "band-pass needs 0 < low < high");
  require(spec.high_hz < spec.fs_hz / 2.0, Errc::NyquistViolation, "upper cutoff must lie below fs/2");

  using C = std::complex<double>;
  constexpr double pi = std::numbers::pi;
  const int n = spec.order;
  const double fs2 = 2.0 * spec.fs_hz;
  const double w1 = fs2 * std::tan(pi * spec.low_hz / spec.fs_hz);
  const double w2 = fs2 * std::tan(pi * spec.high_hz / spec.fs_hz);
  const double bw = w2 - w1;
  const double w0sq = w1 * w2;

  std::vector<C> analog_poles;
  for (int k = 1; k <= n; ++k) {
    const double theta = pi * (2.0 * k + n - 1) / (2.0 * n);
    const C p = std::polar(1.0, theta);
    const C half = p * bw / 2.0;
    const C disc = std::sqrt(half * half - w0sq);
    analog_poles.push_back(half + disc);
    analog_poles.push_back(half - disc);
  }

  double gain = std::pow(bw, n);
  C num_prod = std::pow(C(fs2), n);  // n analog zeros at s = 0
  C den_prod = 1.0;
  std::vector<C> z_poles, z_zeros;
  for (const auto& p : analog_poles) {
    z_poles.push_back((fs2 + p) / (fs2 - p));
    den_prod *= (fs2 - p);
  }
  for (int k = 0; k < n; ++k) z_zeros.emplace_back(1.0);
  for (int k = 0; k < n; ++k) z_zeros.emplace_back(-1.0);
  gain *= (num_prod / den_prod).real();

  FilterCoefficients out;
  out.numerator = detail::real_part(detail::poly_from_roots(z_zeros));
  for (double& b : out.numerator) b *= gain;
  out.denominator = detail::real_part(detail::poly_from_roots(z_poles));
  require(is_stable(out.denominator), Errc::UnstableFilter, "designed filter is numerically unstable");
  return out;
}

/// H(e^{j 2 pi f / fs}).
inline std::complex<double> frequency_response(const FilterCoefficients& c, double f_hz, double fs_hz) {
  const std::complex<double> zinv = std::polar(1.0, -2.0 * std::numbers::pi * f_hz / fs_hz);
  auto eval = [&](const std::vector<double>& p) {
    std::complex<double> acc = 0.0;
    for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * zinv + *it;
    return acc;
  };
  return eval(c.numerator) / eval(c.denominator);
}

// ---------------------------------------------------------------------------
// Filtering

namespace detail {

inline void normalize(std::vector<double>& b, std::vector<double>& a) {
  const std::size_t n = std::max(a.size(), b.size());
  b.resize(n, 0.0);
  a.resize(n, 0.0);
  const double a0 = a[0];
  for (auto& v : b) v /= a0;
  for (auto& v : a) v /= a0;
}

// Direct form II transposed; `state` has length max(len a, len b) - 1.
inline void lfilter_inplace(const std::vector<double>& b, const std::vector<double>& a, std::vector<double>& x,
                            std::vector<double> state) {
  const std::size_t order = a.size() - 1;
  for (double& v : x) {
    const double in = v;
    const double y = b[0] * in + (order ? state[0] : 0.0);
    for (std::size_t i = 0; i + 1 < order; ++i) state[i] = b[i + 1] * in - a[i + 1] * y + state[i + 1];
    if (order) state[order - 1] = b[order] * in - a[order] * y;
    v = y;
  }
}

// Steady-state initial conditions for a unit step input.
inline std::vector<double> lfilter_zi(const std::vector<double>& b, const std::vector<double>& a) {
  const auto n = static_cast<Eigen::Index>(a.size() - 1);
  if (n == 0) return {};
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n);
  for (Eigen::Index i = 0; i < n; ++i) m(i, 0) += a[static_cast<std::size_t>(i) + 1];
  for (Eigen::Index i = 0; i + 1 < n; ++i) m(i, i + 1) -= 1.0;
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i)
    rhs(i) = b[static_cast<std::size_t>(i) + 1] - a[static_cast<std::size_t>(i) + 1] * b[0];
  Eigen::VectorXd zi = m.partialPivLu().solve(rhs);
  return {zi.data(), zi.data() + n};
}

}  // namespace detail

/// Filters one signal. Zero-phase runs forward then backward with odd-extension padding
/// (3 * number of taps, clipped to the signal length) and steady-state initial conditions.
inline std::vector<double> filter_signal(std::span<const double> x, const FilterCoefficients& coeffs, bool zero_phase) {
  require(is_stable(coeffs.denominator), Errc::UnstableFilter, "filter denominator has poles on or outside the unit circle");
  auto b = coeffs.numerator;
  auto a = coeffs.denominator;
  detail::normalize(b, a);
  const std::size_t order = a.size() - 1;

  if (!zero_phase) {
    std::vector<double> y(x.begin(), x.end());
    detail::lfilter_inplace(b, a, y, std::vector<double>(order, 0.0));
    return y;
  }
  if (x.empty()) return {};

  const std::size_t padlen = std::min<std::size_t>(3 * a.size(), x.size() - 1);
  const std::size_t n = x.size();
  std::vector<double> ext;
  ext.reserve(n + 2 * padlen);
  for (std::size_t i = padlen; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= padlen; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  const auto zi = detail::lfilter_zi(b, a);
  auto scaled = [&](double v) {
    std::vector<double> s(zi);
    for (auto& z : s) z *= v;
    return s;
  };
  detail::lfilter_inplace(b, a, ext, scaled(ext.front()));
  std::reverse(ext.begin(), ext.end());
  detail::lfilter_inplace(b, a, ext, scaled(ext.front()));
  std::reverse(ext.begin(), ext.end());
  return {ext.begin() + static_cast<std::ptrdiff_t>(padlen), ext.begin() + static_cast<std::ptrdiff_t>(padlen + n)};
}

/// Filters every channel independently; arithmetic runs at double precision.
inline Epoch filter_epoch(const Epoch& epoch, const FilterCoefficients& coeffs, bool zero_phase = true) {
  require(is_stable(coeffs.denominator), Errc::UnstableFilter, "filter denominator has poles on or outside the unit circle");
  Epoch out = epoch;
  std::vector<double> buf(epoch.samples);
  for (std::size_t c = 0; c < epoch.channels; ++c) {
    const auto row = epoch.row(c);
    std::copy(row.begin(), row.end(), buf.begin());
    const auto y = filter_signal(buf, coeffs, zero_phase);
    auto dst = out.row(c);
    for (std::size_t t = 0; t < y.size(); ++t) dst[t] = static_cast<float>(y[t]);
  }
  return out;
}

/// Integer decimation to `target_fs_hz`; keeps every (fs/target)-th sample starting at 0.
inline Epoch resample(const Epoch& epoch, double target_fs_hz) {
  require(target_fs_hz > 0.0, Errc::InvalidArgument, "target rate must be positive");
  const double ratio = epoch.fs_hz / target_fs_hz;
  const double rounded = std::round(ratio);
  require(rounded >= 1.0 && std::abs(ratio - rounded) < 1e-9, Errc::NonIntegerRatio,
          "sampling rate is not an integer multiple of the target rate");
  const auto step = static_cast<std::size_t>(rounded);
  if (step == 1) return epoch;
  const std::size_t n_out = epoch.samples / step;
  Epoch out(epoch.channels, n_out, target_fs_hz, epoch.label, epoch.kind);
  for (std::size_t c = 0; c < epoch.channels; ++c) {
    const auto src = epoch.row(c);
    auto dst = out.row(c);
    for (std::size_t t = 0; t < n_out; ++t) dst[t] = src[t * step];
  }
  return out;
}

/// Keeps the first `n_samples`; shorter epochs are rejected.
inline Epoch crop(const Epoch& epoch, std::size_t n_samples) {
  require(epoch.samples >= n_samples, Errc::EpochTooShort,
          "epoch has " + std::to_string(epoch.samples) + " samples, need " + std::to_string(n_samples));
  Epoch out(epoch.channels, n_samples, epoch.fs_hz, epoch.label, epoch.kind);
  for (std::size_t c = 0; c < epoch.channels; ++c) {
    const auto src = epoch.row(c);
    std::copy_n(src.begin(), n_samples, out.row(c).begin());
  }
  return out;
}

struct PreprocessConfig {
  Band band = kAlphaBand;
  int order = 4;
  double target_fs_hz = 250.0;
  std::size_t crop_samples = 1251;
};

/// Band-pass (zero phase) -> decimate -> crop.
inline Epoch preprocess(const Epoch& epoch, const PreprocessConfig& cfg) {
  const auto coeffs = design_bandpass({cfg.band.low_hz, cfg.band.high_hz, cfg.order, epoch.fs_hz});
  return crop(resample(filter_epoch(epoch, coeffs, true), cfg.target_fs_hz), cfg.crop_samples);
}

// ---------------------------------------------------------------------------
// Spectral power

/// Periodic Hann window.
inline std::vector<double> hann_window(std::size_t n) {
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  return w;
}

/// Band power by Welch's method: mean-removed Hann segments, one-sided PSD density averaged over
/// segments and summed over the bins whose frequency lies in [low, high], times the bin width.
inline double welch_band_power(std::span<const double> signal, double fs_hz, Band band, std::size_t window_len,
                               double overlap = 0.5) {
  require(fs_hz > 0.0, Errc::InvalidArgument, "sampling rate must be positive");
  require(band.low_hz > 0.0 && band.low_hz < band.high_hz && band.high_hz < fs_hz / 2.0, Errc::BandOutOfRange,
          "band must lie within (0, fs/2)");
  require(window_len >= 2 && window_len <= signal.size(), Errc::WindowTooLong,
          "window length must be in [2, signal length]");
  require(overlap >= 0.0 && overlap < 1.0, Errc::InvalidArgument, "overlap must be in [0, 1)");

  const std::size_t n = window_len;
  const auto noverlap = static_cast<std::size_t>(std::floor(overlap * static_cast<double>(n)));
  const std::size_t step = n - noverlap;
  const auto window = hann_window(n);
  double wss = 0.0;
  for (double w : window) wss += w * w;

  const double df = fs_hz / static_cast<double>(n);
  const auto k_lo = static_cast<std::size_t>(std::ceil(band.low_hz / df - 1e-9));
  const auto k_hi = static_cast<std::size_t>(std::floor(band.high_hz / df + 1e-9));

  std::vector<double> cos_table(n), sin_table(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double ang = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
    cos_table[i] = std::cos(ang);
    sin_table[i] = std::sin(ang);
  }

  std::vector<double> seg(n);
  double total = 0.0;
  std::size_t n_segments = 0;
  for (std::size_t start = 0; start + n <= signal.size(); start += step) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += signal[start + i];
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) seg[i] = (signal[start + i] - mean) * window[i];

    double seg_power = 0.0;
    for (std::size_t k = k_lo; k <= k_hi; ++k) {
      double re = 0.0, im = 0.0;
      std::size_t idx = 0;
      for (std::size_t i = 0; i < n; ++i) {
        re += seg[i] * cos_table[idx];
        im -= seg[i] * sin_table[idx];
        idx += k;
        if (idx >= n) idx -= n;
      }
      const bool edge = (k == 0) || (2 * k == n);
      seg_power += (edge ? 1.0 : 2.0) * (re * re + im * im) / (fs_hz * wss);
    }
    total += seg_power * df;
    ++n_segments;
  }
  return total / static_cast<double>(n_segments);
}

struct TendencyResult {
  std::vector<double> per_channel_slope;  // band power per second
  double window_len_s = 1.0;
  double step_s = 0.25;
  Band band = kAlphaBand;
};

/// Ordinary least-squares slope of y against x.
inline double ols_slope(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

/// Per channel: band power in sliding windows (one Hann periodogram each), then the OLS slope of
/// power against window-centre time.
inline TendencyResult alpha_tendency(const Epoch& epoch, Band band = kAlphaBand, double window_len_s = 1.0,
                                     double step_s = 0.25) {
  require(window_len_s > 0.0 && step_s > 0.0, Errc::InvalidArgument, "window and step must be positive");
  const auto win = static_cast<std::size_t>(std::llround(window_len_s * epoch.fs_hz));
  const auto step = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(step_s * epoch.fs_hz)));
  require(win >= 2 && epoch.samples >= 2 * win, Errc::EpochTooShort, "epoch must span at least two windows");

  std::vector<double> centres;
  for (std::size_t start = 0; start + win <= epoch.samples; start += step)
    centres.push_back((static_cast<double>(start) + static_cast<double>(win) / 2.0) / epoch.fs_hz);

  TendencyResult res{{}, window_len_s, step_s, band};
  res.per_channel_slope.reserve(epoch.channels);
  std::vector<double> row(epoch.samples), power(centres.size());
  for (std::size_t c = 0; c < epoch.channels; ++c) {
    const auto src = epoch.row(c);
    std::copy(src.begin(), src.end(), row.begin());
    for (std::size_t w = 0; w < centres.size(); ++w)
      power[w] = welch_band_power(std::span<const double>(row).subspan(w * step, win), epoch.fs_hz, band, win, 0.0);
    res.per_channel_slope.push_back(ols_slope(centres, power));
  }
  return res;
}

}  // namespace vpg::dsp
