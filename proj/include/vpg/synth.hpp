#pragma once

// Synthetic EEG with a known answer. Every trial mixes one alpha source into all channels through a
// class-specific spatial pattern. The source amplitude ramps up during imagery and down during
// perception. Patterns are shared by both kinds, so perception trials carry class information that
// transfers to imagery.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "vpg/core.hpp"
#include "vpg/dsp.hpp"

namespace vpg::synth {

struct SynthConfig {
  std::size_t n_channels = 16;
  std::size_t n_occipital = 4;  // the last n_occipital channels are named as occipital electrodes
  double fs_hz = 250.0;
  std::size_t n_samples = 1251;
  std::size_t n_classes = kDefaultClassCount;
  std::size_t vi_trials_per_class = 50;
  std::size_t vp_trials_per_class = 100;
  double alpha_center_hz = 10.0;
  double alpha_jitter_hz = 0.5;     // per-trial frequency drawn uniformly in centre +- jitter
  double base_amplitude = 1.0;      // source amplitude at mid-epoch
  double imagery_ramp = 0.2;        // amplitude change per second, > 0
  double perception_ramp = -0.2;    // < 0
  double occipital_gain_min = 0.7;  // |pattern| range on occipital channels
  double occipital_gain_max = 1.0;
  double other_gain_max = 0.35;     // |pattern| upper bound elsewhere
  double noise_sigma = 0.5;
  // Optional explicit patterns, one row of n_channels per class. Drawn from `seed` when empty.
  std::vector<std::vector<double>> patterns;
  std::uint64_t seed = 0;
};

inline void validate_config(const SynthConfig& c) {
  auto check = [](bool ok, const std::string& msg) { require(ok, Errc::InvalidConfig, msg); };
  check(c.n_channels >= 1, "n_channels must be >= 1");
  check(c.n_occipital >= 1 && c.n_occipital <= c.n_channels, "n_occipital must be in [1, n_channels]");
  check(c.n_classes >= 2, "need at least two classes");
  check(c.fs_hz > 0.0 && std::isfinite(c.fs_hz), "fs_hz must be positive");
  check(c.n_samples >= 2, "n_samples must be >= 2");
  check(c.vi_trials_per_class + c.vp_trials_per_class >= 1, "no trials requested");
  check(c.alpha_center_hz > 0.0 && c.alpha_center_hz + c.alpha_jitter_hz < c.fs_hz / 2.0,
        "alpha frequency must lie below Nyquist");
  check(c.alpha_jitter_hz >= 0.0 && c.alpha_jitter_hz < c.alpha_center_hz, "alpha jitter out of range");
  check(c.imagery_ramp > 0.0 && c.perception_ramp < 0.0, "ramps must be positive for imagery, negative for perception");
  const double half = 0.5 * static_cast<double>(c.n_samples - 1) / c.fs_hz;
  check(c.base_amplitude - std::max(c.imagery_ramp, -c.perception_ramp) * half > 0.0,
        "ramp would drive the amplitude through zero");
  check(c.noise_sigma >= 0.0 && std::isfinite(c.noise_sigma), "noise_sigma must be >= 0");
  check(0.0 < c.occipital_gain_min && c.occipital_gain_min <= c.occipital_gain_max, "bad occipital gain range");
  check(c.other_gain_max >= 0.0, "other_gain_max must be >= 0");
  if (!c.patterns.empty()) {
    check(c.patterns.size() == c.n_classes, "one pattern per class required");
    for (const auto& p : c.patterns) check(p.size() == c.n_channels, "pattern length must equal n_channels");
  }
}

/// Channel names: generic labels for non-occipital channels, then occipital electrodes.
inline Montage synthetic_montage(std::size_t n_channels, std::size_t n_occipital) {
  static const std::vector<std::string> occ{"O1", "O2", "Oz", "POz", "PO3", "PO4", "PO7", "PO8", "Iz"};
  static const std::vector<std::string> other{"Fp1", "Fp2", "F7",  "F3", "Fz", "F4",  "F8",  "FC5", "FC1", "FC2",
                                              "FC6", "T7",  "C3",  "Cz", "C4", "T8",  "CP5", "CP1", "CP2", "CP6",
                                              "P7",  "P3",  "Pz",  "P4", "P8", "AF3", "AF4", "F1",  "F2",  "C1",
                                              "C2",  "P1",  "P2",  "TP7", "TP8", "FT7", "FT8", "F5", "F6", "C5",
                                              "C6",  "P5",  "P6",  "CP3", "CP4", "FC3", "FC4", "AF7", "AF8", "Fpz",
                                              "CPz", "FCz", "AFz", "TP9", "TP10"};
  std::vector<std::string> names;
  const std::size_t n_other = n_channels - n_occipital;
  for (std::size_t i = 0; i < n_other; ++i) names.push_back(i < other.size() ? other[i] : "X" + std::to_string(i + 1));
  std::vector<std::size_t> occ_idx;
  for (std::size_t i = 0; i < n_occipital; ++i) {
    occ_idx.push_back(names.size());
    names.push_back(i < occ.size() ? occ[i] : "OX" + std::to_string(i + 1));
  }
  return Montage(std::move(names), std::move(occ_idx));
}

namespace detail {

// Patterns are only identified up to sign (a sign flip equals a half-cycle phase shift of the
// source), so distinctness is measured against both p and -p.
inline double pattern_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double plus = 0.0, minus = 0.0, na = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    plus += (a[i] - b[i]) * (a[i] - b[i]);
    minus += (a[i] + b[i]) * (a[i] + b[i]);
    na += a[i] * a[i];
  }
  return std::sqrt(std::min(plus, minus) / std::max(na, 1e-300));
}

}  // namespace detail

/// Class spatial patterns: the explicit ones from the config, or seeded random ones that differ
/// pairwise (up to sign) by at least half their norm.
inline std::vector<std::vector<double>> class_patterns(const SynthConfig& cfg) {
  validate_config(cfg);
  if (!cfg.patterns.empty()) return cfg.patterns;
  std::mt19937_64 rng(derive_seed(cfg.seed, seed_stream("patterns")));
  const auto montage = synthetic_montage(cfg.n_channels, cfg.n_occipital);
  std::vector<bool> is_occ(cfg.n_channels, false);
  for (auto i : montage.occipital_indices()) is_occ[i] = true;

  std::vector<std::vector<double>> out;
  for (int attempt = 0; out.size() < cfg.n_classes; ++attempt) {
    require(attempt < 10000, Errc::InvalidConfig, "could not draw distinct class patterns");
    std::vector<double> p(cfg.n_channels);
    for (std::size_t c = 0; c < cfg.n_channels; ++c) {
      const double sign = uniform01(rng) < 0.5 ? -1.0 : 1.0;
      const double mag = is_occ[c] ? cfg.occipital_gain_min + (cfg.occipital_gain_max - cfg.occipital_gain_min) * uniform01(rng)
                                   : cfg.other_gain_max * uniform01(rng);
      p[c] = sign * mag;
    }
    bool distinct = true;
    for (const auto& q : out) distinct = distinct && detail::pattern_distance(p, q) >= 0.5;
    if (distinct) out.push_back(std::move(p));
  }
  return out;
}

/// Source amplitude at time t for a ramp of `slope` per second, centred on mid-epoch.
inline double ramp_amplitude(const SynthConfig& cfg, double slope, double t_s) {
  const double mid = 0.5 * static_cast<double>(cfg.n_samples - 1) / cfg.fs_hz;
  return cfg.base_amplitude + slope * (t_s - mid);
}

/// One trial. `index` selects an independent random stream, so any trial can be regenerated alone.
inline Epoch generate_trial(const SynthConfig& cfg, const std::vector<std::vector<double>>& patterns, TrialKind kind,
                            std::size_t label, std::uint64_t index) {
  const std::uint64_t kind_stream = seed_stream(kind == TrialKind::Imagery ? "trial/imagery" : "trial/perception");
  std::mt19937_64 rng(derive_seed(derive_seed(cfg.seed, kind_stream), index));
  const double f = cfg.alpha_center_hz + cfg.alpha_jitter_hz * (2.0 * uniform01(rng) - 1.0);
  const double phase = 6.283185307179586 * uniform01(rng);
  const double slope = kind == TrialKind::Imagery ? cfg.imagery_ramp : cfg.perception_ramp;

  std::vector<double> source(cfg.n_samples);
  for (std::size_t t = 0; t < cfg.n_samples; ++t) {
    const double ts = static_cast<double>(t) / cfg.fs_hz;
    source[t] = ramp_amplitude(cfg, slope, ts) * std::sin(6.283185307179586 * f * ts + phase);
  }
  Epoch e(cfg.n_channels, cfg.n_samples, cfg.fs_hz, label, kind);
  const auto& w = patterns[label];
  for (std::size_t c = 0; c < cfg.n_channels; ++c)
    for (std::size_t t = 0; t < cfg.n_samples; ++t)
      e.at(c, t) = static_cast<float>(w[c] * source[t] + cfg.noise_sigma * standard_normal(rng));
  return e;
}

inline std::vector<std::string> default_class_names(std::size_t n) {
  static const std::vector<std::string> names{"pick_up_phone", "pour_water", "open_door", "eat_food"};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(i < names.size() ? names[i] : "class_" + std::to_string(i));
  return out;
}

struct SyntheticPair {
  Dataset vi;
  Dataset vp;
};

/// Imagery and perception datasets. Trials are ordered class by class.
inline SyntheticPair generate_synthetic(const SynthConfig& cfg) {
  const auto patterns = class_patterns(cfg);
  SyntheticPair out;
  auto fill = [&](Dataset& ds, const char* name, TrialKind kind, std::size_t per_class) {
    ds.name = name;
    ds.montage = synthetic_montage(cfg.n_channels, cfg.n_occipital);
    ds.fs_hz = cfg.fs_hz;
    ds.classes = default_class_names(cfg.n_classes);
    ds.epochs.reserve(per_class * cfg.n_classes);
    std::uint64_t index = 0;
    for (std::size_t k = 0; k < cfg.n_classes; ++k)
      for (std::size_t i = 0; i < per_class; ++i) ds.epochs.push_back(generate_trial(cfg, patterns, kind, k, index++));
  };
  fill(out.vi, "synthetic_imagery", TrialKind::Imagery, cfg.vi_trials_per_class);
  fill(out.vp, "synthetic_perception", TrialKind::Perception, cfg.vp_trials_per_class);
  return out;
}

enum class Sign { Positive, Negative };

/// Mean alpha tendency over the occipital channels of one epoch.
inline double occipital_tendency(const Epoch& epoch, const Montage& montage, dsp::Band band = dsp::kAlphaBand) {
  const auto slopes = dsp::alpha_tendency(epoch, band).per_channel_slope;
  const auto& occ = montage.occipital_indices();
  double sum = 0.0;
  if (occ.empty()) {
    for (double s : slopes) sum += s;
    return sum / static_cast<double>(slopes.size());
  }
  for (auto i : occ) sum += slopes[i];
  return sum / static_cast<double>(occ.size());
}

/// Fraction of epochs whose mean occipital alpha tendency has the expected sign (zero matches neither).
inline double verify_tendency(std::span<const Epoch> epochs, const Montage& montage, Sign expected) {
  require(!epochs.empty(), Errc::EmptyDataset, "cannot verify tendency of an empty dataset");
  std::size_t ok = 0;
  for (const auto& e : epochs) {
    const double s = occipital_tendency(e, montage);
    ok += expected == Sign::Positive ? s > 0.0 : s < 0.0;
  }
  return static_cast<double>(ok) / static_cast<double>(epochs.size());
}

inline double verify_tendency(const Dataset& ds, Sign expected) {
  return verify_tendency(std::span<const Epoch>(ds.epochs), ds.montage, expected);
}

}  // namespace vpg::synth
