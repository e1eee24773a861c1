#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "vpg/core.hpp"

namespace vpg::transform {

enum class NormScope { PerChannel, PerTrial };
enum class ReversalReference { Zeros, Ones };
enum class Regime { ViOnly, ViPlusVp };
enum class Provenance { Imagery, ModifiedPerception };

constexpr std::string_view to_string(NormScope s) noexcept { return s == NormScope::PerChannel ? "channel" : "trial"; }
constexpr std::string_view to_string(ReversalReference r) noexcept { return r == ReversalReference::Zeros ? "zeros" : "ones"; }
constexpr std::string_view to_string(Regime r) noexcept { return r == Regime::ViOnly ? "vi_only" : "vi_plus_vp"; }
constexpr std::string_view to_string(Provenance p) noexcept {
  return p == Provenance::Imagery ? "imagery" : "modified_perception";
}

struct ReversalConfig {
  ReversalReference reference = ReversalReference::Zeros;
};

/// Extrema used by min-max scaling; one entry per channel, or a single entry for PerTrial.
struct NormRecord {
  NormScope scope = NormScope::PerChannel;
  std::vector<double> mins;
  std::vector<double> maxs;
};

/// (x - lo) / (hi - lo), rounded once to the destination type.
template <class T>
constexpr T scale_unit(double x, double lo, double hi) noexcept {
  return static_cast<T>((x - lo) / (hi - lo));
}

/// Scales `values` into [0, 1] in place and returns (min, max). Constant input is rejected.
template <class T>
std::pair<double, double> minmax_scale_inplace(std::span<T> values) {
  require(!values.empty(), Errc::DegenerateRange, "empty scope unit");
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  const double lo = static_cast<double>(*lo_it), hi = static_cast<double>(*hi_it);
  require(hi > lo, Errc::DegenerateRange, "constant scope unit (max == min)");
  for (auto& v : values) v = scale_unit<T>(static_cast<double>(v), lo, hi);
  return {lo, hi};
}

inline std::pair<Epoch, NormRecord> minmax_normalize(const Epoch& epoch, NormScope scope = NormScope::PerChannel) {
  Epoch out = epoch;
  NormRecord rec{scope, {}, {}};
  if (scope == NormScope::PerChannel) {
    for (std::size_t c = 0; c < out.channels; ++c) {
      const auto [lo, hi] = minmax_scale_inplace(out.row(c));
      rec.mins.push_back(lo);
      rec.maxs.push_back(hi);
    }
  } else {
    const auto [lo, hi] = minmax_scale_inplace(std::span<float>(out.data));
    rec.mins.push_back(lo);
    rec.maxs.push_back(hi);
  }
  return {std::move(out), std::move(rec)};
}

/// Maps normalized values back through the stored extrema.
inline Epoch denormalize(const Epoch& epoch, const NormRecord& rec) {
  const bool per_channel = rec.scope == NormScope::PerChannel;
  require(rec.mins.size() == rec.maxs.size() && rec.mins.size() == (per_channel ? epoch.channels : 1),
          Errc::ShapeMismatch, "norm record does not match epoch");
  Epoch out = epoch;
  for (std::size_t c = 0; c < out.channels; ++c) {
    const double lo = rec.mins[per_channel ? c : 0], hi = rec.maxs[per_channel ? c : 0];
    for (auto& v : out.row(c)) v = static_cast<float>(lo + static_cast<double>(v) * (hi - lo));
  }
  return out;
}

inline constexpr double kUnitRangeSlack = 1e-9;

constexpr double reference_value(ReversalReference r) noexcept { return r == ReversalReference::Zeros ? 0.0 : 1.0; }

/// reference - x for x in [0, 1].
template <class T>
void reverse_inplace(std::span<T> values, ReversalReference ref) {
  for (const auto v : values)
    require(static_cast<double>(v) >= -kUnitRangeSlack && static_cast<double>(v) <= 1.0 + kUnitRangeSlack,
            Errc::InputOutOfRange, "reversal input must lie in [0, 1]");
  const T base = static_cast<T>(reference_value(ref));
  for (auto& v : values) v = base - v;
}

inline Epoch reverse_modify(const Epoch& normalized, ReversalConfig cfg = {}) {
  Epoch out = normalized;
  reverse_inplace(std::span<float>(out.data), cfg.reference);
  return out;
}

struct TrainSet {
  std::vector<Epoch> epochs;
  Regime regime = Regime::ViOnly;
  std::vector<Provenance> provenance;
  std::vector<std::size_t> source_index;  // index into the imagery or perception input list
};

/// Imagery epochs are normalized; under ViPlusVp every perception epoch is normalized, reversed and
/// appended with its label. Inputs are not modified.
inline TrainSet assemble_training_set(std::span<const Epoch> imagery_train, std::span<const Epoch> perception_all,
                                      Regime regime, ReversalConfig reversal = {},
                                      NormScope scope = NormScope::PerChannel,
                                      std::size_t n_classes = kDefaultClassCount) {
  const Epoch* ref = !imagery_train.empty() ? &imagery_train.front()
                     : (!perception_all.empty() && regime == Regime::ViPlusVp) ? &perception_all.front()
                                                                               : nullptr;
  auto check = [&](const Epoch& e) {
    require(e.channels == ref->channels && e.samples == ref->samples && e.fs_hz == ref->fs_hz, Errc::ShapeMismatch,
            "epochs must share channel count, length and sampling rate");
    require(e.label < n_classes, Errc::MissingLabel,
            "label " + std::to_string(e.label) + " outside " + std::to_string(n_classes) + " classes");
  };

  TrainSet set;
  set.regime = regime;
  for (std::size_t i = 0; i < imagery_train.size(); ++i) {
    check(imagery_train[i]);
    set.epochs.push_back(minmax_normalize(imagery_train[i], scope).first);
    set.provenance.push_back(Provenance::Imagery);
    set.source_index.push_back(i);
  }
  if (regime == Regime::ViPlusVp) {
    for (std::size_t i = 0; i < perception_all.size(); ++i) {
      check(perception_all[i]);
      set.epochs.push_back(reverse_modify(minmax_normalize(perception_all[i], scope).first, reversal));
      set.provenance.push_back(Provenance::ModifiedPerception);
      set.source_index.push_back(i);
    }
  }
  return set;
}

}  // namespace vpg::transform
