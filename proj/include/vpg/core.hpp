#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "vpg/error.hpp"

namespace vpg {

inline constexpr std::size_t kDefaultClassCount = 4;

enum class TrialKind { Imagery, Perception };

constexpr std::string_view to_string(TrialKind kind) noexcept {
  return kind == TrialKind::Imagery ? "imagery" : "perception";
}

inline std::optional<TrialKind> parse_trial_kind(std::string_view text) {
  if (text == "imagery") return TrialKind::Imagery;
  if (text == "perception") return TrialKind::Perception;
  return std::nullopt;
}

/// Channels treated as occipital unless a manifest names its own set.
inline const std::vector<std::string>& default_occipital_names() {
  static const std::vector<std::string> names{"O1", "O2", "Oz", "Iz", "POz", "PO3", "PO4", "PO7", "PO8"};
  return names;
}

/// The 64-electrode 10/20 layout used by the acquisition system.
inline std::vector<std::string> standard_64_channel_names() {
  return {"Fp1", "Fp2", "AF7", "AF3", "AFz", "AF4", "AF8", "F7",  "F5",  "F3",  "F1",  "Fz",  "F2",
          "F4",  "F6",  "F8",  "FT9", "FT7", "FC5", "FC3", "FC1", "FC2", "FC4", "FC6", "FT8", "FT10",
          "T7",  "C5",  "C3",  "C1",  "Cz",  "C2",  "C4",  "C6",  "T8",  "TP9", "TP7", "CP5", "CP3",
          "CP1", "CPz", "CP2", "CP4", "CP6", "TP8", "TP10", "P7", "P5",  "P3",  "P1",  "Pz",  "P2",
          "P4",  "P6",  "P8",  "PO7", "PO3", "POz", "PO4", "PO8", "O1",  "Oz",  "O2",  "Iz"};
}

// Ordered electrode names plus the subset considered occipital.
class Montage {
 public:
  Montage() = default;

  /// Occipital channels default to the members of default_occipital_names().
  explicit Montage(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      const auto& occ = default_occipital_names();
      if (std::find(occ.begin(), occ.end(), names_[i]) != occ.end()) occipital_.push_back(i);
    }
    check();
  }

  Montage(std::vector<std::string> names, std::vector<std::size_t> occipital)
      : names_(std::move(names)), occipital_(std::move(occipital)) {
    std::sort(occipital_.begin(), occipital_.end());
    check();
  }

  /// Resolves occipital channel names against the montage; unknown names are an error.
  static Montage with_occipital_names(std::vector<std::string> names, const std::vector<std::string>& occipital) {
    std::vector<std::size_t> idx;
    for (const auto& o : occipital) {
      auto it = std::find(names.begin(), names.end(), o);
      require(it != names.end(), Errc::InvalidManifest, "occipital channel '" + o + "' not in montage");
      idx.push_back(static_cast<std::size_t>(it - names.begin()));
    }
    return Montage(std::move(names), std::move(idx));
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::vector<std::string>& channel_names() const noexcept { return names_; }
  const std::vector<std::size_t>& occipital_indices() const noexcept { return occipital_; }

  std::vector<std::string> occipital_names() const {
    std::vector<std::string> out;
    for (auto i : occipital_) out.push_back(names_[i]);
    return out;
  }

  std::optional<std::size_t> index_of(std::string_view name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - names_.begin());
  }

  /// Montage restricted to `channels` (in the given order).
  Montage subset(std::span<const std::size_t> channels) const {
    std::vector<std::string> names;
    std::vector<std::size_t> occ;
    for (std::size_t k = 0; k < channels.size(); ++k) {
      require(channels[k] < names_.size(), Errc::ChannelMismatch, "channel index out of range");
      names.push_back(names_[channels[k]]);
      if (std::binary_search(occipital_.begin(), occipital_.end(), channels[k])) occ.push_back(k);
    }
    return Montage(std::move(names), std::move(occ));
  }

  bool operator==(const Montage&) const = default;

 private:
  void check() const {
    require(!names_.empty(), Errc::EmptyChannels, "montage has no channels");
    std::unordered_set<std::string> seen;
    for (const auto& n : names_) require(seen.insert(n).second, Errc::InvalidManifest, "duplicate channel name '" + n + "'");
    for (auto i : occipital_) require(i < names_.size(), Errc::InvalidManifest, "occipital index out of range");
    require(std::adjacent_find(occipital_.begin(), occipital_.end()) == occipital_.end(), Errc::InvalidManifest,
            "duplicate occipital index");
  }

  std::vector<std::string> names_;
  std::vector<std::size_t> occipital_;
};

/// One trial: a channels x time block stored channel-major.
struct Epoch {
  std::size_t channels = 0;
  std::size_t samples = 0;
  std::vector<float> data;
  double fs_hz = 0.0;
  std::size_t label = 0;
  TrialKind kind = TrialKind::Imagery;

  Epoch() = default;
  Epoch(std::size_t n_channels, std::size_t n_samples, double fs, std::size_t lbl, TrialKind k)
      : channels(n_channels), samples(n_samples), data(n_channels * n_samples, 0.0f), fs_hz(fs), label(lbl), kind(k) {}

  std::span<float> row(std::size_t c) noexcept { return {data.data() + c * samples, samples}; }
  std::span<const float> row(std::size_t c) const noexcept { return {data.data() + c * samples, samples}; }
  float& at(std::size_t c, std::size_t t) noexcept { return data[c * samples + t]; }
  float at(std::size_t c, std::size_t t) const noexcept { return data[c * samples + t]; }

  double duration_s() const noexcept { return fs_hz > 0 ? static_cast<double>(samples) / fs_hz : 0.0; }

  /// Same metadata, channels restricted to `picks`.
  Epoch pick_channels(std::span<const std::size_t> picks) const {
    Epoch out(picks.size(), samples, fs_hz, label, kind);
    for (std::size_t k = 0; k < picks.size(); ++k) {
      require(picks[k] < channels, Errc::ChannelMismatch, "channel index out of range");
      std::copy_n(data.data() + picks[k] * samples, samples, out.data.data() + k * samples);
    }
    return out;
  }

  bool operator==(const Epoch&) const = default;
};

/// Checks an epoch against its montage and class count.
inline void validate_epoch(const Epoch& epoch, const Montage& montage, std::size_t n_classes = kDefaultClassCount) {
  require(epoch.channels >= 1, Errc::EmptyChannels, "epoch has zero channels");
  require(epoch.samples >= 1, Errc::EmptyChannels, "epoch has zero samples");
  require(epoch.data.size() == epoch.channels * epoch.samples, Errc::ChannelMismatch,
          "epoch payload size does not match channels x samples");
  require(epoch.channels == montage.size(), Errc::ChannelMismatch,
          "epoch has " + std::to_string(epoch.channels) + " channels, montage has " + std::to_string(montage.size()));
  for (float v : epoch.data) require(std::isfinite(v), Errc::NonFiniteSample, "epoch contains a non-finite sample");
  require(epoch.label < n_classes, Errc::LabelOutOfRange,
          "label " + std::to_string(epoch.label) + " outside " + std::to_string(n_classes) + " classes");
  require(std::isfinite(epoch.fs_hz) && epoch.fs_hz > 0.0, Errc::InvalidArgument, "sampling rate must be positive");
}

struct Dataset {
  std::string name;
  Montage montage;
  double fs_hz = 0.0;
  std::vector<std::string> classes;
  std::vector<Epoch> epochs;

  std::size_t n_classes() const noexcept { return classes.size(); }

  /// Sample count shared by every epoch, or 0 when empty or ragged.
  std::size_t n_samples() const noexcept {
    if (epochs.empty()) return 0;
    const auto n = epochs.front().samples;
    for (const auto& e : epochs)
      if (e.samples != n) return 0;
    return n;
  }

  std::vector<std::size_t> labels() const {
    std::vector<std::size_t> out;
    out.reserve(epochs.size());
    for (const auto& e : epochs) out.push_back(e.label);
    return out;
  }

  bool operator==(const Dataset&) const = default;
};

inline void validate_dataset(const Dataset& ds) {
  require(!ds.classes.empty(), Errc::InvalidManifest, "dataset declares no classes");
  require(std::isfinite(ds.fs_hz) && ds.fs_hz > 0.0, Errc::InvalidManifest, "dataset sampling rate must be positive");
  for (const auto& e : ds.epochs) {
    validate_epoch(e, ds.montage, ds.n_classes());
    require(e.fs_hz == ds.fs_hz, Errc::ChannelMismatch, "epoch sampling rate differs from dataset");
  }
}

/// Derives an independent 64-bit seed for a named component from a root seed (splitmix64 finalizer).
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) noexcept {
  std::uint64_t z = root + 0x9E3779B97F4A7C15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t seed_stream(std::string_view tag) noexcept {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

/// Uniform double in [0, 1) from the top 53 bits; portable across standard libraries.
template <class Engine>
double uniform01(Engine& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on uniform01; portable across standard libraries.
template <class Engine>
double standard_normal(Engine& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

/// Fisher-Yates with uniform01 so the permutation is identical on every platform.
template <class T, class Engine>
void portable_shuffle(std::vector<T>& v, Engine& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
    std::swap(v[i - 1], v[std::min(j, i - 1)]);
  }
}

}  // namespace vpg
