#pragma once

// Dataset directory format:
//
//   <dir>/manifest.json
//     { "name", "fs_hz", "n_channels", "channel_names": [...], "occipital_channels": [...],
//       "n_samples", "classes": [...], "trials": [ { "file", "label", "kind" } ] }
//   <dir>/<file>   one per trial, n_channels * n_samples little-endian float32, channel-major.

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "vpg/core.hpp"

namespace vpg {

namespace detail {

inline std::uint32_t to_little_endian(std::uint32_t v) noexcept {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  } else {
    return v;
  }
}

inline void write_f32_le(std::ostream& os, std::span<const float> values) {
  std::vector<std::uint32_t> buf(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) buf[i] = to_little_endian(std::bit_cast<std::uint32_t>(values[i]));
  os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size() * sizeof(std::uint32_t)));
}

inline std::vector<float> read_f32_le(const std::string& bytes) {
  std::vector<float> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t raw;
    std::memcpy(&raw, bytes.data() + 4 * i, 4);
    out[i] = std::bit_cast<float>(to_little_endian(raw));
  }
  return out;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), Errc::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

inline std::string trial_file_name(std::size_t index) {
  std::ostringstream ss;
  ss << "trial_" << std::setw(5) << std::setfill('0') << index << ".f32";
  return ss.str();
}

}  // namespace detail

/// Writes `ds` as a dataset directory. Existing trial files with the same names are overwritten.
inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  validate_dataset(ds);
  const std::size_t n_samples = ds.n_samples();
  require(ds.epochs.empty() || n_samples > 0, Errc::ShapeMismatch, "all epochs must share one sample count");

  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec && std::filesystem::is_directory(dir), Errc::IoError, "cannot create directory " + dir.string());

  nlohmann::json trials = nlohmann::json::array();
  for (std::size_t i = 0; i < ds.epochs.size(); ++i) {
    const auto& e = ds.epochs[i];
    const auto file = detail::trial_file_name(i);
    std::ofstream os(dir / file, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(os), Errc::IoError, "cannot write " + (dir / file).string());
    detail::write_f32_le(os, e.data);
    require(static_cast<bool>(os), Errc::IoError, "write failed for " + (dir / file).string());
    trials.push_back({{"file", file}, {"label", e.label}, {"kind", std::string(to_string(e.kind))}});
  }

  nlohmann::json manifest{
      {"name", ds.name},
      {"fs_hz", ds.fs_hz},
      {"n_channels", ds.montage.size()},
      {"channel_names", ds.montage.channel_names()},
      {"occipital_channels", ds.montage.occipital_names()},
      {"n_samples", n_samples},
      {"classes", ds.classes},
      {"trials", std::move(trials)},
  };
  std::ofstream os(dir / "manifest.json", std::ios::trunc);
  require(static_cast<bool>(os), Errc::IoError, "cannot write manifest in " + dir.string());
  os << manifest.dump(2) << '\n';
  require(static_cast<bool>(os), Errc::IoError, "manifest write failed in " + dir.string());
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  require(std::filesystem::is_regular_file(manifest_path), Errc::MissingManifest,
          "no manifest.json in " + dir.string());

  nlohmann::json m;
  try {
    m = nlohmann::json::parse(detail::read_file(manifest_path));
  } catch (const nlohmann::json::exception& ex) {
    fail(Errc::InvalidManifest, ex.what());
  }

  Dataset ds;
  std::size_t n_channels = 0, n_samples = 0;
  std::vector<std::string> names, occipital;
  bool has_occipital = false;
  try {
    ds.name = m.value("name", std::string{});
    ds.fs_hz = m.at("fs_hz").get<double>();
    n_channels = m.at("n_channels").get<std::size_t>();
    n_samples = m.at("n_samples").get<std::size_t>();
    names = m.at("channel_names").get<std::vector<std::string>>();
    if (m.contains("occipital_channels")) {
      occipital = m.at("occipital_channels").get<std::vector<std::string>>();
      has_occipital = true;
    }
    ds.classes = m.at("classes").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& ex) {
    fail(Errc::InvalidManifest, ex.what());
  }
  require(names.size() == n_channels, Errc::ChannelMismatch,
          "n_channels=" + std::to_string(n_channels) + " but " + std::to_string(names.size()) + " channel names");
  ds.montage = has_occipital ? Montage::with_occipital_names(std::move(names), occipital) : Montage(std::move(names));

  const auto& trials = m.contains("trials") ? m.at("trials") : nlohmann::json::array();
  require(trials.is_array(), Errc::InvalidManifest, "trials must be an array");
  ds.epochs.reserve(trials.size());
  for (const auto& t : trials) {
    std::string file, kind_text;
    std::size_t label = 0;
    try {
      file = t.at("file").get<std::string>();
      label = t.at("label").get<std::size_t>();
      kind_text = t.at("kind").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      fail(Errc::InvalidManifest, ex.what());
    }
    const auto kind = parse_trial_kind(kind_text);
    require(kind.has_value(), Errc::InvalidManifest, "unknown trial kind '" + kind_text + "'");

    const auto bytes = detail::read_file(dir / file);
    const std::size_t expected = n_channels * n_samples * sizeof(float);
    require(bytes.size() == expected, Errc::TruncatedPayload,
            file + ": " + std::to_string(bytes.size()) + " bytes, expected " + std::to_string(expected));

    Epoch e;
    e.channels = n_channels;
    e.samples = n_samples;
    e.data = detail::read_f32_le(bytes);
    e.fs_hz = ds.fs_hz;
    e.label = label;
    e.kind = *kind;
    validate_epoch(e, ds.montage, ds.n_classes());
    ds.epochs.push_back(std::move(e));
  }
  return ds;
}

}  // namespace vpg
