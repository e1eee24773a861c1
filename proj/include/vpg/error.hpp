#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vpg {

// Every failure raised by the library carries one of these codes.
enum class Errc {
  // dataset format
  MissingManifest,
  InvalidManifest,
  TruncatedPayload,
  ChannelMismatch,
  NonFiniteSample,
  EmptyChannels,
  LabelOutOfRange,
  IoError,
  // dsp
  InvalidBand,
  NyquistViolation,
  UnstableFilter,
  NonIntegerRatio,
  BandOutOfRange,
  WindowTooLong,
  EpochTooShort,
  // transform
  DegenerateRange,
  InputOutOfRange,
  ShapeMismatch,
  MissingLabel,
  // nn
  KernelTooLarge,
  InvalidEpsilon,
  InvalidCheckpoint,
  // experiment / synth
  TooFewPerClass,
  IncompatibleDatasets,
  InvalidConfig,
  EmptyDataset,
  InvalidArgument,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MissingManifest: return "MissingManifest";
    case Errc::InvalidManifest: return "InvalidManifest";
    case Errc::TruncatedPayload: return "TruncatedPayload";
    case Errc::ChannelMismatch: return "ChannelMismatch";
    case Errc::NonFiniteSample: return "NonFiniteSample";
    case Errc::EmptyChannels: return "EmptyChannels";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::IoError: return "IoError";
    case Errc::InvalidBand: return "InvalidBand";
    case Errc::NyquistViolation: return "NyquistViolation";
    case Errc::UnstableFilter: return "UnstableFilter";
    case Errc::NonIntegerRatio: return "NonIntegerRatio";
    case Errc::BandOutOfRange: return "BandOutOfRange";
    case Errc::WindowTooLong: return "WindowTooLong";
    case Errc::EpochTooShort: return "EpochTooShort";
    case Errc::DegenerateRange: return "DegenerateRange";
    case Errc::InputOutOfRange: return "InputOutOfRange";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::MissingLabel: return "MissingLabel";
    case Errc::KernelTooLarge: return "KernelTooLarge";
    case Errc::InvalidEpsilon: return "InvalidEpsilon";
    case Errc::InvalidCheckpoint: return "InvalidCheckpoint";
    case Errc::TooFewPerClass: return "TooFewPerClass";
    case Errc::IncompatibleDatasets: return "IncompatibleDatasets";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool cond, Errc code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace vpg
