// semiasr/corpus/logmel.hpp
#pragma once

#include <span>

#include "semiasr/nn/tensor.hpp"

namespace semiasr::corpus {

struct LogMelConfig {
  std::size_t window = 400;
  std::size_t hop = 160;
  std::size_t bins = 40;
  double floor = 1e-10;
  std::size_t fft_size = 512;
  double sample_rate = 16000.0;
  double low_hz = 0.0;
  double high_hz = 8000.0;

  void validate() const;
};

/// Number of frames without padding: floor((len - window) / hop) + 1.
std::size_t frame_count(std::size_t length, const LogMelConfig& config);

/// Centre frequency (Hz) of mel filter `bin` (0-based), HTK mel scale.
double mel_center_hz(const LogMelConfig& config, std::size_t bin);

/// Triangular mel filterbank weights [bins, fft_size/2 + 1].
nn::Tensor mel_filterbank(const LogMelConfig& config);

/// Hann-windowed power spectrum -> mel filterbank -> log(power + floor).
/// Returns [frames, bins]. Throws when the input is shorter than one window.
nn::Tensor logmel(std::span<const float> samples, const LogMelConfig& config = {});

}  // namespace semiasr::corpus
