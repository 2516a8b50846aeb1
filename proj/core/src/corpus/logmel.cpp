// corpus/logmel.cpp
#include "semiasr/corpus/logmel.hpp"

#include <fftw3.h>

#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "semiasr/error.hpp"

namespace semiasr::corpus {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

// The FFTW planner is not thread-safe; executing an existing plan is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};

}  // namespace

void LogMelConfig::validate() const {
  if (hop == 0) throw ConfigError("logmel.hop", "must be positive");
  if (window < hop) throw ConfigError("logmel.window", "must be >= hop");
  if (bins < 1) throw ConfigError("logmel.bins", "must be >= 1");
  if (fft_size < window) throw ConfigError("logmel.fft_size", "must be >= window");
  if (!(floor > 0.0)) throw ConfigError("logmel.floor", "must be positive");
  if (!(high_hz > low_hz)) throw ConfigError("logmel.high_hz", "must exceed low_hz");
}

std::size_t frame_count(std::size_t length, const LogMelConfig& config) {
  if (length < config.window) return 0;
  return (length - config.window) / config.hop + 1;
}

double mel_center_hz(const LogMelConfig& c, std::size_t bin) {
  const double lo = hz_to_mel(c.low_hz);
  const double hi = hz_to_mel(c.high_hz);
  const double step = (hi - lo) / static_cast<double>(c.bins + 1);
  return mel_to_hz(lo + step * static_cast<double>(bin + 1));
}

nn::Tensor mel_filterbank(const LogMelConfig& c) {
  c.validate();
  const std::size_t nfreq = c.fft_size / 2 + 1;
  nn::Tensor fb = nn::Tensor::matrix(c.bins, nfreq, 0.0);
  const double lo = hz_to_mel(c.low_hz);
  const double hi = hz_to_mel(c.high_hz);
  const double step = (hi - lo) / static_cast<double>(c.bins + 1);
  for (std::size_t m = 0; m < c.bins; ++m) {
    const double left = mel_to_hz(lo + step * static_cast<double>(m));
    const double center = mel_to_hz(lo + step * static_cast<double>(m + 1));
    const double right = mel_to_hz(lo + step * static_cast<double>(m + 2));
    for (std::size_t k = 0; k < nfreq; ++k) {
      const double f = static_cast<double>(k) * c.sample_rate / static_cast<double>(c.fft_size);
      double w = 0.0;
      if (f > left && f <= center) {
        w = (f - left) / (center - left);
      } else if (f > center && f < right) {
        w = (right - f) / (right - center);
      }
      fb(m, k) = w;
    }
  }
  return fb;
}

nn::Tensor logmel(std::span<const float> samples, const LogMelConfig& c) {
  c.validate();
  if (samples.size() < c.window) {
    throw Error("logmel: input of " + std::to_string(samples.size()) + " samples is shorter than the window of " +
                std::to_string(c.window));
  }
  const std::size_t frames = frame_count(samples.size(), c);
  const std::size_t nfreq = c.fft_size / 2 + 1;
  const nn::Tensor fb = mel_filterbank(c);

  std::vector<double> window(c.window);
  for (std::size_t i = 0; i < c.window; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(c.window));
  }

  std::unique_ptr<double, decltype(&fftw_free)> in(fftw_alloc_real(c.fft_size), &fftw_free);
  std::unique_ptr<fftw_complex, decltype(&fftw_free)> out(fftw_alloc_complex(nfreq), &fftw_free);
  std::unique_ptr<fftw_plan_s, PlanDeleter> plan;
  {
    std::lock_guard<std::mutex> lock(planner_mutex());
    plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(c.fft_size), in.get(), out.get(), FFTW_ESTIMATE));
  }

  nn::Tensor result = nn::Tensor::matrix(frames, c.bins, 0.0);
  std::vector<double> power(nfreq);
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t off = f * c.hop;
    for (std::size_t i = 0; i < c.fft_size; ++i) {
      in.get()[i] = i < c.window ? static_cast<double>(samples[off + i]) * window[i] : 0.0;
    }
    fftw_execute(plan.get());
    for (std::size_t k = 0; k < nfreq; ++k) {
      const double re = out.get()[k][0];
      const double im = out.get()[k][1];
      power[k] = re * re + im * im;
    }
    for (std::size_t m = 0; m < c.bins; ++m) {
      double e = 0.0;
      for (std::size_t k = 0; k < nfreq; ++k) e += fb(m, k) * power[k];
      result(f, m) = std::log(e + c.floor);
    }
  }
  return result;
}

}  // namespace semiasr::corpus
