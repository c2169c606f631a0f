// include/specstyle/dsp.hpp
//
// Time-domain <-> log-magnitude spectrogram conversions: windowed STFT,
// least-squares overlap-add inverse, Griffin-Lim phase recovery and
// band-limited resampling. All math in double.

#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "specstyle/common.hpp"

namespace specstyle::dsp {

enum class Window { hann, rectangular };

struct StftConfig {
  int fft_size = 1024;
  int hop = 256;
  Window window = Window::hann;
};

// Mono waveform, amplitudes nominally in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 16000;
};

// One-sided STFT, row-major [bins x frames] with bins = fft_size/2 + 1.
struct ComplexSpectrogram {
  int bins = 0;
  int frames = 0;
  std::vector<std::complex<double>> data;
  StftConfig config;
  int sample_rate = 0;

  std::complex<double>& at(int bin, int frame) { return data[size_t(bin) * frames + frame]; }
  const std::complex<double>& at(int bin, int frame) const { return data[size_t(bin) * frames + frame]; }
};

// Natural-log magnitudes, floored at ln(epsilon). Same layout.
struct LogMagSpectrogram {
  int bins = 0;
  int frames = 0;
  std::vector<double> values;
  StftConfig config;
  int sample_rate = 0;
  double epsilon = 1e-10;

  double& at(int bin, int frame) { return values[size_t(bin) * frames + frame]; }
  double at(int bin, int frame) const { return values[size_t(bin) * frames + frame]; }
};

// Window coefficients, length cfg.fft_size. Hann is the periodic variant.
std::vector<double> make_window(const StftConfig& cfg);

// Frames start at t*hop; frame count is floor((len - fft_size)/hop) + 1.
// Throws ValueError if the clip is shorter than one window.
ComplexSpectrogram stft(const AudioClip& clip, const StftConfig& cfg);

// Least-squares synthesis: inverse-DFT each frame, window again, overlap-add
// and divide by the summed squared window. Samples whose normalizer is zero
// carry no signal energy and are emitted as 0; a zero normalizer outside the
// half-window edge regions means the config is not invertible -> ValueError.
AudioClip istft(const ComplexSpectrogram& spec);

LogMagSpectrogram log_magnitude(const ComplexSpectrogram& spec, double epsilon = 1e-10);

// Iterative phase recovery. Starts from seeded uniform random phase, then
// alternates magnitude substitution with istft/stft projections; the
// normalized magnitude error ||(|STFT(x_n)|) - M||_F / ||M||_F is recorded
// per iteration in *convergence when given, and is non-increasing.
AudioClip griffin_lim(const LogMagSpectrogram& mag, int iterations,
                      uint64_t seed, std::vector<double>* convergence = nullptr);

// Windowed-sinc resampler; output length is round(len * target/source).
AudioClip resample(const AudioClip& clip, int target_rate);

}  // namespace specstyle::dsp
