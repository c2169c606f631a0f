// src/dsp.cpp

#include "specstyle/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace specstyle::dsp {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 transform; sign = -1 forward, +1 inverse
// (inverse does not scale, caller divides by n).
void fft_pow2(std::vector<std::complex<double>>& a, int sign) {
  const size_t n = a.size();
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * kPi / double(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t j = 0; j < len / 2; ++j) {
        std::complex<double> u = a[i + j];
        std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

// O(n^2) fallback for non-power-of-two sizes.
void dft_naive(std::vector<std::complex<double>>& a, int sign) {
  const size_t n = a.size();
  std::vector<std::complex<double>> out(n);
  for (size_t k = 0; k < n; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (size_t t = 0; t < n; ++t) {
      const double ang = sign * 2.0 * kPi * double(k) * double(t) / double(n);
      acc += a[t] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  a = std::move(out);
}

void transform(std::vector<std::complex<double>>& a, int sign) {
  if (is_pow2(int(a.size()))) {
    fft_pow2(a, sign);
  } else {
    dft_naive(a, sign);
  }
}

void check_config(const StftConfig& cfg) {
  if (cfg.fft_size <= 0) throw ValueError("fft_size must be positive");
  if (cfg.hop <= 0) throw ValueError("hop must be positive");
  if (cfg.hop > cfg.fft_size) throw ValueError("hop must not exceed fft_size");
}

// Rebuild the full conjugate-symmetric spectrum of one frame.
void expand_onesided(const ComplexSpectrogram& spec, int frame,
                     std::vector<std::complex<double>>& full) {
  const int n = spec.config.fft_size;
  full.assign(size_t(n), {0.0, 0.0});
  for (int k = 0; k < spec.bins; ++k) full[size_t(k)] = spec.at(k, frame);
  for (int k = spec.bins; k < n; ++k) full[size_t(k)] = std::conj(spec.at(n - k, frame));
}

}  // namespace

std::vector<double> make_window(const StftConfig& cfg) {
  check_config(cfg);
  std::vector<double> w(size_t(cfg.fft_size), 1.0);
  if (cfg.window == Window::hann) {
    for (int i = 0; i < cfg.fft_size; ++i) {
      w[size_t(i)] = 0.5 - 0.5 * std::cos(2.0 * kPi * double(i) / double(cfg.fft_size));
    }
  }
  return w;
}

ComplexSpectrogram stft(const AudioClip& clip, const StftConfig& cfg) {
  check_config(cfg);
  if (clip.sample_rate <= 0) throw ValueError("sample_rate must be positive");
  const int n = cfg.fft_size;
  const int64_t len = int64_t(clip.samples.size());
  if (len < n) {
    throw ValueError("clip too short for one analysis window (" +
                     std::to_string(len) + " < " + std::to_string(n) + " samples)");
  }
  const int frames = int((len - n) / cfg.hop) + 1;
  const std::vector<double> win = make_window(cfg);

  ComplexSpectrogram spec;
  spec.bins = n / 2 + 1;
  spec.frames = frames;
  spec.config = cfg;
  spec.sample_rate = clip.sample_rate;
  spec.data.assign(size_t(spec.bins) * frames, {0.0, 0.0});

  std::vector<std::complex<double>> buf(static_cast<size_t>(n));
  for (int t = 0; t < frames; ++t) {
    const double* seg = clip.samples.data() + size_t(t) * cfg.hop;
    for (int i = 0; i < n; ++i) buf[size_t(i)] = {seg[i] * win[size_t(i)], 0.0};
    transform(buf, -1);
    for (int k = 0; k < spec.bins; ++k) spec.at(k, t) = buf[size_t(k)];
  }
  return spec;
}

AudioClip istft(const ComplexSpectrogram& spec) {
  check_config(spec.config);
  const int n = spec.config.fft_size;
  const int hop = spec.config.hop;
  if (spec.bins != n / 2 + 1) throw ShapeError("spectrogram bin count does not match fft_size");
  if (spec.frames < 1) throw ShapeError("spectrogram has no frames");

  const std::vector<double> win = make_window(spec.config);
  const int64_t out_len = int64_t(spec.frames - 1) * hop + n;
  std::vector<double> acc(size_t(out_len), 0.0);
  std::vector<double> norm(size_t(out_len), 0.0);

  std::vector<std::complex<double>> full;
  for (int t = 0; t < spec.frames; ++t) {
    expand_onesided(spec, t, full);
    transform(full, +1);
    const int64_t off = int64_t(t) * hop;
    for (int i = 0; i < n; ++i) {
      const double y = full[size_t(i)].real() / double(n);
      acc[size_t(off + i)] += win[size_t(i)] * y;
      norm[size_t(off + i)] += win[size_t(i)] * win[size_t(i)];
    }
  }

  // Zero normalizer inside the fully-overlapped region means samples were
  // irrecoverably lost by the analysis windowing.
  const int64_t edge = n / 2;
  for (int64_t i = edge; i < out_len - edge; ++i) {
    if (norm[size_t(i)] < 1e-12) {
      throw ValueError("window/hop combination is not invertible (zero overlap at sample " +
                       std::to_string(i) + ")");
    }
  }

  AudioClip clip;
  clip.sample_rate = spec.sample_rate;
  clip.samples.resize(size_t(out_len));
  for (int64_t i = 0; i < out_len; ++i) {
    clip.samples[size_t(i)] = norm[size_t(i)] < 1e-12 ? 0.0 : acc[size_t(i)] / norm[size_t(i)];
  }
  return clip;
}

LogMagSpectrogram log_magnitude(const ComplexSpectrogram& spec, double epsilon) {
  if (!(epsilon > 0.0)) throw ValueError("epsilon must be positive");
  LogMagSpectrogram out;
  out.bins = spec.bins;
  out.frames = spec.frames;
  out.config = spec.config;
  out.sample_rate = spec.sample_rate;
  out.epsilon = epsilon;
  out.values.resize(spec.data.size());
  for (size_t i = 0; i < spec.data.size(); ++i) {
    out.values[i] = std::log(std::max(std::abs(spec.data[i]), epsilon));
  }
  return out;
}

AudioClip griffin_lim(const LogMagSpectrogram& mag, int iterations, uint64_t seed,
                      std::vector<double>* convergence) {
  if (iterations < 1) throw ValueError("griffin_lim needs at least one iteration");
  const size_t total = mag.values.size();

  std::vector<double> target(total);
  double target_norm_sq = 0.0;
  for (size_t i = 0; i < total; ++i) {
    target[i] = std::exp(mag.values[i]);
    target_norm_sq += target[i] * target[i];
  }
  const double target_norm = std::sqrt(target_norm_sq);

  // Unit phasors, random start.
  std::vector<std::complex<double>> phase(total);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-kPi, kPi);
  for (size_t i = 0; i < total; ++i) {
    const double a = uni(rng);
    phase[i] = {std::cos(a), std::sin(a)};
  }

  ComplexSpectrogram work;
  work.bins = mag.bins;
  work.frames = mag.frames;
  work.config = mag.config;
  work.sample_rate = mag.sample_rate;
  work.data.resize(total);

  if (convergence != nullptr) convergence->clear();
  for (int it = 0; it < iterations; ++it) {
    for (size_t i = 0; i < total; ++i) work.data[i] = target[i] * phase[i];
    const AudioClip x = istft(work);
    const ComplexSpectrogram est = stft(x, mag.config);
    double err_sq = 0.0;
    for (size_t i = 0; i < total; ++i) {
      const double m = std::abs(est.data[i]);
      const double d = m - target[i];
      err_sq += d * d;
      phase[i] = m > 0.0 ? est.data[i] / m : std::complex<double>(1.0, 0.0);
    }
    if (convergence != nullptr) {
      convergence->push_back(target_norm > 0.0 ? std::sqrt(err_sq) / target_norm
                                               : std::sqrt(err_sq));
    }
  }

  for (size_t i = 0; i < total; ++i) work.data[i] = target[i] * phase[i];
  return istft(work);
}

AudioClip resample(const AudioClip& clip, int target_rate) {
  if (target_rate <= 0) throw ValueError("target_rate must be positive");
  if (clip.sample_rate <= 0) throw ValueError("sample_rate must be positive");
  if (target_rate == clip.sample_rate) return clip;

  const int64_t src_len = int64_t(clip.samples.size());
  const double ratio = double(target_rate) / double(clip.sample_rate);
  const int64_t out_len = std::llround(double(src_len) * ratio);

  AudioClip out;
  out.sample_rate = target_rate;
  out.samples.assign(size_t(std::max<int64_t>(out_len, 0)), 0.0);
  if (src_len == 0 || out_len <= 0) return out;

  // Cutoff at 95% of the narrower Nyquist; sinc radius covers 24 zero
  // crossings of the decimated kernel.
  const double fc = 0.5 * std::min(1.0, ratio) * 0.95;
  const double radius = 24.0 / (2.0 * fc);
  const int64_t r = int64_t(std::ceil(radius));

  for (int64_t i = 0; i < out_len; ++i) {
    const double center = double(i) / ratio;
    const int64_t m0 = std::max<int64_t>(0, int64_t(std::ceil(center)) - r);
    const int64_t m1 = std::min<int64_t>(src_len - 1, int64_t(std::floor(center)) + r);
    double acc = 0.0;
    double wsum = 0.0;
    for (int64_t m = m0; m <= m1; ++m) {
      const double t = double(m) - center;
      double s;
      if (std::abs(t) < 1e-12) {
        s = 2.0 * fc;
      } else {
        s = std::sin(2.0 * kPi * fc * t) / (kPi * t);
      }
      // Hann taper over the truncated support
      const double w = 0.5 + 0.5 * std::cos(kPi * t / radius);
      const double h = s * w;
      acc += clip.samples[size_t(m)] * h;
      wsum += h;
    }
    out.samples[size_t(i)] = wsum != 0.0 ? acc / wsum : 0.0;
  }
  return out;
}

}  // namespace specstyle::dsp
