#include "specstyle/pipeline.hpp"

#include <cmath>

#include "specstyle/ops.hpp"
#include "specstyle/tensor.hpp"

namespace specstyle::pipeline {

StylizeResult stylize(const dsp::AudioClip& input,
                      const model::NetworkWeights<float>& stn, double norm_mean,
                      double norm_std, const dsp::StftConfig& stft_cfg, int model_rate,
                      const StylizeOptions& opt) {
  stn.arch.validate();
  if (!(norm_std > 0.0)) throw ValueError("stylize: normalization std must be positive");
  if (opt.gl_iterations < 1) throw ValueError("stylize: need at least one reconstruction iteration");

  const int64_t H = stn.arch.input_h;
  const int64_t W = stn.arch.input_w;
  if (int64_t(stft_cfg.fft_size) != 2 * H) {
    throw ValueError("stylize: network expects " + std::to_string(H) +
                     " frequency rows, which needs fft size " + std::to_string(2 * H) +
                     ", got " + std::to_string(stft_cfg.fft_size));
  }

  const dsp::AudioClip clip = dsp::resample(input, model_rate);
  if (int64_t(clip.samples.size()) < int64_t(stft_cfg.fft_size)) {
    throw ValueError("stylize: input is shorter than one analysis frame");
  }
  const dsp::ComplexSpectrogram spec = dsp::stft(clip, stft_cfg);
  const dsp::LogMagSpectrogram logm = dsp::log_magnitude(spec);

  const int64_t nwin = int64_t(logm.frames) / W;
  if (nwin == 0) {
    throw ValueError("stylize: input is shorter than one " + std::to_string(W) +
                     "-frame window");
  }
  const int64_t frames = nwin * W;

  StylizeResult res;
  res.windows = nwin;

  // Network input view: the first H bins of the kept frames (Nyquist dropped).
  res.content_logmag.bins = int(H) + 1;
  res.content_logmag.frames = int(frames);
  res.content_logmag.config = stft_cfg;
  res.content_logmag.sample_rate = model_rate;
  res.content_logmag.epsilon = logm.epsilon;
  res.content_logmag.values.assign(size_t((H + 1) * frames), 0.0);
  for (int64_t bin = 0; bin <= H; ++bin) {
    for (int64_t t = 0; t < frames; ++t) {
      res.content_logmag.at(int(bin), int(t)) = logm.at(int(bin), int(t));
    }
  }

  res.output_logmag = res.content_logmag;
  const double log_floor = std::log(logm.epsilon);
  const double inv_std = 1.0 / norm_std;

  for (int64_t k = 0; k < nwin; ++k) {
    std::vector<float> window(size_t(H * W));
    for (int64_t bin = 0; bin < H; ++bin) {
      for (int64_t t = 0; t < W; ++t) {
        const double v = logm.at(int(bin), int(k * W + t));
        window[size_t(bin * W + t)] = float((v - norm_mean) * inv_std);
      }
    }
    nn::Tape<float> tape;
    auto x = tape.constant({1, 1, H, W}, std::move(window));
    auto y = model::autoencode(tape, stn, x, nn::BnMode::eval, /*trainable=*/false);
    const std::vector<float>& out = y.values();
    for (int64_t bin = 0; bin < H; ++bin) {
      for (int64_t t = 0; t < W; ++t) {
        const double v = double(out[size_t(bin * W + t)]) * norm_std + norm_mean;
        res.output_logmag.at(int(bin), int(k * W + t)) = v;
      }
    }
  }
  // The network does not predict the Nyquist row; reconstruct with it silent.
  for (int64_t t = 0; t < frames; ++t) {
    res.output_logmag.at(int(H), int(t)) = log_floor;
  }

  res.audio = dsp::griffin_lim(res.output_logmag, opt.gl_iterations, opt.gl_seed,
                               &res.gl_convergence);
  const size_t keep = size_t(frames) * size_t(stft_cfg.hop);
  if (res.audio.samples.size() > keep) res.audio.samples.resize(keep);
  res.audio.sample_rate = model_rate;
  return res;
}

}  // namespace specstyle::pipeline
