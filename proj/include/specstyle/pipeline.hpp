// include/specstyle/pipeline.hpp
//
// End-to-end stylization: waveform -> log-magnitude windows -> transformation
// network -> phase reconstruction -> waveform. The network processes
// fixed-size windows; their outputs are re-concatenated and a single phase
// reconstruction runs over the full utterance.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specstyle/dsp.hpp"
#include "specstyle/net.hpp"

namespace specstyle::pipeline {

struct StylizeOptions {
  int gl_iterations = 60;
  uint64_t gl_seed = 0;
};

struct StylizeResult {
  dsp::AudioClip audio;                  // reconstructed waveform, model rate
  dsp::LogMagSpectrogram content_logmag; // network input view (trimmed)
  dsp::LogMagSpectrogram output_logmag;  // network output with Nyquist row
  int64_t windows = 0;
  std::vector<double> gl_convergence;    // per-iteration relative error
};

// Normalization scalars and STFT geometry must be the ones the network was
// trained with (they travel inside the checkpoint as meta tensors). Frames
// beyond the last full window are dropped; the waveform is trimmed to
// frames * hop samples. Fully deterministic for fixed inputs and options.
StylizeResult stylize(const dsp::AudioClip& input,
                      const model::NetworkWeights<float>& stn, double norm_mean,
                      double norm_std, const dsp::StftConfig& stft_cfg, int model_rate,
                      const StylizeOptions& opt);

}  // namespace specstyle::pipeline
