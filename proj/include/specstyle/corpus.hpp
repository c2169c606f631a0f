// include/specstyle/corpus.hpp
//
// Dataset plumbing: 16-bit PCM WAV in/out, offline preparation of fixed-size
// log-magnitude spectrogram windows, the tab-separated manifest that indexes
// them, and a shuffling batch stream for training.
//
// On disk a prepared corpus is a directory of raw float32 files, one window
// per file ("<utterance>_<k>.f32", row-major [bin][frame], 512 x 256 by
// default, unnormalized log magnitudes) plus "manifest.txt":
//
//   <id>\t<source_path>\t<rate>\t<num_windows>     one line per utterance
//   ...
//   #stats mean=<v> std=<v>                        corpus-wide scalars
//   #stft fft=<n> hop=<n> window=<hann|rect>       geometry used to prepare

#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

#include "specstyle/common.hpp"
#include "specstyle/dsp.hpp"

namespace specstyle::corpus {

class WavError : public IoError {
 public:
  enum class Kind { bad_magic, unsupported, truncated, empty, io };

  WavError(Kind k, const std::string& msg) : IoError(msg), kind(k) {}

  Kind kind;
};

// Reads a PCM WAV file. Only 16-bit integer PCM is accepted; multi-channel
// audio is mixed down to mono by averaging. Samples are scaled to [-1, 1)
// by 1/32768.
dsp::AudioClip load_wav(const std::string& path);

// Writes mono 16-bit PCM; samples are clamped to [-1, 1] before quantizing.
void save_wav(const dsp::AudioClip& clip, const std::string& path);

struct ManifestEntry {
  std::string id;
  std::string source_path;
  int64_t sample_rate = 0;  // rate of the prepared windows
  int64_t num_windows = 0;
};

struct Manifest {
  std::vector<ManifestEntry> entries;
  double mean = 0.0;
  double std_dev = 1.0;
  dsp::StftConfig stft;
  std::string root_dir;  // directory holding the window files (set on load)

  int64_t total_windows() const {
    int64_t n = 0;
    for (const auto& e : entries) n += e.num_windows;
    return n;
  }
};

struct PrepareOptions {
  dsp::StftConfig stft;           // 1024 / 256 / Hann by default
  int64_t target_rate = 16000;
  int64_t window_frames = 256;
  int64_t crop_bins = 512;        // bins kept per frame (Nyquist row dropped)
  double epsilon = 1e-10;         // log-magnitude floor
};

struct PrepareReport {
  Manifest manifest;
  int64_t utterances_seen = 0;
  int64_t utterances_skipped = 0;  // shorter than one window
};

// Scans input_dir recursively for .wav files (sorted by path, so the result
// is reproducible), resamples to target_rate, computes log-magnitude
// spectrograms, crops to crop_bins rows, slices into non-overlapping
// window_frames-column windows (remainder frames dropped), and writes the
// windows plus manifest.txt into output_dir. Utterances shorter than one
// window are skipped with a warning on `log`. Corpus mean/std are computed
// over every stored value. Running it twice on the same input produces
// byte-identical output.
PrepareReport prepare_dataset(const std::string& input_dir, const std::string& output_dir,
                              const PrepareOptions& opt, std::ostream* log = nullptr);

void write_manifest(const Manifest& m, const std::string& dir);

// Reads <dir>/manifest.txt; malformed lines or footers raise IoError.
Manifest load_manifest(const std::string& dir);

// Raw (unnormalized) windows of a prepared corpus, in manifest order.
struct WindowSet {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<std::vector<float>> windows;
  std::vector<std::string> names;  // "<id>_<k>"
};

WindowSet load_windows(const Manifest& m, int64_t rows, int64_t cols);

// Shuffled mini-batches of normalized windows. Each epoch reshuffles with the
// continuation of the same seeded generator; partial batches at the end of an
// epoch are dropped. Deterministic: same windows + seed => same batch order.
class BatchStream {
 public:
  struct Batch {
    std::vector<float> values;        // [b, 1, rows, cols] row-major
    std::vector<std::string> names;   // window names, for diagnostics
    int64_t b = 0, rows = 0, cols = 0;
  };

  BatchStream(WindowSet windows, double mean, double std_dev, int64_t batch_size,
              uint64_t seed);

  static BatchStream from_manifest(const Manifest& m, int64_t rows, int64_t cols,
                                   int64_t batch_size, uint64_t seed) {
    return BatchStream(load_windows(m, rows, cols), m.mean, m.std_dev, batch_size, seed);
  }

  Batch next();

  int64_t batch_size() const { return batch_size_; }
  int64_t batches_per_epoch() const {
    return int64_t(set_.windows.size()) / batch_size_;
  }

 private:
  void reshuffle();

  WindowSet set_;
  double mean_;
  double std_dev_;
  int64_t batch_size_;
  std::mt19937_64 rng_;
  std::vector<size_t> order_;
  size_t cursor_ = 0;
};

}  // namespace specstyle::corpus
