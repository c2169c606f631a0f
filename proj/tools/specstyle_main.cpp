// tools/specstyle_main.cpp
//
// Command-line front end. Subcommands:
//   prepare          scan WAVs -> windowed log-magnitude corpus + manifest
//   train-loss-net   reconstruction pretraining (the frozen loss network)
//   train-stn        style-transfer training against a trained loss network
//   stylize          apply a trained transformation network to a WAV
//   spectrogram-png  render a WAV's log-magnitude spectrogram to an image
//
// Configuration precedence: explicit flags beat values from the key=value
// config file named by SPECSTYLE_CONFIG (or --config), which beat defaults.
// Summaries go to stdout as key=value pairs; diagnostics go to stderr.
// Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <CLI11.hpp>
#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include "specstyle/checkpoint.hpp"
#include "specstyle/corpus.hpp"
#include "specstyle/dsp.hpp"
#include "specstyle/image.hpp"
#include "specstyle/net.hpp"
#include "specstyle/pipeline.hpp"
#include "specstyle/train.hpp"

namespace {

using namespace specstyle;

struct Meta {
  double mean = 0.0;
  double std_dev = 1.0;
  dsp::StftConfig stft;
  int rate = 16000;
};

std::vector<ckpt::NamedTensor> meta_tensors(double mean, double std_dev,
                                            const dsp::StftConfig& stft, int64_t rate) {
  return {
      {"meta.norm", {2}, {float(mean), float(std_dev)}},
      {"meta.stft", {3}, {float(stft.fft_size), float(stft.hop), float(rate)}},
  };
}

Meta parse_meta(const std::vector<ckpt::NamedTensor>& extra, const std::string& path) {
  const ckpt::NamedTensor* norm = nullptr;
  const ckpt::NamedTensor* stft = nullptr;
  for (const auto& t : extra) {
    if (t.name == "meta.norm") norm = &t;
    if (t.name == "meta.stft") stft = &t;
  }
  if (!norm || norm->data.size() != 2 || !stft || stft->data.size() != 3) {
    throw IoError(path + ": checkpoint lacks meta.norm/meta.stft tensors");
  }
  Meta m;
  m.mean = double(norm->data[0]);
  m.std_dev = double(norm->data[1]);
  m.stft.fft_size = int(std::lround(double(stft->data[0])));
  m.stft.hop = int(std::lround(double(stft->data[1])));
  m.stft.window = dsp::Window::hann;
  m.rate = int(std::lround(double(stft->data[2])));
  if (!(m.std_dev > 0.0) || m.stft.fft_size < 2 || m.stft.hop < 1 || m.rate < 1) {
    throw IoError(path + ": invalid meta tensors");
  }
  return m;
}

// First full window of a WAV under the given geometry, normalized; shaped
// [1, 1, rows, cols].
nn::Array<float> first_window(const std::string& wav_path, const Meta& meta, int64_t rows,
                              int64_t cols) {
  dsp::AudioClip clip = corpus::load_wav(wav_path);
  clip = dsp::resample(clip, meta.rate);
  if (int64_t(clip.samples.size()) < int64_t(meta.stft.fft_size)) {
    throw ValueError(wav_path + ": shorter than one analysis frame");
  }
  const dsp::ComplexSpectrogram spec = dsp::stft(clip, meta.stft);
  const dsp::LogMagSpectrogram logm = dsp::log_magnitude(spec);
  if (int64_t(logm.frames) < cols) {
    throw ValueError(wav_path + ": shorter than one " + std::to_string(cols) +
                     "-frame window");
  }
  if (int64_t(logm.bins) < rows) {
    throw ValueError(wav_path + ": spectrogram has too few frequency bins");
  }
  nn::Array<float> out({1, 1, rows, cols});
  const double inv = 1.0 / meta.std_dev;
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t t = 0; t < cols; ++t) {
      out.data[size_t(r * cols + t)] =
          float((logm.at(int(r), int(t)) - meta.mean) * inv);
    }
  }
  return out;
}

// ---- subcommand option bundles ---------------------------------------------

struct PrepareArgs {
  std::string in, out;
  int64_t rate = 16000;
  int64_t fft = 1024;
  int64_t hop = 256;
};

struct TrainLossArgs {
  std::string data, out;
  int64_t steps = 2000;
  int64_t batch = 24;
  double lr = 1e-3;
  double wd = 1e-4;
  uint64_t seed = 0;
  int64_t ckpt_interval = 0;
};

struct TrainStnArgs {
  std::string data, loss_net, style, out;
  double alpha = 100.0;
  double beta = 1e4;
  double b1 = 0.999;
  double b2 = 0.99;
  double lr = 1e-3;
  double wd = 0.0;
  int64_t steps = 500;
  int64_t batch = 24;
  uint64_t seed = 0;
  int64_t ckpt_interval = 0;
};

struct StylizeArgs {
  std::string in, stn, out, dump_spec;
  int64_t gl_iters = 60;
  uint64_t seed = 0;
};

struct SpectroArgs {
  std::string in, out;
  int64_t fft = 1024;
  int64_t hop = 256;
};

int run_prepare(const PrepareArgs& a) {
  corpus::PrepareOptions opt;
  opt.stft.fft_size = int(a.fft);
  opt.stft.hop = int(a.hop);
  opt.target_rate = a.rate;
  const corpus::PrepareReport rep = corpus::prepare_dataset(a.in, a.out, opt, &std::cerr);
  std::cout << "utterances=" << rep.utterances_seen
            << " skipped=" << rep.utterances_skipped
            << " windows=" << rep.manifest.total_windows() << " mean=" << rep.manifest.mean
            << " std=" << rep.manifest.std_dev << " out=" << a.out << "\n";
  return 0;
}

int run_train_loss(const TrainLossArgs& a) {
  const corpus::Manifest manifest = corpus::load_manifest(a.data);
  model::Architecture arch;
  auto stream = corpus::BatchStream::from_manifest(manifest, arch.input_h, arch.input_w,
                                                   a.batch, a.seed);
  train::TrainConfig cfg;
  cfg.learning_rate = a.lr;
  cfg.weight_decay = a.wd;
  cfg.batch_size = a.batch;
  cfg.steps = a.steps;
  cfg.seed = a.seed;
  cfg.checkpoint_path = a.out;
  cfg.checkpoint_interval = a.ckpt_interval;
  const int64_t rate =
      manifest.entries.empty() ? 16000 : manifest.entries.front().sample_rate;
  cfg.checkpoint_meta = meta_tensors(manifest.mean, manifest.std_dev, manifest.stft, rate);
  const train::TrainResult res = train::train_autoencoder(stream, arch, cfg, &std::cerr);
  const std::string csv = a.out + ".loss.csv";
  res.history.save_csv(csv);
  std::cout << "steps=" << a.steps << " final_loss=" << res.history.records.back().total
            << " checkpoint=" << a.out << " history=" << csv << "\n";
  return 0;
}

int run_train_stn(const TrainStnArgs& a) {
  model::Architecture arch;
  std::vector<ckpt::NamedTensor> extra;
  const model::NetworkWeights<float> loss_net =
      ckpt::load_network<float>(a.loss_net, arch, &extra);
  const Meta meta = parse_meta(extra, a.loss_net);

  // Content batches and the style window are normalized with the loss
  // network's training statistics so everything lives in its input domain.
  const corpus::Manifest manifest = corpus::load_manifest(a.data);
  corpus::BatchStream stream(corpus::load_windows(manifest, arch.input_h, arch.input_w),
                             meta.mean, meta.std_dev, a.batch, a.seed);
  const nn::Array<float> style_window =
      first_window(a.style, meta, arch.input_h, arch.input_w);

  train::TrainConfig cfg;
  cfg.learning_rate = a.lr;
  cfg.weight_decay = a.wd;
  cfg.beta1 = a.b1;
  cfg.beta2 = a.b2;
  cfg.alpha = a.alpha;
  cfg.beta = a.beta;
  cfg.batch_size = a.batch;
  cfg.steps = a.steps;
  cfg.seed = a.seed;
  cfg.checkpoint_path = a.out;
  cfg.checkpoint_interval = a.ckpt_interval;
  cfg.checkpoint_meta = meta_tensors(meta.mean, meta.std_dev, meta.stft, meta.rate);
  const train::TrainResult res =
      train::train_stn(stream, loss_net, style_window, cfg, &std::cerr);
  const std::string csv = a.out + ".loss.csv";
  res.history.save_csv(csv);
  const auto& last = res.history.records.back();
  std::cout << "steps=" << a.steps << " final_total=" << last.total
            << " final_content=" << last.content << " final_style=" << last.style
            << " checkpoint=" << a.out << " history=" << csv << "\n";
  return 0;
}

int run_stylize(const StylizeArgs& a) {
  model::Architecture arch;
  std::vector<ckpt::NamedTensor> extra;
  const model::NetworkWeights<float> stn = ckpt::load_network<float>(a.stn, arch, &extra);
  const Meta meta = parse_meta(extra, a.stn);

  const dsp::AudioClip input = corpus::load_wav(a.in);
  pipeline::StylizeOptions opt;
  opt.gl_iterations = int(a.gl_iters);
  opt.gl_seed = a.seed;
  const pipeline::StylizeResult res =
      pipeline::stylize(input, stn, meta.mean, meta.std_dev, meta.stft, meta.rate, opt);
  corpus::save_wav(res.audio, a.out);
  if (!a.dump_spec.empty()) {
    img::write_pgm(img::render_spectrogram(res.content_logmag),
                   a.dump_spec + "_content.pgm");
    img::write_pgm(img::render_spectrogram(res.output_logmag),
                   a.dump_spec + "_output.pgm");
  }
  std::cout << "windows=" << res.windows << " samples=" << res.audio.samples.size()
            << " rate=" << res.audio.sample_rate << " gl_iterations=" << a.gl_iters
            << " final_error=" << res.gl_convergence.back() << " out=" << a.out << "\n";
  return 0;
}

int run_spectrogram(const SpectroArgs& a) {
  const dsp::AudioClip clip = corpus::load_wav(a.in);
  dsp::StftConfig cfg;
  cfg.fft_size = int(a.fft);
  cfg.hop = int(a.hop);
  const dsp::LogMagSpectrogram logm = dsp::log_magnitude(dsp::stft(clip, cfg));
  const img::GrayImage im = img::render_spectrogram(logm);
  img::write_image(im, a.out);
  std::cout << "width=" << im.width << " height=" << im.height << " out=" << a.out
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"speech spectrogram style transfer"};
  app.set_config("--config")->envname("SPECSTYLE_CONFIG");
  app.require_subcommand(1);

  PrepareArgs pa;
  CLI::App* prepare = app.add_subcommand("prepare", "build a training corpus from WAVs");
  prepare->add_option("--in", pa.in, "directory scanned recursively for .wav files")
      ->required();
  prepare->add_option("--out", pa.out, "output corpus directory")->required();
  prepare->add_option("--rate", pa.rate, "target sample rate")->capture_default_str();
  prepare->add_option("--fft", pa.fft, "FFT size")->capture_default_str();
  prepare->add_option("--hop", pa.hop, "hop length")->capture_default_str();

  TrainLossArgs la;
  CLI::App* tloss = app.add_subcommand("train-loss-net", "pretrain the reconstruction network");
  tloss->add_option("--data", la.data, "prepared corpus directory")->required();
  tloss->add_option("--out", la.out, "checkpoint path to write")->required();
  tloss->add_option("--steps", la.steps, "optimization steps")->capture_default_str();
  tloss->add_option("--batch", la.batch, "batch size")->capture_default_str();
  tloss->add_option("--lr", la.lr, "learning rate")->capture_default_str();
  tloss->add_option("--wd", la.wd, "weight decay")->capture_default_str();
  tloss->add_option("--seed", la.seed, "RNG seed")->capture_default_str();
  tloss->add_option("--checkpoint-interval", la.ckpt_interval,
                    "also save every N steps (0 = final only)")->capture_default_str();

  TrainStnArgs sa;
  CLI::App* tstn = app.add_subcommand("train-stn", "train the transformation network");
  tstn->add_option("--data", sa.data, "prepared corpus directory")->required();
  tstn->add_option("--loss-net", sa.loss_net, "pretrained loss network checkpoint")
      ->required();
  tstn->add_option("--style", sa.style, "style WAV file")->required();
  tstn->add_option("--out", sa.out, "checkpoint path to write")->required();
  tstn->add_option("--alpha", sa.alpha, "content weight")->capture_default_str();
  tstn->add_option("--beta", sa.beta, "style weight")->capture_default_str();
  tstn->add_option("--b1", sa.b1, "Adam beta1")->capture_default_str();
  tstn->add_option("--b2", sa.b2, "Adam beta2")->capture_default_str();
  tstn->add_option("--lr", sa.lr, "learning rate")->capture_default_str();
  tstn->add_option("--wd", sa.wd, "weight decay")->capture_default_str();
  tstn->add_option("--steps", sa.steps, "optimization steps")->capture_default_str();
  tstn->add_option("--batch", sa.batch, "batch size")->capture_default_str();
  tstn->add_option("--seed", sa.seed, "RNG seed")->capture_default_str();
  tstn->add_option("--checkpoint-interval", sa.ckpt_interval,
                   "also save every N steps (0 = final only)")->capture_default_str();

  StylizeArgs za;
  CLI::App* stylize = app.add_subcommand("stylize", "apply a trained network to a WAV");
  stylize->add_option("--in", za.in, "input WAV")->required();
  stylize->add_option("--stn", za.stn, "transformation network checkpoint")->required();
  stylize->add_option("--out", za.out, "output WAV")->required();
  stylize->add_option("--gl-iters", za.gl_iters, "phase reconstruction iterations")->capture_default_str();
  stylize->add_option("--seed", za.seed, "phase init seed")->capture_default_str();
  stylize->add_option("--dump-spec", za.dump_spec,
                      "prefix for dumping input/output spectrogram images");

  SpectroArgs ga;
  CLI::App* spectro = app.add_subcommand("spectrogram-png", "render a WAV's spectrogram");
  spectro->add_option("--in", ga.in, "input WAV")->required();
  spectro->add_option("--out", ga.out, "output image (.png or .pgm)")->required();
  spectro->add_option("--fft", ga.fft, "FFT size")->capture_default_str();
  spectro->add_option("--hop", ga.hop, "hop length")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (prepare->parsed()) return run_prepare(pa);
    if (tloss->parsed()) return run_train_loss(la);
    if (tstn->parsed()) return run_train_stn(sa);
    if (stylize->parsed()) return run_stylize(za);
    if (spectro->parsed()) return run_spectrogram(ga);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;  // unreachable: require_subcommand enforces one
}
