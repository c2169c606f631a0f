// include/specstyle/train.hpp
//
// Training drivers. Two phases share the machinery:
//   1. autoencoder pretraining — plain reconstruction MSE; the result serves
//      as the frozen loss network for phase 2;
//   2. transformation-network training — initialized from the loss network,
//      optimized against the combined objective
//        alpha * MSE(content(Y), content(C)) +
//        beta  * sum_l w_l * MSE(gram_l(Y), gram_l(S))
//      where content/gram come from the frozen loss network.
//
// Training is single-threaded and deterministic: a fixed seed fixes the
// initialization and the shuffling, so loss histories reproduce bitwise.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "specstyle/checkpoint.hpp"
#include "specstyle/corpus.hpp"
#include "specstyle/net.hpp"
#include "specstyle/ops.hpp"

namespace specstyle::train {

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double alpha = 100.0;  // content weight (transformation training only)
  double beta = 1e4;     // style weight
  int64_t batch_size = 24;
  int64_t steps = 2000;
  uint64_t seed = 0;
  // When checkpoint_path is set, the final weights are written there; with
  // checkpoint_interval > 0, intermediate copies go to "<path>.step<N>".
  std::string checkpoint_path;
  int64_t checkpoint_interval = 0;
  std::vector<ckpt::NamedTensor> checkpoint_meta;  // meta.* tensors to embed
};

struct StepRecord {
  int64_t step = 0;   // 1-based
  double total = 0;   // the optimized objective
  double content = 0; // weighted content term (0 for plain reconstruction)
  double style = 0;   // weighted style term  (0 for plain reconstruction)
};

struct LossHistory {
  std::vector<StepRecord> records;

  void write_csv(std::ostream& os) const;
  void save_csv(const std::string& path) const;
};

// Raised when a loss turns NaN/Inf; carries enough context to find the batch.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(int64_t step_, std::vector<std::string> batch_, const std::string& msg);

  int64_t step;
  std::vector<std::string> batch;
};

// ---- combined objective ----------------------------------------------------

template <typename T>
struct CombinedLoss {
  nn::Tensor<T> total;
  double content_term = 0;  // alpha * content MSE, as evaluated
  double style_term = 0;    // beta * weighted style MSE, as evaluated
};

// y: network output on the tape; c: content target batch (a constant on the
// same tape); style_target: precomputed Gram matrices of the style input
// under the frozen network. The frozen network's parameters enter as
// constants, so no gradient work is spent on them.
template <typename T>
CombinedLoss<T> combined_loss(nn::Tape<T>& tape, const nn::Tensor<T>& y,
                              const nn::Tensor<T>& c,
                              const model::StyleRep<T>& style_target,
                              const model::NetworkWeights<T>& loss_net, T alpha, T beta) {
  if (style_target.grams.size() != 3 || style_target.layer_weights.size() != 3) {
    throw ShapeError("combined_loss: style target must cover 3 layers");
  }
  auto enc_c = model::encode(tape, loss_net, c, nn::BnMode::eval, /*trainable=*/false);
  auto enc_y = model::encode(tape, loss_net, y, nn::BnMode::eval, /*trainable=*/false);
  auto content_mse = nn::mse(enc_y.latent, enc_c.latent);

  const int64_t B = y.shape[0];
  nn::Tensor<T> style_sum;
  for (size_t l = 0; l < 3; ++l) {
    auto g_y = nn::gram(enc_y.activations[l]);
    const nn::Array<T>& tg = style_target.grams[l];
    if (tg.shape.size() != 3 || tg.shape[1] != g_y.shape[1] || tg.shape[2] != g_y.shape[2]) {
      throw ShapeError("combined_loss: style target layer " + std::to_string(l) +
                       " has shape " + shape_str(tg.shape) + ", expected [*, " +
                       std::to_string(g_y.shape[1]) + ", " + std::to_string(g_y.shape[2]) +
                       "]");
    }
    nn::Tensor<T> g_t;
    if (tg.shape[0] == B) {
      g_t = tape.constant(tg);
    } else if (tg.shape[0] == 1) {
      // One style input serves the whole batch: repeat its Gram matrix.
      std::vector<T> tiled;
      tiled.reserve(size_t(B) * tg.data.size());
      for (int64_t b = 0; b < B; ++b) {
        tiled.insert(tiled.end(), tg.data.begin(), tg.data.end());
      }
      g_t = tape.constant({B, tg.shape[1], tg.shape[2]}, std::move(tiled));
    } else {
      throw ShapeError("combined_loss: style target batch dim must be 1 or match the input");
    }
    auto weighted = nn::scale(nn::mse(g_y, g_t), style_target.layer_weights[l]);
    style_sum = (l == 0) ? weighted : nn::add(style_sum, weighted);
  }

  auto content_term = nn::scale(content_mse, alpha);
  auto style_term = nn::scale(style_sum, beta);
  CombinedLoss<T> out;
  out.total = nn::add(content_term, style_term);
  out.content_term = double(content_term.values()[0]);
  out.style_term = double(style_term.values()[0]);
  return out;
}

// ---- drivers (single precision, matching the checkpoint payload) -----------

struct TrainResult {
  model::NetworkWeights<float> net;
  LossHistory history;
};

// Phase 1: reconstruction pretraining from random initialization.
TrainResult train_autoencoder(corpus::BatchStream& data, const model::Architecture& arch,
                              const TrainConfig& cfg, std::ostream* log = nullptr);

// Phase 2: style-transfer training. style_window is one prepared+normalized
// spectrogram window shaped [1, 1, input_h, input_w]. The loss network is
// used read-only; the returned network starts as its copy.
TrainResult train_stn(corpus::BatchStream& data,
                      const model::NetworkWeights<float>& loss_net,
                      const nn::Array<float>& style_window, const TrainConfig& cfg,
                      std::ostream* log = nullptr);

}  // namespace specstyle::train
