#include "specstyle/train.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "specstyle/adam.hpp"

namespace specstyle::train {

void LossHistory::write_csv(std::ostream& os) const {
  os << "step,total,content,style\n";
  os << std::setprecision(17);
  for (const auto& r : records) {
    os << r.step << ',' << r.total << ',' << r.content << ',' << r.style << '\n';
  }
}

void LossHistory::save_csv(const std::string& path) const {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + path + " for writing");
  write_csv(f);
  f.flush();
  if (!f) throw IoError("failed writing " + path);
}

namespace {

std::string diverge_msg(int64_t step, const std::vector<std::string>& batch,
                        const std::string& msg) {
  std::string s = "training diverged at step " + std::to_string(step) + ": " + msg;
  s += " (batch:";
  for (const auto& b : batch) s += " " + b;
  s += ")";
  return s;
}

}  // namespace

TrainingError::TrainingError(int64_t step_, std::vector<std::string> batch_,
                             const std::string& msg)
    : std::runtime_error(diverge_msg(step_, batch_, msg)),
      step(step_),
      batch(std::move(batch_)) {}

namespace {

opt::AdamHyper<float> hyper_from(const TrainConfig& cfg) {
  opt::AdamHyper<float> h;
  h.learning_rate = float(cfg.learning_rate);
  h.beta1 = float(cfg.beta1);
  h.beta2 = float(cfg.beta2);
  h.eps = float(cfg.adam_eps);
  h.weight_decay = float(cfg.weight_decay);
  return h;
}

void maybe_checkpoint(const model::NetworkWeights<float>& net, const TrainConfig& cfg,
                      int64_t step, bool final) {
  if (cfg.checkpoint_path.empty()) return;
  if (final) {
    ckpt::save_network(net, cfg.checkpoint_path, cfg.checkpoint_meta);
    return;
  }
  if (cfg.checkpoint_interval > 0 && step % cfg.checkpoint_interval == 0) {
    ckpt::save_network(net, cfg.checkpoint_path + ".step" + std::to_string(step),
                       cfg.checkpoint_meta);
  }
}

std::vector<const std::vector<float>*> collect_grads(
    nn::Tape<float>& tape, const std::vector<std::vector<float>*>& params) {
  std::vector<const std::vector<float>*> grads;
  grads.reserve(params.size());
  for (auto* p : params) grads.push_back(&tape.grad_for(p));
  return grads;
}

}  // namespace

TrainResult train_autoencoder(corpus::BatchStream& data, const model::Architecture& arch,
                              const TrainConfig& cfg, std::ostream* log) {
  arch.validate();
  if (cfg.steps < 1) throw ValueError("train_autoencoder: steps must be positive");
  TrainResult res;
  res.net = model::build_network<float>(arch, cfg.seed);
  auto params = res.net.trainable_params();
  auto state = opt::AdamState<float>::zeros_like(params);
  const auto hyper = hyper_from(cfg);

  for (int64_t step = 1; step <= cfg.steps; ++step) {
    auto batch = data.next();
    nn::Tape<float> tape;
    auto x = tape.constant({batch.b, 1, batch.rows, batch.cols}, batch.values);
    auto y = model::autoencode(tape, res.net, x, nn::BnMode::train, /*trainable=*/true);
    auto loss = nn::mse(y, x);
    const double total = double(loss.values()[0]);
    if (!std::isfinite(total)) {
      throw TrainingError(step, batch.names, "reconstruction loss is not finite");
    }
    tape.backward(loss);
    opt::adam_step(params, collect_grads(tape, params), state, hyper);
    res.history.records.push_back({step, total, 0.0, 0.0});
    maybe_checkpoint(res.net, cfg, step, /*final=*/false);
    if (log && (step == 1 || step % 25 == 0 || step == cfg.steps)) {
      *log << "step " << step << "/" << cfg.steps << " loss " << total << "\n";
    }
  }
  maybe_checkpoint(res.net, cfg, cfg.steps, /*final=*/true);
  return res;
}

TrainResult train_stn(corpus::BatchStream& data,
                      const model::NetworkWeights<float>& loss_net,
                      const nn::Array<float>& style_window, const TrainConfig& cfg,
                      std::ostream* log) {
  loss_net.arch.validate();
  if (cfg.steps < 1) throw ValueError("train_stn: steps must be positive");
  const uint64_t frozen_digest = model::weights_digest(loss_net);
  const model::StyleRep<float> style_target = model::style(loss_net, style_window);

  TrainResult res;
  res.net = model::clone_network(loss_net);
  auto params = res.net.trainable_params();
  auto state = opt::AdamState<float>::zeros_like(params);
  const auto hyper = hyper_from(cfg);

  for (int64_t step = 1; step <= cfg.steps; ++step) {
    auto batch = data.next();
    nn::Tape<float> tape;
    auto x = tape.constant({batch.b, 1, batch.rows, batch.cols}, batch.values);
    auto y = model::autoencode(tape, res.net, x, nn::BnMode::train, /*trainable=*/true);
    auto loss = combined_loss(tape, y, x, style_target, loss_net, float(cfg.alpha),
                              float(cfg.beta));
    const double total = double(loss.total.values()[0]);
    if (!std::isfinite(total)) {
      throw TrainingError(step, batch.names, "combined loss is not finite");
    }
    tape.backward(loss.total);
    opt::adam_step(params, collect_grads(tape, params), state, hyper);
    res.history.records.push_back({step, total, loss.content_term, loss.style_term});
    maybe_checkpoint(res.net, cfg, step, /*final=*/false);
    if (log && (step == 1 || step % 25 == 0 || step == cfg.steps)) {
      *log << "step " << step << "/" << cfg.steps << " total " << total << " content "
           << loss.content_term << " style " << loss.style_term << "\n";
    }
  }
  if (model::weights_digest(loss_net) != frozen_digest) {
    throw std::logic_error("train_stn: the frozen loss network was mutated");
  }
  maybe_checkpoint(res.net, cfg, cfg.steps, /*final=*/true);
  return res;
}

}  // namespace specstyle::train
