// Training-driver tests: the combined objective's composition and gradients,
// descent + determinism of both phases, checkpoint emission, CSV output, and
// divergence reporting.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "specstyle/checkpoint.hpp"
#include "specstyle/train.hpp"
#include "test_util.hpp"

using namespace specstyle;

namespace {

model::Architecture tiny_arch() {
  model::Architecture a;
  a.channels = {1, 2, 2, 2, 2};
  a.input_h = 16;
  a.input_w = 16;
  return a;
}

template <typename T>
std::vector<T> randv(size_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<T> v(n);
  for (auto& x : v) x = T(double(rng() >> 11) * (1.0 / 4503599627370496.0) - 1.0);
  return v;
}

// A small synthetic corpus of smooth 16x16 windows (already ~unit scale).
corpus::BatchStream make_stream(int64_t num_windows, int64_t batch, uint64_t seed) {
  corpus::WindowSet set;
  set.rows = 16;
  set.cols = 16;
  for (int64_t w = 0; w < num_windows; ++w) {
    std::vector<float> win(256);
    for (int64_t r = 0; r < 16; ++r) {
      for (int64_t c = 0; c < 16; ++c) {
        win[size_t(r * 16 + c)] =
            float(std::sin(0.3 * double(r) + 0.1 * double(w)) *
                  std::cos(0.4 * double(c) - 0.2 * double(w)));
      }
    }
    set.windows.push_back(std::move(win));
    set.names.push_back("w_" + std::to_string(w));
  }
  return corpus::BatchStream(std::move(set), 0.0, 1.0, batch, seed);
}

}  // namespace

TEST_CASE("combined loss: total is the sum of its reported terms") {
  const auto arch = tiny_arch();
  auto net = model::build_network<double>(arch, 3);
  nn::Array<double> style_batch({1, 1, 16, 16}, randv<double>(256, 10));
  const auto target = model::style(net, style_batch);

  nn::Tape<double> tape;
  auto y = tape.constant({2, 1, 16, 16}, randv<double>(512, 11));
  auto c = tape.constant({2, 1, 16, 16}, randv<double>(512, 12));
  const auto loss = train::combined_loss<double>(tape, y, c, target, net, 100.0, 1e4);
  CHECK(std::abs(loss.total.values()[0] - (loss.content_term + loss.style_term)) <=
        1e-12 * std::abs(loss.total.values()[0]));
  CHECK(loss.content_term > 0.0);
  CHECK(loss.style_term > 0.0);

  // Zeroing a weight removes exactly that term.
  nn::Tape<double> t2;
  auto y2 = t2.constant({2, 1, 16, 16}, randv<double>(512, 11));
  auto c2 = t2.constant({2, 1, 16, 16}, randv<double>(512, 12));
  const auto only_style = train::combined_loss<double>(t2, y2, c2, target, net, 0.0, 1e4);
  CHECK(only_style.content_term == 0.0);
  CHECK(only_style.style_term == doctest::Approx(loss.style_term).epsilon(1e-12));

  // Scaling alpha scales the content term linearly.
  nn::Tape<double> t3;
  auto y3 = t3.constant({2, 1, 16, 16}, randv<double>(512, 11));
  auto c3 = t3.constant({2, 1, 16, 16}, randv<double>(512, 12));
  const auto twice = train::combined_loss<double>(t3, y3, c3, target, net, 200.0, 1e4);
  CHECK(twice.content_term == doctest::Approx(2.0 * loss.content_term).epsilon(1e-12));
}

TEST_CASE("combined loss: gradient with respect to the candidate checks out") {
  const auto arch = tiny_arch();
  auto net = model::build_network<double>(arch, 4);
  nn::Array<double> style_batch({1, 1, 16, 16}, randv<double>(256, 20));
  const auto target = model::style(net, style_batch);
  const auto cv = randv<double>(256, 21);
  auto yv = randv<double>(256, 22);

  auto eval = [&](const std::vector<double>& vals) {
    nn::Tape<double> tape;
    auto y = tape.variable({1, 1, 16, 16}, vals);
    auto c = tape.constant({1, 1, 16, 16}, cv);
    return train::combined_loss<double>(tape, y, c, target, net, 100.0, 1e4)
        .total.values()[0];
  };

  nn::Tape<double> tape;
  auto y = tape.variable({1, 1, 16, 16}, yv);
  auto c = tape.constant({1, 1, 16, 16}, cv);
  auto loss = train::combined_loss<double>(tape, y, c, target, net, 100.0, 1e4);
  tape.backward(loss.total);
  const auto grad = tape.grad_for(y.data);
  // The frozen network never became differentiable on this tape.
  CHECK_THROWS_AS(tape.grad_for(net.layers[0].kernel), ValueError);

  const double h = 1e-5;
  double worst = 0.0;
  for (size_t j = 0; j < yv.size(); j += 7) {  // subsample coordinates
    auto vp = yv, vm = yv;
    vp[j] += h;
    vm[j] -= h;
    const double fd = (eval(vp) - eval(vm)) / (2.0 * h);
    if (std::abs(fd) < 1e-8 && std::abs(grad[j]) < 1e-8) continue;
    worst = std::max(worst, testutil::rel_err(grad[j], fd));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("combined loss: style-target shape handling") {
  const auto arch = tiny_arch();
  auto net = model::build_network<float>(arch, 5);
  nn::Array<float> style1({1, 1, 16, 16}, randv<float>(256, 30));
  auto target = model::style(net, style1);

  nn::Tape<float> tape;
  auto y = tape.constant({3, 1, 16, 16}, randv<float>(768, 31));
  auto c = tape.constant({3, 1, 16, 16}, randv<float>(768, 32));
  // A [1,C,C] target tiles across the batch.
  CHECK_NOTHROW(train::combined_loss<float>(tape, y, c, target, net, 1.0f, 1.0f));

  // A mismatched batch dimension is rejected.
  nn::Array<float> style2({2, 1, 16, 16}, randv<float>(512, 33));
  auto target2 = model::style(net, style2);
  CHECK_THROWS_AS(train::combined_loss<float>(tape, y, c, target2, net, 1.0f, 1.0f),
                  ShapeError);

  // A truncated target (fewer than 3 layers) is rejected.
  auto broken = target;
  broken.grams.pop_back();
  broken.layer_weights.pop_back();
  CHECK_THROWS_AS(train::combined_loss<float>(tape, y, c, broken, net, 1.0f, 1.0f),
                  ShapeError);
}

TEST_CASE("autoencoder training descends and reproduces bitwise") {
  const auto arch = tiny_arch();
  train::TrainConfig cfg;
  cfg.steps = 80;
  cfg.batch_size = 4;
  cfg.learning_rate = 2e-3;
  cfg.weight_decay = 0.0;
  cfg.seed = 7;

  auto run = [&] {
    auto data = make_stream(8, 4, 99);
    return train::train_autoencoder(data, arch, cfg, nullptr);
  };
  const auto r1 = run();
  REQUIRE(r1.history.records.size() == 80);
  for (const auto& rec : r1.history.records) {
    CHECK(std::isfinite(rec.total));
    CHECK(rec.content == 0.0);
    CHECK(rec.style == 0.0);
  }
  double head = 0.0, tail = 0.0;
  for (int i = 0; i < 10; ++i) {
    head += r1.history.records[size_t(i)].total;
    tail += r1.history.records[size_t(70 + i)].total;
  }
  CHECK(tail < head);

  const auto r2 = run();
  CHECK(model::weights_digest(r1.net) == model::weights_digest(r2.net));
  for (size_t i = 0; i < r1.history.records.size(); ++i) {
    CHECK(r1.history.records[i].total == r2.history.records[i].total);
  }
}

TEST_CASE("interval and final checkpoints are written") {
  testutil::ScratchDir dir("train_ckpt");
  const auto arch = tiny_arch();
  train::TrainConfig cfg;
  cfg.steps = 4;
  cfg.batch_size = 2;
  cfg.seed = 1;
  cfg.checkpoint_path = dir.path() + "/ae.ckpt";
  cfg.checkpoint_interval = 2;
  cfg.checkpoint_meta = {{"meta.norm", {2}, {0.0f, 1.0f}}};

  auto data = make_stream(4, 2, 5);
  const auto res = train::train_autoencoder(data, arch, cfg, nullptr);
  CHECK(std::filesystem::exists(cfg.checkpoint_path));
  CHECK(std::filesystem::exists(cfg.checkpoint_path + ".step2"));
  CHECK(std::filesystem::exists(cfg.checkpoint_path + ".step4"));
  std::vector<ckpt::NamedTensor> meta;
  auto loaded = ckpt::load_network<float>(cfg.checkpoint_path, arch, &meta);
  CHECK(model::weights_digest(loaded) == model::weights_digest(res.net));
  REQUIRE(meta.size() == 1);
  CHECK(meta[0].name == "meta.norm");
}

TEST_CASE("transformation training leaves the loss network untouched") {
  const auto arch = tiny_arch();
  // Pretrain briefly so the loss network is not at initialization.
  train::TrainConfig pre;
  pre.steps = 10;
  pre.batch_size = 4;
  pre.seed = 2;
  auto pre_data = make_stream(8, 4, 77);
  auto loss_net = train::train_autoencoder(pre_data, arch, pre, nullptr).net;
  const auto frozen = model::weights_digest(loss_net);

  nn::Array<float> style({1, 1, 16, 16}, randv<float>(256, 40));
  train::TrainConfig cfg;
  cfg.steps = 15;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e-3;
  cfg.beta1 = 0.999;
  cfg.beta2 = 0.99;
  cfg.alpha = 100.0;
  cfg.beta = 1e4;
  cfg.seed = 3;
  auto data = make_stream(8, 4, 88);
  const auto res = train::train_stn(data, loss_net, style, cfg, nullptr);

  CHECK(model::weights_digest(loss_net) == frozen);
  CHECK(model::weights_digest(res.net) != frozen);  // it actually trained
  REQUIRE(res.history.records.size() == 15);
  for (const auto& rec : res.history.records) {
    CHECK(std::isfinite(rec.total));
    CHECK(rec.content >= 0.0);
    CHECK(rec.style >= 0.0);
    CHECK(std::abs(rec.total - (rec.content + rec.style)) <=
          1e-5 * std::max(1.0, std::abs(rec.total)));
  }

  // Same seed, same data => bitwise identical run.
  auto data2 = make_stream(8, 4, 88);
  const auto res2 = train::train_stn(data2, loss_net, style, cfg, nullptr);
  CHECK(model::weights_digest(res.net) == model::weights_digest(res2.net));
  for (size_t i = 0; i < res.history.records.size(); ++i) {
    CHECK(res.history.records[i].total == res2.history.records[i].total);
  }
}

TEST_CASE("CSV output format") {
  train::LossHistory h;
  h.records.push_back({1, 1.5, 0.5, 1.0});
  h.records.push_back({2, 0.125, 0.0625, 0.0625});
  std::ostringstream os;
  h.write_csv(os);
  std::istringstream is(os.str());
  std::string line;
  REQUIRE(std::getline(is, line));
  CHECK(line == "step,total,content,style");
  REQUIRE(std::getline(is, line));
  CHECK(line == "1,1.5,0.5,1");
  REQUIRE(std::getline(is, line));
  CHECK(line == "2,0.125,0.0625,0.0625");
  CHECK_FALSE(std::getline(is, line));

  testutil::ScratchDir dir("csv");
  h.save_csv(dir.path() + "/loss.csv");
  std::ifstream f(dir.path() + "/loss.csv");
  std::string contents((std::istreambuf_iterator<char>(f)),
                       std::istreambuf_iterator<char>());
  CHECK(contents == os.str());
}

TEST_CASE("divergence raises a structured error") {
  const train::TrainingError direct(5, {"a_0", "b_1"}, "loss is not finite");
  CHECK(direct.step == 5);
  CHECK(direct.batch.size() == 2);
  CHECK(std::string(direct.what()).find("diverged at step 5") != std::string::npos);
  CHECK(std::string(direct.what()).find("a_0") != std::string::npos);

  // An absurd learning rate blows the parameters up within a couple of steps.
  const auto arch = tiny_arch();
  train::TrainConfig cfg;
  cfg.steps = 10;
  cfg.batch_size = 4;
  cfg.learning_rate = 1e20;
  cfg.seed = 4;
  auto data = make_stream(8, 4, 66);
  CHECK_THROWS_AS(train::train_autoencoder(data, arch, cfg, nullptr),
                  train::TrainingError);

  train::TrainConfig bad;
  bad.steps = 0;
  auto data2 = make_stream(8, 4, 66);
  CHECK_THROWS_AS(train::train_autoencoder(data2, arch, bad, nullptr), ValueError);
}
