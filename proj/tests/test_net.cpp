// Autoencoder structure tests: layer plan, initialization, shape flow,
// cloning, digests, and the frozen content/style representations.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "specstyle/net.hpp"
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

std::vector<float> randvf(size_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = float(double(rng() >> 11) * (1.0 / 4503599627370496.0) - 1.0);
  return v;
}

}  // namespace

TEST_CASE("layer plan: eight layers, mirrored channels, BN everywhere but last") {
  model::Architecture a;  // default: {1,16,32,64,128}, 512x256
  const auto specs = model::layer_specs(a);
  REQUIRE(specs.size() == 8);
  const char* names[] = {"enc1", "enc2", "enc3", "enc4", "dec1", "dec2", "dec3", "dec4"};
  const int64_t in_ch[] = {1, 16, 32, 64, 128, 64, 32, 16};
  const int64_t out_ch[] = {16, 32, 64, 128, 64, 32, 16, 1};
  for (size_t i = 0; i < 8; ++i) {
    CHECK(specs[i].name == names[i]);
    CHECK(specs[i].in_ch == in_ch[i]);
    CHECK(specs[i].out_ch == out_ch[i]);
    CHECK(specs[i].kind == (i < 4 ? model::LayerKind::conv : model::LayerKind::deconv));
    CHECK(specs[i].kernel == (i < 4 ? 3 : 4));
    CHECK(specs[i].stride == 2);
    CHECK(specs[i].padding == 1);
    CHECK(specs[i].has_bn == (i != 7));
  }
  CHECK(a.latent_channels() == 128);
  CHECK(a.latent_h() == 32);
  CHECK(a.latent_w() == 16);
}

TEST_CASE("architecture validation") {
  model::Architecture a = tiny_arch();
  CHECK_NOTHROW(a.validate());
  a.input_h = 24;  // not a multiple of 16
  CHECK_THROWS_AS(a.validate(), ValueError);
  a = tiny_arch();
  a.channels = {1, 2, 2};
  CHECK_THROWS_AS(a.validate(), ValueError);
  a = tiny_arch();
  a.style_layer_weights = {0.5, 0.5};
  CHECK_THROWS_AS(a.validate(), ValueError);
}

TEST_CASE("initialization: bounds, determinism, seed sensitivity") {
  const auto a = tiny_arch();
  auto n1 = model::build_network<float>(a, 7);
  auto n2 = model::build_network<float>(a, 7);
  auto n3 = model::build_network<float>(a, 8);
  CHECK(model::weights_digest(n1) == model::weights_digest(n2));
  CHECK(model::weights_digest(n1) != model::weights_digest(n3));

  for (const auto& l : n1.layers) {
    const double fan_in = double(l.spec.in_ch * l.spec.kernel * l.spec.kernel);
    const double bound = std::sqrt(6.0 / fan_in);
    bool any_nonzero = false;
    for (float w : *l.kernel) {
      CHECK(std::abs(double(w)) <= bound + 1e-6);
      if (w != 0.0f) any_nonzero = true;
    }
    CHECK(any_nonzero);
    for (float b : *l.bias) CHECK(b == 0.0f);
    if (l.spec.has_bn) {
      for (float s : *l.bn_scale) CHECK(s == 1.0f);
      for (float s : *l.bn_shift) CHECK(s == 0.0f);
      for (float s : *l.bn_mean) CHECK(s == 0.0f);
      for (float s : *l.bn_var) CHECK(s == 1.0f);
    } else {
      CHECK(l.bn_scale == nullptr);
    }
  }

  // Trainable parameter census: (kernel, bias, scale, shift) x 7 BN layers
  // plus (kernel, bias) for the last.
  CHECK(n1.trainable_params().size() == 7 * 4 + 2);
}

TEST_CASE("encode/decode shape flow on the reduced architecture") {
  const auto a = tiny_arch();
  auto net = model::build_network<float>(a, 1);
  nn::Tape<float> tape;
  auto x = tape.constant({3, 1, 16, 16}, randvf(3 * 16 * 16, 21));
  auto enc = model::encode(tape, net, x, nn::BnMode::eval, false);
  const int64_t hw[] = {8, 4, 2, 1};
  for (size_t i = 0; i < 4; ++i) {
    CHECK(enc.activations[i].shape == (std::vector<int64_t>{3, 2, hw[i], hw[i]}));
  }
  CHECK(enc.latent.shape == (std::vector<int64_t>{3, 2, 1, 1}));
  auto y = model::decode(tape, net, enc.latent, nn::BnMode::eval, false);
  CHECK(y.shape == (std::vector<int64_t>{3, 1, 16, 16}));

  auto bad = tape.constant({1, 1, 16, 8}, randvf(16 * 8, 22));
  CHECK_THROWS_AS(model::encode(tape, net, bad, nn::BnMode::eval, false), ShapeError);
  auto badz = tape.constant({1, 2, 2, 1}, randvf(4, 23));
  CHECK_THROWS_AS(model::decode(tape, net, badz, nn::BnMode::eval, false), ShapeError);
}

TEST_CASE("full-size forward pass has the advertised geometry") {
  model::Architecture a;  // 512x256
  auto net = model::build_network<float>(a, 2);
  nn::Tape<float> tape;
  auto x = tape.constant({1, 1, 512, 256}, randvf(512 * 256, 31));
  auto enc = model::encode(tape, net, x, nn::BnMode::eval, false);
  CHECK(enc.activations[0].shape == (std::vector<int64_t>{1, 16, 256, 128}));
  CHECK(enc.activations[1].shape == (std::vector<int64_t>{1, 32, 128, 64}));
  CHECK(enc.activations[2].shape == (std::vector<int64_t>{1, 64, 64, 32}));
  CHECK(enc.latent.shape == (std::vector<int64_t>{1, 128, 32, 16}));
  auto y = model::decode(tape, net, enc.latent, nn::BnMode::eval, false);
  CHECK(y.shape == (std::vector<int64_t>{1, 1, 512, 256}));
}

TEST_CASE("eval mode is pure; train mode updates running statistics") {
  const auto a = tiny_arch();
  auto net = model::build_network<float>(a, 3);
  const auto before = model::weights_digest(net);
  const auto xv = randvf(2 * 16 * 16, 41);

  auto run = [&](nn::BnMode mode) {
    nn::Tape<float> tape;
    auto x = tape.constant({2, 1, 16, 16}, xv);
    return model::autoencode(tape, net, x, mode, false).values();
  };
  const auto y1 = run(nn::BnMode::eval);
  const auto y2 = run(nn::BnMode::eval);
  CHECK(y1 == y2);  // bitwise
  CHECK(model::weights_digest(net) == before);

  (void)run(nn::BnMode::train);
  CHECK(model::weights_digest(net) != before);  // running stats moved
}

TEST_CASE("clone produces independent buffers") {
  const auto a = tiny_arch();
  auto net = model::build_network<float>(a, 5);
  auto dup = model::clone_network(net);
  CHECK(model::weights_digest(net) == model::weights_digest(dup));
  CHECK(net.layers[0].kernel.get() != dup.layers[0].kernel.get());
  const auto before = model::weights_digest(net);
  (*dup.layers[0].kernel)[0] += 1.0f;
  (*dup.layers[2].bn_mean)[1] += 0.5f;
  CHECK(model::weights_digest(net) == before);
  CHECK(model::weights_digest(dup) != before);
}

TEST_CASE("digest reacts to every buffer, including running statistics") {
  const auto a = tiny_arch();
  auto net = model::build_network<float>(a, 6);
  const auto base = model::weights_digest(net);
  (*net.layers[1].bn_var)[0] = 2.0f;
  CHECK(model::weights_digest(net) != base);
  (*net.layers[1].bn_var)[0] = 1.0f;
  CHECK(model::weights_digest(net) == base);
  (*net.layers[7].bias)[0] = 1e-3f;
  CHECK(model::weights_digest(net) != base);
}

TEST_CASE("content and style representations") {
  const auto a = tiny_arch();
  auto net = model::build_network<float>(a, 9);
  nn::Array<float> batch({2, 1, 16, 16}, randvf(2 * 16 * 16, 51));

  const auto c = model::content(net, batch);
  CHECK(c.shape == (std::vector<int64_t>{2, 2, 1, 1}));
  // Must agree with an explicit eval-mode encode.
  nn::Tape<float> tape;
  auto enc = model::encode(tape, net, tape.constant(batch), nn::BnMode::eval, false);
  CHECK(c.data == enc.latent.values());

  const auto rep = model::style(net, batch);
  REQUIRE(rep.grams.size() == 3);
  CHECK(rep.grams[0].shape == (std::vector<int64_t>{2, 2, 2}));
  CHECK(rep.grams[1].shape == (std::vector<int64_t>{2, 2, 2}));
  CHECK(rep.grams[2].shape == (std::vector<int64_t>{2, 2, 2}));
  float wsum = 0.0f;
  for (float w : rep.layer_weights) wsum += w;
  CHECK(wsum == doctest::Approx(1.0f));
  // Gram of the first activation, recomputed directly.
  auto g0 = nn::gram(enc.activations[0]);
  CHECK(rep.grams[0].data == g0.values());
}
