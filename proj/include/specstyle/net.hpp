// include/specstyle/net.hpp
//
// The spectrogram autoencoder: four strided conv blocks down, four strided
// deconv blocks up. Every block is conv -> ReLU -> BatchNorm except the final
// deconv, which is linear. The same architecture serves both roles in style
// transfer: a pretrained copy acts as the frozen loss network (content = the
// bottleneck code, style = Gram matrices of the first three encoder
// activations) and a second copy is optimized as the transformation network.

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "specstyle/ops.hpp"
#include "specstyle/tensor.hpp"

namespace specstyle::model {

struct Architecture {
  // channels[0] is the input plane count; each of the four encoder stages
  // maps channels[i] -> channels[i+1] and the decoder mirrors them.
  std::vector<int64_t> channels{1, 16, 32, 64, 128};
  int64_t conv_kernel = 3;
  int64_t deconv_kernel = 4;
  int64_t stride = 2;
  int64_t padding = 1;
  int64_t input_h = 512;
  int64_t input_w = 256;
  std::vector<double> style_layer_weights{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;

  static constexpr int64_t depth = 4;  // stages per half; 8 layers total

  int64_t latent_channels() const { return channels.back(); }
  int64_t latent_h() const { return input_h >> depth; }
  int64_t latent_w() const { return input_w >> depth; }

  void validate() const {
    if (channels.size() != size_t(depth) + 1) {
      throw ValueError("architecture needs " + std::to_string(depth + 1) +
                       " channel counts, got " + std::to_string(channels.size()));
    }
    for (int64_t c : channels) {
      if (c < 1) throw ValueError("architecture channel counts must be positive");
    }
    const int64_t factor = int64_t(1) << depth;
    if (input_h < factor || input_w < factor || input_h % factor != 0 ||
        input_w % factor != 0) {
      throw ValueError("input size must be a positive multiple of " +
                       std::to_string(factor) + " in both dimensions, got " +
                       std::to_string(input_h) + "x" + std::to_string(input_w));
    }
    if (style_layer_weights.size() != 3) {
      throw ValueError("style representation uses exactly 3 layer weights");
    }
    if (conv_kernel < 1 || deconv_kernel < 1 || stride < 1 || padding < 0) {
      throw ValueError("invalid layer geometry");
    }
  }
};

enum class LayerKind { conv, deconv };

struct LayerSpec {
  std::string name;
  LayerKind kind;
  int64_t in_ch;
  int64_t out_ch;
  int64_t kernel;
  int64_t stride;
  int64_t padding;
  bool has_bn;  // ReLU + BatchNorm follow the convolution
};

inline std::vector<LayerSpec> layer_specs(const Architecture& arch) {
  arch.validate();
  std::vector<LayerSpec> specs;
  specs.reserve(2 * Architecture::depth);
  for (int64_t i = 0; i < Architecture::depth; ++i) {
    specs.push_back(LayerSpec{"enc" + std::to_string(i + 1), LayerKind::conv,
                              arch.channels[size_t(i)], arch.channels[size_t(i + 1)],
                              arch.conv_kernel, arch.stride, arch.padding, true});
  }
  for (int64_t i = 0; i < Architecture::depth; ++i) {
    const bool last = (i == Architecture::depth - 1);
    specs.push_back(LayerSpec{"dec" + std::to_string(i + 1), LayerKind::deconv,
                              arch.channels[size_t(Architecture::depth - i)],
                              arch.channels[size_t(Architecture::depth - i - 1)],
                              arch.deconv_kernel, arch.stride, arch.padding, !last});
  }
  return specs;
}

template <typename T>
struct LayerParams {
  LayerSpec spec;
  std::shared_ptr<std::vector<T>> kernel;  // conv [out,in,k,k]; deconv [in,out,k,k]
  std::shared_ptr<std::vector<T>> bias;    // [out]
  std::shared_ptr<std::vector<T>> bn_scale;
  std::shared_ptr<std::vector<T>> bn_shift;
  std::shared_ptr<std::vector<T>> bn_mean;  // running statistics (not trainable)
  std::shared_ptr<std::vector<T>> bn_var;

  std::vector<int64_t> kernel_shape() const {
    if (spec.kind == LayerKind::conv) {
      return {spec.out_ch, spec.in_ch, spec.kernel, spec.kernel};
    }
    return {spec.in_ch, spec.out_ch, spec.kernel, spec.kernel};
  }
};

template <typename T>
struct NetworkWeights {
  Architecture arch;
  std::vector<LayerParams<T>> layers;

  // Buffers the optimizer updates, in a fixed traversal order.
  std::vector<std::vector<T>*> trainable_params() {
    std::vector<std::vector<T>*> out;
    for (auto& l : layers) {
      out.push_back(l.kernel.get());
      out.push_back(l.bias.get());
      if (l.spec.has_bn) {
        out.push_back(l.bn_scale.get());
        out.push_back(l.bn_shift.get());
      }
    }
    return out;
  }

  std::vector<const std::vector<T>*> trainable_params() const {
    std::vector<const std::vector<T>*> out;
    for (const auto& l : layers) {
      out.push_back(l.kernel.get());
      out.push_back(l.bias.get());
      if (l.spec.has_bn) {
        out.push_back(l.bn_scale.get());
        out.push_back(l.bn_shift.get());
      }
    }
    return out;
  }
};

namespace detail {

// Uniform draw in [0,1) built directly from the engine's 64-bit output, so
// the stream does not depend on a library's distribution implementation.
inline double uniform01(std::mt19937_64& rng) {
  return double(rng() >> 11) * (1.0 / 9007199254740992.0);  // 2^-53
}

}  // namespace detail

// Fresh network with Kaiming-style uniform kernel init: each kernel entry is
// drawn from U(-b, b) with b = sqrt(6 / fan_in), fan_in = in_ch * k * k.
// Biases and shifts start at zero, scales at one, running stats at (0, 1).
// Values are generated in double precision and cast, so every scalar type
// sees the same numbers; a fixed seed gives a bitwise-identical network.
template <typename T>
NetworkWeights<T> build_network(const Architecture& arch, uint64_t seed) {
  NetworkWeights<T> net;
  net.arch = arch;
  std::mt19937_64 rng(seed);
  for (const LayerSpec& spec : layer_specs(arch)) {
    LayerParams<T> lp;
    lp.spec = spec;
    const int64_t fan_in = spec.in_ch * spec.kernel * spec.kernel;
    const double bound = std::sqrt(6.0 / double(fan_in));
    const int64_t n = numel_of(lp.kernel_shape());
    auto kernel = std::make_shared<std::vector<T>>(size_t(n));
    for (int64_t i = 0; i < n; ++i) {
      (*kernel)[size_t(i)] = T((2.0 * detail::uniform01(rng) - 1.0) * bound);
    }
    lp.kernel = std::move(kernel);
    lp.bias = std::make_shared<std::vector<T>>(size_t(spec.out_ch), T(0));
    if (spec.has_bn) {
      lp.bn_scale = std::make_shared<std::vector<T>>(size_t(spec.out_ch), T(1));
      lp.bn_shift = std::make_shared<std::vector<T>>(size_t(spec.out_ch), T(0));
      lp.bn_mean = std::make_shared<std::vector<T>>(size_t(spec.out_ch), T(0));
      lp.bn_var = std::make_shared<std::vector<T>>(size_t(spec.out_ch), T(1));
    }
    net.layers.push_back(std::move(lp));
  }
  return net;
}

// Independent deep copy (fresh buffers; mutating one network never touches
// the other). This is how the transformation network is seeded from the
// pretrained loss network.
template <typename T>
NetworkWeights<T> clone_network(const NetworkWeights<T>& src) {
  NetworkWeights<T> out;
  out.arch = src.arch;
  out.layers.reserve(src.layers.size());
  for (const auto& l : src.layers) {
    LayerParams<T> lp;
    lp.spec = l.spec;
    auto copy = [](const std::shared_ptr<std::vector<T>>& p) {
      return p ? std::make_shared<std::vector<T>>(*p) : nullptr;
    };
    lp.kernel = copy(l.kernel);
    lp.bias = copy(l.bias);
    lp.bn_scale = copy(l.bn_scale);
    lp.bn_shift = copy(l.bn_shift);
    lp.bn_mean = copy(l.bn_mean);
    lp.bn_var = copy(l.bn_var);
    out.layers.push_back(std::move(lp));
  }
  return out;
}

// FNV-1a over every stored buffer (parameters and running statistics), used
// to assert that a network was not mutated.
template <typename T>
uint64_t weights_digest(const NetworkWeights<T>& net) {
  uint64_t h = 1469598103934665603ull;
  auto eat = [&h](const std::shared_ptr<std::vector<T>>& p) {
    if (!p) return;
    const auto* bytes = reinterpret_cast<const unsigned char*>(p->data());
    const size_t nb = p->size() * sizeof(T);
    for (size_t i = 0; i < nb; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  for (const auto& l : net.layers) {
    eat(l.kernel);
    eat(l.bias);
    eat(l.bn_scale);
    eat(l.bn_shift);
    eat(l.bn_mean);
    eat(l.bn_var);
  }
  return h;
}

namespace detail {

template <typename T>
nn::Tensor<T> param_tensor(nn::Tape<T>& tape, std::vector<int64_t> shape,
                           const std::shared_ptr<std::vector<T>>& buf, bool trainable) {
  return trainable ? tape.leaf(std::move(shape), buf)
                   : tape.constant_shared(std::move(shape), buf);
}

// conv -> ReLU -> BatchNorm (the BN/ReLU pair is skipped on the last layer).
template <typename T>
nn::Tensor<T> run_layer(nn::Tape<T>& tape, const LayerParams<T>& l, const nn::Tensor<T>& x,
                        nn::BnMode mode, bool trainable, const Architecture& arch) {
  auto w = param_tensor(tape, l.kernel_shape(), l.kernel, trainable);
  auto b = param_tensor(tape, {l.spec.out_ch}, l.bias, trainable);
  nn::Tensor<T> h = (l.spec.kind == LayerKind::conv)
                        ? nn::conv2d(x, w, b, l.spec.stride, l.spec.padding)
                        : nn::conv_transpose2d(x, w, b, l.spec.stride, l.spec.padding);
  if (!l.spec.has_bn) return h;
  h = nn::relu(h);
  auto g = param_tensor(tape, {l.spec.out_ch}, l.bn_scale, trainable);
  auto s = param_tensor(tape, {l.spec.out_ch}, l.bn_shift, trainable);
  nn::BnStats<T> stats{l.bn_mean, l.bn_var};
  return nn::batchnorm2d(h, g, s, stats, mode, T(arch.bn_momentum), T(arch.bn_eps));
}

}  // namespace detail

template <typename T>
struct EncodeResult {
  nn::Tensor<T> latent;  // alias of activations.back()
  std::array<nn::Tensor<T>, size_t(Architecture::depth)> activations;
};

// Encoder half. The input must be exactly [B, channels[0], input_h, input_w].
template <typename T>
EncodeResult<T> encode(nn::Tape<T>& tape, const NetworkWeights<T>& net,
                       const nn::Tensor<T>& x, nn::BnMode mode, bool trainable) {
  const Architecture& arch = net.arch;
  const std::vector<int64_t> want{-1, arch.channels[0], arch.input_h, arch.input_w};
  if (x.shape.size() != 4 || x.shape[0] < 1 || x.shape[1] != want[1] ||
      x.shape[2] != want[2] || x.shape[3] != want[3]) {
    throw ShapeError("encode: expected [B, " + std::to_string(want[1]) + ", " +
                     std::to_string(want[2]) + ", " + std::to_string(want[3]) +
                     "], got " + shape_str(x.shape));
  }
  EncodeResult<T> res;
  nn::Tensor<T> h = x;
  for (int64_t i = 0; i < Architecture::depth; ++i) {
    h = detail::run_layer(tape, net.layers[size_t(i)], h, mode, trainable, arch);
    res.activations[size_t(i)] = h;
  }
  res.latent = h;
  return res;
}

// Decoder half; expects the bottleneck shape produced by encode.
template <typename T>
nn::Tensor<T> decode(nn::Tape<T>& tape, const NetworkWeights<T>& net,
                     const nn::Tensor<T>& z, nn::BnMode mode, bool trainable) {
  const Architecture& arch = net.arch;
  if (z.shape.size() != 4 || z.shape[0] < 1 || z.shape[1] != arch.latent_channels() ||
      z.shape[2] != arch.latent_h() || z.shape[3] != arch.latent_w()) {
    throw ShapeError("decode: expected [B, " + std::to_string(arch.latent_channels()) +
                     ", " + std::to_string(arch.latent_h()) + ", " +
                     std::to_string(arch.latent_w()) + "], got " + shape_str(z.shape));
  }
  nn::Tensor<T> h = z;
  for (int64_t i = Architecture::depth; i < 2 * Architecture::depth; ++i) {
    h = detail::run_layer(tape, net.layers[size_t(i)], h, mode, trainable, arch);
  }
  return h;
}

template <typename T>
nn::Tensor<T> autoencode(nn::Tape<T>& tape, const NetworkWeights<T>& net,
                         const nn::Tensor<T>& x, nn::BnMode mode, bool trainable) {
  return decode(tape, net, encode(tape, net, x, mode, trainable).latent, mode, trainable);
}

// ---- frozen-network representations ---------------------------------------

// Content representation: the bottleneck code under eval-mode statistics.
template <typename T>
nn::Array<T> content(const NetworkWeights<T>& net, const nn::Array<T>& spec_batch) {
  nn::Tape<T> tape;
  auto x = tape.constant(spec_batch);
  auto enc = encode(tape, net, x, nn::BnMode::eval, /*trainable=*/false);
  return enc.latent.to_array();
}

// Style representation: normalized Gram matrices of the first three encoder
// activations plus their mixing weights (which sum to one).
template <typename T>
struct StyleRep {
  std::vector<nn::Array<T>> grams;  // 3 entries, each [B, C_l, C_l]
  std::vector<T> layer_weights;
};

template <typename T>
StyleRep<T> style(const NetworkWeights<T>& net, const nn::Array<T>& spec_batch) {
  nn::Tape<T> tape;
  auto x = tape.constant(spec_batch);
  auto enc = encode(tape, net, x, nn::BnMode::eval, /*trainable=*/false);
  StyleRep<T> rep;
  for (size_t l = 0; l < 3; ++l) {
    rep.grams.push_back(nn::gram(enc.activations[l]).to_array());
    rep.layer_weights.push_back(T(net.arch.style_layer_weights[l]));
  }
  return rep;
}

}  // namespace specstyle::model
