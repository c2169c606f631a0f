// include/specstyle/checkpoint.hpp
//
// Binary weight container. Layout (all integers little-endian):
//
//   "ASTW"                         4-byte magic
//   u32 version                    currently 1
//   u32 tensor_count
//   tensor_count x {
//     u32 name_len, name bytes     UTF-8, no terminator
//     u8  rank
//     u64 dims[rank]
//     f32 payload[prod(dims)]      row-major
//   }
//   u32 crc32                      over every payload byte, in file order
//
// Network weights are stored one tensor per parameter buffer, named
// enc1..enc4 / dec1..dec4 with suffixes .kernel/.bias/.bn_scale/.bn_shift/
// .bn_mean/.bn_var. Callers may append extra "meta.*" tensors (for example
// normalization constants); anything else unexpected is rejected on load.

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "specstyle/common.hpp"
#include "specstyle/net.hpp"

namespace specstyle::ckpt {

struct NamedTensor {
  std::string name;
  std::vector<int64_t> dims;
  std::vector<float> data;
};

class CheckpointError : public IoError {
 public:
  enum class Kind { bad_magic, bad_version, truncated, bad_crc, shape_mismatch, io };

  CheckpointError(Kind k, const std::string& msg) : IoError(msg), kind(k) {}

  Kind kind;
};

void write_tensor_file(const std::string& path, const std::vector<NamedTensor>& tensors);
std::vector<NamedTensor> read_tensor_file(const std::string& path);

// ---- network-level helpers -------------------------------------------------

namespace detail {

template <typename T>
std::vector<float> to_f32(const std::vector<T>& v) {
  std::vector<float> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = float(v[i]);
  return out;
}

template <typename T>
std::vector<T> from_f32(const std::vector<float>& v) {
  std::vector<T> out(v.size());
  for (size_t i = 0; i < v.size(); ++i) out[i] = T(v[i]);
  return out;
}

}  // namespace detail

// Serializes every parameter and running-statistic buffer, then any extra
// tensors (which must be named "meta.*").
template <typename T>
void save_network(const model::NetworkWeights<T>& net, const std::string& path,
                  const std::vector<NamedTensor>& extra = {}) {
  std::vector<NamedTensor> tensors;
  for (const auto& l : net.layers) {
    tensors.push_back({l.spec.name + ".kernel", l.kernel_shape(), detail::to_f32(*l.kernel)});
    tensors.push_back({l.spec.name + ".bias", {l.spec.out_ch}, detail::to_f32(*l.bias)});
    if (l.spec.has_bn) {
      tensors.push_back(
          {l.spec.name + ".bn_scale", {l.spec.out_ch}, detail::to_f32(*l.bn_scale)});
      tensors.push_back(
          {l.spec.name + ".bn_shift", {l.spec.out_ch}, detail::to_f32(*l.bn_shift)});
      tensors.push_back(
          {l.spec.name + ".bn_mean", {l.spec.out_ch}, detail::to_f32(*l.bn_mean)});
      tensors.push_back(
          {l.spec.name + ".bn_var", {l.spec.out_ch}, detail::to_f32(*l.bn_var)});
    }
  }
  for (const auto& t : extra) {
    if (t.name.rfind("meta.", 0) != 0) {
      throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                            "extra checkpoint tensors must be named meta.*, got " + t.name);
    }
    tensors.push_back(t);
  }
  write_tensor_file(path, tensors);
}

// Rebuilds a network of the given architecture. Every expected tensor must be
// present with exactly the expected dims; "meta.*" tensors are returned via
// extra_out; any other surplus tensor is an error.
template <typename T>
model::NetworkWeights<T> load_network(const std::string& path,
                                      const model::Architecture& arch,
                                      std::vector<NamedTensor>* extra_out = nullptr) {
  const std::vector<NamedTensor> tensors = read_tensor_file(path);
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : tensors) {
    if (!by_name.emplace(t.name, &t).second) {
      throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                            "duplicate tensor in checkpoint: " + t.name);
    }
  }
  auto take = [&by_name, &path](const std::string& name,
                                const std::vector<int64_t>& dims) -> const NamedTensor* {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                            path + ": missing tensor " + name);
    }
    const NamedTensor* t = it->second;
    if (t->dims != dims) {
      throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                            path + ": tensor " + name + " has dims " + shape_str(t->dims) +
                                ", expected " + shape_str(dims));
    }
    by_name.erase(it);
    return t;
  };

  model::NetworkWeights<T> net;
  net.arch = arch;
  for (const model::LayerSpec& spec : model::layer_specs(arch)) {
    model::LayerParams<T> lp;
    lp.spec = spec;
    const NamedTensor* k = take(spec.name + ".kernel", lp.kernel_shape());
    lp.kernel = std::make_shared<std::vector<T>>(detail::from_f32<T>(k->data));
    const NamedTensor* b = take(spec.name + ".bias", {spec.out_ch});
    lp.bias = std::make_shared<std::vector<T>>(detail::from_f32<T>(b->data));
    if (spec.has_bn) {
      lp.bn_scale = std::make_shared<std::vector<T>>(
          detail::from_f32<T>(take(spec.name + ".bn_scale", {spec.out_ch})->data));
      lp.bn_shift = std::make_shared<std::vector<T>>(
          detail::from_f32<T>(take(spec.name + ".bn_shift", {spec.out_ch})->data));
      lp.bn_mean = std::make_shared<std::vector<T>>(
          detail::from_f32<T>(take(spec.name + ".bn_mean", {spec.out_ch})->data));
      lp.bn_var = std::make_shared<std::vector<T>>(
          detail::from_f32<T>(take(spec.name + ".bn_var", {spec.out_ch})->data));
    }
    net.layers.push_back(std::move(lp));
  }
  for (const auto& [name, t] : by_name) {
    if (name.rfind("meta.", 0) == 0) {
      if (extra_out) extra_out->push_back(*t);
      continue;
    }
    throw CheckpointError(CheckpointError::Kind::shape_mismatch,
                          path + ": unexpected tensor " + name);
  }
  return net;
}

}  // namespace specstyle::ckpt
