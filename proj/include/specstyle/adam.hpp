// include/specstyle/adam.hpp
//
// Adam with bias correction and L2 weight decay folded into the gradient
// before the moment updates:
//   g_eff = g + wd * p
//   m <- b1*m + (1-b1)*g_eff          v <- b2*v + (1-b2)*g_eff^2
//   p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)

#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "specstyle/common.hpp"
#include "specstyle/kernels.hpp"

namespace specstyle::opt {

template <typename T>
struct AdamHyper {
  T learning_rate = T(1e-3);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T eps = T(1e-8);
  T weight_decay = T(0);
};

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  int64_t step_count = 0;

  static AdamState zeros_like(const std::vector<std::vector<T>*>& params) {
    AdamState s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto* p : params) {
      s.m.emplace_back(p->size(), T(0));
      s.v.emplace_back(p->size(), T(0));
    }
    return s;
  }
};

// One optimizer step over a parameter list. Parameter i is updated in place
// from grads[i]; the two lists and the state must line up exactly.
template <typename T>
void adam_step(const std::vector<std::vector<T>*>& params,
               const std::vector<const std::vector<T>*>& grads, AdamState<T>& state,
               const AdamHyper<T>& hyper) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size()) {
    throw ShapeError("adam_step: parameter/gradient/state list sizes disagree");
  }
  state.step_count += 1;
  const T bc1 = T(1) - T(std::pow(double(hyper.beta1), double(state.step_count)));
  const T bc2 = T(1) - T(std::pow(double(hyper.beta2), double(state.step_count)));
  for (size_t i = 0; i < params.size(); ++i) {
    std::vector<T>& p = *params[i];
    const std::vector<T>& g = *grads[i];
    if (p.size() != g.size() || p.size() != state.m[i].size()) {
      throw ShapeError("adam_step: size mismatch in parameter block " + std::to_string(i));
    }
    kernels::adam_update(p.data(), g.data(), state.m[i].data(), state.v[i].data(),
                         p.size(), hyper.learning_rate, hyper.beta1, hyper.beta2,
                         hyper.eps, hyper.weight_decay, bc1, bc2);
  }
}

}  // namespace specstyle::opt
