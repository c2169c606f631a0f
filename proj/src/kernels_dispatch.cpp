// src/kernels_dispatch.cpp
//
// Runtime backend selection. The default comes from cpuid, overridable with
// SPECSTYLE_KERNELS=scalar|avx2|auto; tests flip backends explicitly via
// set_backend to compare implementations.

#include "specstyle/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "kernels_impl.hpp"

namespace specstyle::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(SPECSTYLE_WITH_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend initial_backend() {
  const char* env = std::getenv("SPECSTYLE_KERNELS");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) return Backend::avx2;
    // "auto" and unknown values fall through to detection
  }
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend> g_backend{initial_backend()};

}  // namespace

Backend active_backend() { return g_backend.load(std::memory_order_relaxed); }

Backend best_backend() {
  return cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
}

bool set_backend(Backend b) {
  if (b == Backend::avx2 && !cpu_has_avx2()) return false;
  g_backend.store(b, std::memory_order_relaxed);
  return true;
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::avx2:
      return "avx2";
    case Backend::scalar:
    default:
      return "scalar";
  }
}

#ifdef SPECSTYLE_WITH_AVX2
#define SPECSTYLE_DISPATCH(call)                               \
  if (g_backend.load(std::memory_order_relaxed) == Backend::avx2) \
    return avx2::call;                                         \
  return scalar::call
#else
#define SPECSTYLE_DISPATCH(call) return scalar::call
#endif

#define SPECSTYLE_KERNEL_DISPATCH(T)                                          \
  T dot(const T* a, const T* b, size_t n) { SPECSTYLE_DISPATCH(dot(a, b, n)); } \
  void axpy(T alpha, const T* x, T* y, size_t n) {                            \
    SPECSTYLE_DISPATCH(axpy(alpha, x, y, n));                                 \
  }                                                                           \
  void add(const T* a, const T* b, T* out, size_t n) {                        \
    SPECSTYLE_DISPATCH(add(a, b, out, n));                                    \
  }                                                                           \
  void sub(const T* a, const T* b, T* out, size_t n) {                        \
    SPECSTYLE_DISPATCH(sub(a, b, out, n));                                    \
  }                                                                           \
  void mul(const T* a, const T* b, T* out, size_t n) {                        \
    SPECSTYLE_DISPATCH(mul(a, b, out, n));                                    \
  }                                                                           \
  void scale(T alpha, const T* x, T* out, size_t n) {                         \
    SPECSTYLE_DISPATCH(scale(alpha, x, out, n));                              \
  }                                                                           \
  T sum(const T* x, size_t n) { SPECSTYLE_DISPATCH(sum(x, n)); }              \
  T sumsq_diff(const T* a, const T* b, size_t n) {                            \
    SPECSTYLE_DISPATCH(sumsq_diff(a, b, n));                                  \
  }                                                                           \
  void relu(const T* x, T* out, size_t n) {                                   \
    SPECSTYLE_DISPATCH(relu(x, out, n));                                      \
  }                                                                           \
  void relu_backward(const T* x, const T* gout, T* gin, size_t n) {           \
    SPECSTYLE_DISPATCH(relu_backward(x, gout, gin, n));                       \
  }                                                                           \
  void matmul_nn_accum(T* c, const T* a, const T* b, size_t m, size_t k,      \
                       size_t n) {                                            \
    SPECSTYLE_DISPATCH(matmul_nn_accum(c, a, b, m, k, n));                    \
  }                                                                           \
  void matmul_nt_accum(T* c, const T* a, const T* b, size_t m, size_t k,      \
                       size_t n) {                                            \
    SPECSTYLE_DISPATCH(matmul_nt_accum(c, a, b, m, k, n));                    \
  }                                                                           \
  void adam_update(T* p, const T* g, T* m, T* v, size_t n, T lr, T b1, T b2,  \
                   T eps, T wd, T bc1, T bc2) {                               \
    SPECSTYLE_DISPATCH(adam_update(p, g, m, v, n, lr, b1, b2, eps, wd, bc1,   \
                                   bc2));                                     \
  }

SPECSTYLE_KERNEL_DISPATCH(float)
SPECSTYLE_KERNEL_DISPATCH(double)

#undef SPECSTYLE_KERNEL_DISPATCH
#undef SPECSTYLE_DISPATCH

}  // namespace specstyle::kernels
