// src/kernels_impl.hpp
//
// Per-backend kernel entry points. Only the dispatch layer includes this.

#pragma once

#include <cstddef>

namespace specstyle::kernels {

#define SPECSTYLE_KERNEL_DECLS(T)                                             \
  T dot(const T* a, const T* b, size_t n);                                    \
  void axpy(T alpha, const T* x, T* y, size_t n);                             \
  void add(const T* a, const T* b, T* out, size_t n);                         \
  void sub(const T* a, const T* b, T* out, size_t n);                         \
  void mul(const T* a, const T* b, T* out, size_t n);                         \
  void scale(T alpha, const T* x, T* out, size_t n);                          \
  T sum(const T* x, size_t n);                                                \
  T sumsq_diff(const T* a, const T* b, size_t n);                             \
  void relu(const T* x, T* out, size_t n);                                    \
  void relu_backward(const T* x, const T* gout, T* gin, size_t n);            \
  void matmul_nn_accum(T* c, const T* a, const T* b, size_t m, size_t k,      \
                       size_t n);                                             \
  void matmul_nt_accum(T* c, const T* a, const T* b, size_t m, size_t k,      \
                       size_t n);                                             \
  void adam_update(T* p, const T* g, T* m, T* v, size_t n, T lr, T b1, T b2,  \
                   T eps, T wd, T bc1, T bc2);

namespace scalar {
SPECSTYLE_KERNEL_DECLS(float)
SPECSTYLE_KERNEL_DECLS(double)
}  // namespace scalar

#ifdef SPECSTYLE_WITH_AVX2
namespace avx2 {
SPECSTYLE_KERNEL_DECLS(float)
SPECSTYLE_KERNEL_DECLS(double)
}  // namespace avx2
#endif

#undef SPECSTYLE_KERNEL_DECLS

}  // namespace specstyle::kernels
