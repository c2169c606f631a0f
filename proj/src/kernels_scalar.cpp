// src/kernels_scalar.cpp
//
// Reference kernels. Plain loops, fixed accumulation order; the SIMD
// variants are validated against these.

#include <cmath>

#include "kernels_impl.hpp"

namespace specstyle::kernels::scalar {

namespace {

template <typename T>
T dot_impl(const T* a, const T* b, size_t n) {
  T acc = 0;
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
void axpy_impl(T alpha, const T* x, T* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void add_impl(const T* a, const T* b, T* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void sub_impl(const T* a, const T* b, T* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename T>
void mul_impl(const T* a, const T* b, T* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void scale_impl(T alpha, const T* x, T* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

template <typename T>
T sum_impl(const T* x, size_t n) {
  T acc = 0;
  for (size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

template <typename T>
T sumsq_diff_impl(const T* a, const T* b, size_t n) {
  T acc = 0;
  for (size_t i = 0; i < n; ++i) {
    T d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

template <typename T>
void relu_impl(const T* x, T* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward_impl(const T* x, const T* gout, T* gin, size_t n) {
  for (size_t i = 0; i < n; ++i) {
    if (x[i] > T(0)) gin[i] += gout[i];
  }
}

// C[i][:] += sum_k A[i][k] * B[k][:], row at a time so the k-order per
// output element matches the AVX2 variant.
template <typename T>
void matmul_nn_impl(T* c, const T* a, const T* b, size_t m, size_t k,
                    size_t n) {
  for (size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (size_t kk = 0; kk < k; ++kk) {
      axpy_impl(arow[kk], b + kk * n, crow, n);
    }
  }
}

template <typename T>
void matmul_nt_impl(T* c, const T* a, const T* b, size_t m, size_t k,
                    size_t n) {
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < n; ++j) {
      c[i * n + j] += dot_impl(a + i * k, b + j * k, k);
    }
  }
}

template <typename T>
void adam_update_impl(T* p, const T* g, T* m, T* v, size_t n, T lr, T b1, T b2,
                      T eps, T wd, T bc1, T bc2) {
  for (size_t i = 0; i < n; ++i) {
    T ge = g[i] + wd * p[i];
    m[i] = b1 * m[i] + (T(1) - b1) * ge;
    v[i] = b2 * v[i] + (T(1) - b2) * ge * ge;
    T mhat = m[i] / bc1;
    T vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

#define SPECSTYLE_KERNEL_DEFS(T)                                              \
  T dot(const T* a, const T* b, size_t n) { return dot_impl(a, b, n); }       \
  void axpy(T alpha, const T* x, T* y, size_t n) {                            \
    axpy_impl(alpha, x, y, n);                                                \
  }                                                                           \
  void add(const T* a, const T* b, T* out, size_t n) {                        \
    add_impl(a, b, out, n);                                                   \
  }                                                                           \
  void sub(const T* a, const T* b, T* out, size_t n) {                        \
    sub_impl(a, b, out, n);                                                   \
  }                                                                           \
  void mul(const T* a, const T* b, T* out, size_t n) {                        \
    mul_impl(a, b, out, n);                                                   \
  }                                                                           \
  void scale(T alpha, const T* x, T* out, size_t n) {                         \
    scale_impl(alpha, x, out, n);                                             \
  }                                                                           \
  T sum(const T* x, size_t n) { return sum_impl(x, n); }                      \
  T sumsq_diff(const T* a, const T* b, size_t n) {                            \
    return sumsq_diff_impl(a, b, n);                                          \
  }                                                                           \
  void relu(const T* x, T* out, size_t n) { relu_impl(x, out, n); }           \
  void relu_backward(const T* x, const T* gout, T* gin, size_t n) {           \
    relu_backward_impl(x, gout, gin, n);                                      \
  }                                                                           \
  void matmul_nn_accum(T* c, const T* a, const T* b, size_t m, size_t k,      \
                       size_t n) {                                            \
    matmul_nn_impl(c, a, b, m, k, n);                                         \
  }                                                                           \
  void matmul_nt_accum(T* c, const T* a, const T* b, size_t m, size_t k,      \
                       size_t n) {                                            \
    matmul_nt_impl(c, a, b, m, k, n);                                         \
  }                                                                           \
  void adam_update(T* p, const T* g, T* m, T* v, size_t n, T lr, T b1, T b2,  \
                   T eps, T wd, T bc1, T bc2) {                               \
    adam_update_impl(p, g, m, v, n, lr, b1, b2, eps, wd, bc1, bc2);           \
  }

SPECSTYLE_KERNEL_DEFS(float)
SPECSTYLE_KERNEL_DEFS(double)

#undef SPECSTYLE_KERNEL_DEFS

}  // namespace specstyle::kernels::scalar
