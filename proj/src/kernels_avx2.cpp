// src/kernels_avx2.cpp
//
// AVX2+FMA kernel variants. Compiled with -mavx2 -mfma on x86-64 only; the
// dispatch layer never calls these unless cpuid reports AVX2 support.
//
// Reduction order differs from the scalar reference only inside dot/sum
// style kernels (lane-parallel accumulators); elementwise kernels apply the
// same single operation per element. matmul_nn keeps the scalar k-order per
// output element, with FMA instead of separate mul+add.

#ifdef SPECSTYLE_WITH_AVX2

#include <immintrin.h>

#include <cmath>

#include "kernels_impl.hpp"

namespace specstyle::kernels::avx2 {

namespace {

struct V8f {
  using scalar = float;
  using reg = __m256;
  static constexpr size_t width = 8;
  static reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, reg v) { _mm256_storeu_ps(p, v); }
  static reg set1(float v) { return _mm256_set1_ps(v); }
  static reg zero() { return _mm256_setzero_ps(); }
  static reg add(reg a, reg b) { return _mm256_add_ps(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_ps(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_ps(a, b); }
  static reg fma(reg a, reg b, reg c) { return _mm256_fmadd_ps(a, b, c); }
  static reg max(reg a, reg b) { return _mm256_max_ps(a, b); }
  static reg sqrt(reg a) { return _mm256_sqrt_ps(a); }
  static reg div(reg a, reg b) { return _mm256_div_ps(a, b); }
  static reg gt_mask(reg a, reg b) { return _mm256_cmp_ps(a, b, _CMP_GT_OQ); }
  static reg and_(reg a, reg b) { return _mm256_and_ps(a, b); }
  static float hsum(reg v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    lo = _mm_add_ps(lo, _mm_movehl_ps(lo, lo));
    lo = _mm_add_ss(lo, _mm_shuffle_ps(lo, lo, 1));
    return _mm_cvtss_f32(lo);
  }
};

struct V4d {
  using scalar = double;
  using reg = __m256d;
  static constexpr size_t width = 4;
  static reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, reg v) { _mm256_storeu_pd(p, v); }
  static reg set1(double v) { return _mm256_set1_pd(v); }
  static reg zero() { return _mm256_setzero_pd(); }
  static reg add(reg a, reg b) { return _mm256_add_pd(a, b); }
  static reg sub(reg a, reg b) { return _mm256_sub_pd(a, b); }
  static reg mul(reg a, reg b) { return _mm256_mul_pd(a, b); }
  static reg fma(reg a, reg b, reg c) { return _mm256_fmadd_pd(a, b, c); }
  static reg max(reg a, reg b) { return _mm256_max_pd(a, b); }
  static reg sqrt(reg a) { return _mm256_sqrt_pd(a); }
  static reg div(reg a, reg b) { return _mm256_div_pd(a, b); }
  static reg gt_mask(reg a, reg b) { return _mm256_cmp_pd(a, b, _CMP_GT_OQ); }
  static reg and_(reg a, reg b) { return _mm256_and_pd(a, b); }
  static double hsum(reg v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    lo = _mm_add_sd(lo, _mm_unpackhi_pd(lo, lo));
    return _mm_cvtsd_f64(lo);
  }
};

template <typename V, typename T = typename V::scalar>
T dot_impl(const T* a, const T* b, size_t n) {
  const size_t w = V::width;
  typename V::reg acc0 = V::zero(), acc1 = V::zero();
  size_t i = 0;
  for (; i + 2 * w <= n; i += 2 * w) {
    acc0 = V::fma(V::load(a + i), V::load(b + i), acc0);
    acc1 = V::fma(V::load(a + i + w), V::load(b + i + w), acc1);
  }
  for (; i + w <= n; i += w) {
    acc0 = V::fma(V::load(a + i), V::load(b + i), acc0);
  }
  T acc = V::hsum(V::add(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

template <typename V, typename T = typename V::scalar>
void axpy_impl(T alpha, const T* x, T* y, size_t n) {
  const size_t w = V::width;
  typename V::reg av = V::set1(alpha);
  size_t i = 0;
  for (; i + 2 * w <= n; i += 2 * w) {
    V::store(y + i, V::fma(av, V::load(x + i), V::load(y + i)));
    V::store(y + i + w, V::fma(av, V::load(x + i + w), V::load(y + i + w)));
  }
  for (; i + w <= n; i += w) {
    V::store(y + i, V::fma(av, V::load(x + i), V::load(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <typename V, typename T = typename V::scalar>
void add_impl(const T* a, const T* b, T* out, size_t n) {
  const size_t w = V::width;
  size_t i = 0;
  for (; i + w <= n; i += w) V::store(out + i, V::add(V::load(a + i), V::load(b + i)));
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename V, typename T = typename V::scalar>
void sub_impl(const T* a, const T* b, T* out, size_t n) {
  const size_t w = V::width;
  size_t i = 0;
  for (; i + w <= n; i += w) V::store(out + i, V::sub(V::load(a + i), V::load(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename V, typename T = typename V::scalar>
void mul_impl(const T* a, const T* b, T* out, size_t n) {
  const size_t w = V::width;
  size_t i = 0;
  for (; i + w <= n; i += w) V::store(out + i, V::mul(V::load(a + i), V::load(b + i)));
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename V, typename T = typename V::scalar>
void scale_impl(T alpha, const T* x, T* out, size_t n) {
  const size_t w = V::width;
  typename V::reg av = V::set1(alpha);
  size_t i = 0;
  for (; i + w <= n; i += w) V::store(out + i, V::mul(av, V::load(x + i)));
  for (; i < n; ++i) out[i] = alpha * x[i];
}

template <typename V, typename T = typename V::scalar>
T sum_impl(const T* x, size_t n) {
  const size_t w = V::width;
  typename V::reg acc0 = V::zero(), acc1 = V::zero();
  size_t i = 0;
  for (; i + 2 * w <= n; i += 2 * w) {
    acc0 = V::add(acc0, V::load(x + i));
    acc1 = V::add(acc1, V::load(x + i + w));
  }
  for (; i + w <= n; i += w) acc0 = V::add(acc0, V::load(x + i));
  T acc = V::hsum(V::add(acc0, acc1));
  for (; i < n; ++i) acc += x[i];
  return acc;
}

template <typename V, typename T = typename V::scalar>
T sumsq_diff_impl(const T* a, const T* b, size_t n) {
  const size_t w = V::width;
  typename V::reg acc = V::zero();
  size_t i = 0;
  for (; i + w <= n; i += w) {
    typename V::reg d = V::sub(V::load(a + i), V::load(b + i));
    acc = V::fma(d, d, acc);
  }
  T r = V::hsum(acc);
  for (; i < n; ++i) {
    T d = a[i] - b[i];
    r += d * d;
  }
  return r;
}

template <typename V, typename T = typename V::scalar>
void relu_impl(const T* x, T* out, size_t n) {
  const size_t w = V::width;
  typename V::reg z = V::zero();
  size_t i = 0;
  for (; i + w <= n; i += w) V::store(out + i, V::max(z, V::load(x + i)));
  for (; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename V, typename T = typename V::scalar>
void relu_backward_impl(const T* x, const T* gout, T* gin, size_t n) {
  const size_t w = V::width;
  typename V::reg z = V::zero();
  size_t i = 0;
  for (; i + w <= n; i += w) {
    typename V::reg mask = V::gt_mask(V::load(x + i), z);
    typename V::reg g = V::and_(V::load(gout + i), mask);
    V::store(gin + i, V::add(V::load(gin + i), g));
  }
  for (; i < n; ++i) {
    if (x[i] > T(0)) gin[i] += gout[i];
  }
}

// 4 rows x 2 vector columns of C held in registers across the k loop.
template <typename V, typename T = typename V::scalar>
void matmul_nn_impl(T* c, const T* a, const T* b, size_t m, size_t k,
                    size_t n) {
  const size_t w = V::width;
  size_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const T* a0 = a + i * k;
    const T* a1 = a0 + k;
    const T* a2 = a1 + k;
    const T* a3 = a2 + k;
    T* c0 = c + i * n;
    T* c1 = c0 + n;
    T* c2 = c1 + n;
    T* c3 = c2 + n;
    size_t j = 0;
    for (; j + 2 * w <= n; j += 2 * w) {
      typename V::reg r00 = V::load(c0 + j), r01 = V::load(c0 + j + w);
      typename V::reg r10 = V::load(c1 + j), r11 = V::load(c1 + j + w);
      typename V::reg r20 = V::load(c2 + j), r21 = V::load(c2 + j + w);
      typename V::reg r30 = V::load(c3 + j), r31 = V::load(c3 + j + w);
      for (size_t kk = 0; kk < k; ++kk) {
        const T* brow = b + kk * n + j;
        typename V::reg b0 = V::load(brow);
        typename V::reg b1 = V::load(brow + w);
        typename V::reg av;
        av = V::set1(a0[kk]);
        r00 = V::fma(av, b0, r00);
        r01 = V::fma(av, b1, r01);
        av = V::set1(a1[kk]);
        r10 = V::fma(av, b0, r10);
        r11 = V::fma(av, b1, r11);
        av = V::set1(a2[kk]);
        r20 = V::fma(av, b0, r20);
        r21 = V::fma(av, b1, r21);
        av = V::set1(a3[kk]);
        r30 = V::fma(av, b0, r30);
        r31 = V::fma(av, b1, r31);
      }
      V::store(c0 + j, r00);
      V::store(c0 + j + w, r01);
      V::store(c1 + j, r10);
      V::store(c1 + j + w, r11);
      V::store(c2 + j, r20);
      V::store(c2 + j + w, r21);
      V::store(c3 + j, r30);
      V::store(c3 + j + w, r31);
    }
    for (; j + w <= n; j += w) {
      typename V::reg r0 = V::load(c0 + j);
      typename V::reg r1 = V::load(c1 + j);
      typename V::reg r2 = V::load(c2 + j);
      typename V::reg r3 = V::load(c3 + j);
      for (size_t kk = 0; kk < k; ++kk) {
        typename V::reg bv = V::load(b + kk * n + j);
        r0 = V::fma(V::set1(a0[kk]), bv, r0);
        r1 = V::fma(V::set1(a1[kk]), bv, r1);
        r2 = V::fma(V::set1(a2[kk]), bv, r2);
        r3 = V::fma(V::set1(a3[kk]), bv, r3);
      }
      V::store(c0 + j, r0);
      V::store(c1 + j, r1);
      V::store(c2 + j, r2);
      V::store(c3 + j, r3);
    }
    for (; j < n; ++j) {
      T s0 = c0[j], s1 = c1[j], s2 = c2[j], s3 = c3[j];
      for (size_t kk = 0; kk < k; ++kk) {
        T bv = b[kk * n + j];
        s0 += a0[kk] * bv;
        s1 += a1[kk] * bv;
        s2 += a2[kk] * bv;
        s3 += a3[kk] * bv;
      }
      c0[j] = s0;
      c1[j] = s1;
      c2[j] = s2;
      c3[j] = s3;
    }
  }
  for (; i < m; ++i) {
    T* crow = c + i * n;
    const T* arow = a + i * k;
    for (size_t kk = 0; kk < k; ++kk) {
      axpy_impl<V>(arow[kk], b + kk * n, crow, n);
    }
  }
}

// 2 rows of A against 4 rows of B, 8 dot accumulators in flight.
template <typename V, typename T = typename V::scalar>
void matmul_nt_impl(T* c, const T* a, const T* b, size_t m, size_t k,
                    size_t n) {
  const size_t w = V::width;
  size_t i = 0;
  for (; i + 2 <= m; i += 2) {
    const T* a0 = a + i * k;
    const T* a1 = a0 + k;
    size_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const T* b0 = b + j * k;
      const T* b1 = b0 + k;
      const T* b2 = b1 + k;
      const T* b3 = b2 + k;
      typename V::reg s00 = V::zero(), s01 = V::zero(), s02 = V::zero(),
                      s03 = V::zero();
      typename V::reg s10 = V::zero(), s11 = V::zero(), s12 = V::zero(),
                      s13 = V::zero();
      size_t kk = 0;
      for (; kk + w <= k; kk += w) {
        typename V::reg av0 = V::load(a0 + kk);
        typename V::reg av1 = V::load(a1 + kk);
        typename V::reg bv0 = V::load(b0 + kk);
        typename V::reg bv1 = V::load(b1 + kk);
        typename V::reg bv2 = V::load(b2 + kk);
        typename V::reg bv3 = V::load(b3 + kk);
        s00 = V::fma(av0, bv0, s00);
        s01 = V::fma(av0, bv1, s01);
        s02 = V::fma(av0, bv2, s02);
        s03 = V::fma(av0, bv3, s03);
        s10 = V::fma(av1, bv0, s10);
        s11 = V::fma(av1, bv1, s11);
        s12 = V::fma(av1, bv2, s12);
        s13 = V::fma(av1, bv3, s13);
      }
      T t00 = V::hsum(s00), t01 = V::hsum(s01), t02 = V::hsum(s02),
        t03 = V::hsum(s03);
      T t10 = V::hsum(s10), t11 = V::hsum(s11), t12 = V::hsum(s12),
        t13 = V::hsum(s13);
      for (; kk < k; ++kk) {
        T av0 = a0[kk], av1 = a1[kk];
        t00 += av0 * b0[kk];
        t01 += av0 * b1[kk];
        t02 += av0 * b2[kk];
        t03 += av0 * b3[kk];
        t10 += av1 * b0[kk];
        t11 += av1 * b1[kk];
        t12 += av1 * b2[kk];
        t13 += av1 * b3[kk];
      }
      c[i * n + j] += t00;
      c[i * n + j + 1] += t01;
      c[i * n + j + 2] += t02;
      c[i * n + j + 3] += t03;
      c[(i + 1) * n + j] += t10;
      c[(i + 1) * n + j + 1] += t11;
      c[(i + 1) * n + j + 2] += t12;
      c[(i + 1) * n + j + 3] += t13;
    }
    for (; j < n; ++j) {
      c[i * n + j] += dot_impl<V>(a0, b + j * k, k);
      c[(i + 1) * n + j] += dot_impl<V>(a1, b + j * k, k);
    }
  }
  for (; i < m; ++i) {
    for (size_t j = 0; j < n; ++j) {
      c[i * n + j] += dot_impl<V>(a + i * k, b + j * k, k);
    }
  }
}

template <typename V, typename T = typename V::scalar>
void adam_update_impl(T* p, const T* g, T* m, T* v, size_t n, T lr, T b1, T b2,
                      T eps, T wd, T bc1, T bc2) {
  const size_t w = V::width;
  typename V::reg b1v = V::set1(b1), b2v = V::set1(b2);
  typename V::reg omb1 = V::set1(T(1) - b1), omb2 = V::set1(T(1) - b2);
  typename V::reg wdv = V::set1(wd), lrv = V::set1(lr), epsv = V::set1(eps);
  typename V::reg ibc1 = V::set1(T(1) / bc1), ibc2 = V::set1(T(1) / bc2);
  size_t i = 0;
  for (; i + w <= n; i += w) {
    typename V::reg pv = V::load(p + i);
    typename V::reg ge = V::fma(wdv, pv, V::load(g + i));
    typename V::reg mv = V::fma(omb1, ge, V::mul(b1v, V::load(m + i)));
    typename V::reg vv =
        V::fma(omb2, V::mul(ge, ge), V::mul(b2v, V::load(v + i)));
    V::store(m + i, mv);
    V::store(v + i, vv);
    typename V::reg mhat = V::mul(mv, ibc1);
    typename V::reg vhat = V::mul(vv, ibc2);
    typename V::reg denom = V::add(V::sqrt(vhat), epsv);
    V::store(p + i, V::sub(pv, V::mul(lrv, V::div(mhat, denom))));
  }
  for (; i < n; ++i) {
    T ge = g[i] + wd * p[i];
    m[i] = b1 * m[i] + (T(1) - b1) * ge;
    v[i] = b2 * v[i] + (T(1) - b2) * ge * ge;
    T mhat = m[i] / bc1;
    T vhat = v[i] / bc2;
    p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

#define SPECSTYLE_KERNEL_DEFS(T, V)                                           \
  T dot(const T* a, const T* b, size_t n) { return dot_impl<V>(a, b, n); }    \
  void axpy(T alpha, const T* x, T* y, size_t n) {                            \
    axpy_impl<V>(alpha, x, y, n);                                             \
  }                                                                           \
  void add(const T* a, const T* b, T* out, size_t n) {                        \
    add_impl<V>(a, b, out, n);                                                \
  }                                                                           \
  void sub(const T* a, const T* b, T* out, size_t n) {                        \
    sub_impl<V>(a, b, out, n);                                                \
  }                                                                           \
  void mul(const T* a, const T* b, T* out, size_t n) {                        \
    mul_impl<V>(a, b, out, n);                                                \
  }                                                                           \
  void scale(T alpha, const T* x, T* out, size_t n) {                         \
    scale_impl<V>(alpha, x, out, n);                                          \
  }                                                                           \
  T sum(const T* x, size_t n) { return sum_impl<V>(x, n); }                   \
  T sumsq_diff(const T* a, const T* b, size_t n) {                            \
    return sumsq_diff_impl<V>(a, b, n);                                       \
  }                                                                           \
  void relu(const T* x, T* out, size_t n) { relu_impl<V>(x, out, n); }        \
  void relu_backward(const T* x, const T* gout, T* gin, size_t n) {           \
    relu_backward_impl<V>(x, gout, gin, n);                                   \
  }                                                                           \
  void matmul_nn_accum(T* c, const T* a, const T* b, size_t m, size_t k,      \
                       size_t n) {                                            \
    matmul_nn_impl<V>(c, a, b, m, k, n);                                      \
  }                                                                           \
  void matmul_nt_accum(T* c, const T* a, const T* b, size_t m, size_t k,      \
                       size_t n) {                                            \
    matmul_nt_impl<V>(c, a, b, m, k, n);                                      \
  }                                                                           \
  void adam_update(T* p, const T* g, T* m, T* v, size_t n, T lr, T b1, T b2,  \
                   T eps, T wd, T bc1, T bc2) {                               \
    adam_update_impl<V>(p, g, m, v, n, lr, b1, b2, eps, wd, bc1, bc2);        \
  }

SPECSTYLE_KERNEL_DEFS(float, V8f)
SPECSTYLE_KERNEL_DEFS(double, V4d)

#undef SPECSTYLE_KERNEL_DEFS

}  // namespace specstyle::kernels::avx2

#endif  // SPECSTYLE_WITH_AVX2
